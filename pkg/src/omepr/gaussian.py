"""4x4 covariance assembly for the early/late pair and Gaussian diagnostics.

Conventions: canonical ordering (x_E, p_E, x_L, p_L), second moments
Xi_ij = <O_i O_j + O_j O_i> so the two-mode vacuum is the identity, and the
symplectic form sigma = J (+) J with J = [[0, 1], [-1, 0]].  Physical states
satisfy Xi + i sigma >= 0; vacuum-normalized symplectic eigenvalues of
physical states are >= 1.

The covariance of the temporal mode pair is assembled from frequency
integrals of the detuned input-output transfer matrix contracted with the
mode weights, so it is valid for any detuning (the frequency-integral EPR
evaluators in :mod:`omepr.epr` are resonant-drive only).

An imperfect detector is a beam splitter of transmissivity eta mixing in
vacuum, Xi -> eta Xi + (1 - eta) I; the assembly applies ``params.eta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._quad import default_points, integrate_spectrum_vec
from .errors import ContractViolationError, UnphysicalCovarianceError
from .model import (
    SystemParams,
    drift_matrix,
    noise_matrix,
    noise_variances,
    require_stable,
)
from .pulses import PulseParams, mode_freq
from .spectral import output_response_dense, transfer_detuned

__all__ = [
    "ORDERING",
    "SIGMA",
    "CovarianceMatrix4",
    "WitnessResult",
    "ShotNoiseReport",
    "two_mode_squeezed",
    "covariance_from_spectra",
    "duan_value",
    "duan_x_matrix",
    "physicality_margin",
    "is_physical",
    "ppt_check",
    "partial_transpose",
    "symplectic_spectrum",
    "log_negativity",
    "symplectic_rank",
    "shot_noise_sensitivity",
    "optimal_witness",
]

ORDERING = ("x_E", "p_E", "x_L", "p_L")

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])
SIGMA = np.block([[_J, np.zeros((2, 2))], [np.zeros((2, 2)), _J]])
SIGMA.setflags(write=False)

PHYSICALITY_TOL = 1e-8


@dataclass(frozen=True)
class CovarianceMatrix4:
    """Real symmetric 4x4 second-moment matrix in (x_E, p_E, x_L, p_L) order.

    The stored matrix is symmetrized exactly; construction rejects inputs
    whose asymmetry exceeds numerical noise.  Physicality is *not* enforced
    here (measured matrices may violate it); the state-interpreting
    diagnostics check it themselves.
    """

    xi: np.ndarray
    ordering: tuple = ORDERING
    normalization: str = "vacuum=identity"

    def __post_init__(self):
        m = np.asarray(self.xi, dtype=float)
        if m.shape != (4, 4):
            raise ContractViolationError("covariance matrix must be 4x4")
        asym = np.max(np.abs(m - m.T))
        if asym > 1e-8 * max(1.0, np.max(np.abs(m))):
            raise ContractViolationError(
                f"covariance matrix asymmetry {asym:.3e} exceeds tolerance"
            )
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "xi", m)

    def swapped_modes(self) -> "CovarianceMatrix4":
        """The same state with the early/late labels exchanged.

        Composing this with relabeling maps to the (x_L, p_L, x_E, p_E)
        ordering used by some covariance-matrix conventions.
        """
        perm = [2, 3, 0, 1]
        return CovarianceMatrix4(self.xi[np.ix_(perm, perm)])

    def to_json(self) -> str:
        iu = np.triu_indices(4)
        entries = {
            f"{ORDERING[i]}*{ORDERING[j]}": float(self.xi[i, j])
            for i, j in zip(*iu)
        }
        return json.dumps(
            {
                "ordering": list(self.ordering),
                "normalization": self.normalization,
                "entries": entries,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CovarianceMatrix4":
        doc = json.loads(text)
        if tuple(doc["ordering"]) != ORDERING:
            raise ContractViolationError(f"unsupported ordering {doc['ordering']}")
        if doc["normalization"] != "vacuum=identity":
            raise ContractViolationError(
                f"unsupported normalization {doc['normalization']}"
            )
        m = np.zeros((4, 4))
        for i in range(4):
            for j in range(i, 4):
                m[i, j] = m[j, i] = doc["entries"][f"{ORDERING[i]}*{ORDERING[j]}"]
        return cls(m)


@dataclass(frozen=True)
class WitnessResult:
    """Outcome of the second-moment witness optimization.

    ``value`` is tr(X Xi) with separable threshold 2; ``x_matrix`` reproduces
    it.  ``family`` describes the parametrized test family searched.
    """

    value: float
    x_matrix: np.ndarray
    family: str
    converged: bool
    phi: float
    sweeps: int


@dataclass(frozen=True)
class ShotNoiseReport:
    """Joint physicality / PPT verdicts at a rescaled commutator x*sigma."""

    x_scale: float
    physical_at_x: bool
    ppt_at_x: bool


def two_mode_squeezed(r, mean_occupation=0.0) -> CovarianceMatrix4:
    """Two-mode squeezed (thermal) covariance with x_E + x_L squeezed.

    The transposed symplectic spectrum is (2 nbar + 1) e^{-+ 2r}; at
    mean_occupation = 0 the state is pure with Duan value 2 e^{-2r} at
    phi = 0.
    """
    ch = math.cosh(2.0 * r)
    sh = math.sinh(2.0 * r)
    nu = 2.0 * mean_occupation + 1.0
    m = nu * np.array(
        [
            [ch, 0.0, -sh, 0.0],
            [0.0, ch, 0.0, sh],
            [-sh, 0.0, ch, 0.0],
            [0.0, sh, 0.0, ch],
        ]
    )
    return CovarianceMatrix4(m)


def _mode_weight_rows(params, pulse):
    """Closure giving the 4x2 weight matrix W(omega) of the quadrature functionals.

    Row alpha of W contracts (x_out(omega), p_out(omega)) into the Hermitian
    mode quadrature O_alpha = Integral W_alpha(omega) . out(omega) domega,
    with W_alpha(-omega) = conj(W_alpha(omega)).
    """

    def w_of(omega):
        w = np.empty((4, 2), dtype=complex)
        for i, which in enumerate(("early", "late")):
            wp = mode_freq(which, omega, params, pulse)
            wm = np.conj(mode_freq(which, -omega, params, pulse))
            u = 0.5 * (wp + wm)
            v = 0.5j * (wp - wm)
            w[2 * i, 0] = u
            w[2 * i, 1] = v
            w[2 * i + 1, 0] = -v
            w[2 * i + 1, 1] = u
        return w

    return w_of


def covariance_from_spectra(params: SystemParams, pulse: PulseParams, *,
                            symmetric_brownian=False, epsabs=1e-11,
                            quad_tol=1e-7) -> CovarianceMatrix4:
    """Assemble the early/late covariance from the stationary output spectra.

    Valid for any detuning of a stable system.  The integrand is
    2 Re[W(omega) K(omega) W(omega)^+] with K = m Sigma_in m^+ the symmetrized
    output spectral matrix from the input-output transfer m(omega).
    Detection efficiency ``params.eta`` is applied as a vacuum admixture.
    """
    require_stable(params)
    w_of = _mode_weight_rows(params, pulse)
    var_in = noise_variances(params, symmetric_brownian)
    if symmetric_brownian:
        a = drift_matrix(params, True)
        n = noise_matrix(params, True)

        def tm(omega):
            return output_response_dense(omega, a, n)

    else:

        def tm(omega):
            return transfer_detuned(omega, params).m

    def integrand(omega):
        m = tm(omega)
        k = (m * var_in) @ m.conj().T
        w = w_of(omega)
        g = w @ k @ w.conj().T
        return 2.0 * g.real.ravel()

    pts = default_points(params, pulse)
    vec, err = integrate_spectrum_vec(integrand, params, pts, epsabs=epsabs,
                                      tol=None)
    if err > quad_tol * max(1.0, float(np.max(np.abs(vec)))):
        from .errors import QuadratureConvergenceError

        raise QuadratureConvergenceError(
            f"covariance quadrature error estimate {err:.3e} exceeds tolerance"
        )
    xi = vec.reshape(4, 4)
    xi = 0.5 * (xi + xi.T)
    eta = params.eta
    if eta != 1.0:
        xi = eta * xi + (1.0 - eta) * np.eye(4)
    return CovarianceMatrix4(xi)


def duan_value(cov: CovarianceMatrix4, phi: float) -> float:
    """The EPR-variance as a linear functional of the covariance matrix.

    duan = tr(Xi)/2 + cos(phi) (Xi_13 - Xi_24) - sin(phi) (Xi_14 + Xi_23),
    which equals tr(X Xi) for the test matrix of :func:`duan_x_matrix`.
    Vacuum gives 2 for every phi.
    """
    xi = cov.xi
    return float(
        0.5 * np.trace(xi)
        + math.cos(phi) * (xi[0, 2] - xi[1, 3])
        - math.sin(phi) * (xi[0, 3] + xi[1, 2])
    )


def duan_x_matrix(phi: float) -> np.ndarray:
    """Test matrix X with duan_value = tr(X Xi) and separable threshold 2."""
    c, s = math.cos(phi), math.sin(phi)
    c1 = np.array([1.0, 0.0, c, -s])
    c2 = np.array([0.0, 1.0, -s, -c])
    return 0.5 * (np.outer(c1, c1) + np.outer(c2, c2))


def physicality_margin(cov: CovarianceMatrix4, x_scale=1.0) -> float:
    """Smallest eigenvalue of the Hermitian matrix Xi + i x sigma."""
    h = cov.xi + 1j * x_scale * SIGMA
    return float(np.linalg.eigvalsh(h)[0])


def is_physical(cov: CovarianceMatrix4, tol=PHYSICALITY_TOL) -> bool:
    return physicality_margin(cov) >= -tol


def _require_physical(cov):
    margin = physicality_margin(cov)
    if margin < -PHYSICALITY_TOL:
        raise UnphysicalCovarianceError(
            f"covariance violates Xi + i sigma >= 0 by {-margin:.3e}; "
            "an underestimated shot-noise level mimics entanglement, see "
            "shot_noise_sensitivity"
        )


def partial_transpose(cov: CovarianceMatrix4) -> CovarianceMatrix4:
    """Momentum sign flip on the late mode (an involution)."""
    lam = np.diag([1.0, 1.0, 1.0, -1.0])
    return CovarianceMatrix4(lam @ cov.xi @ lam)


def symplectic_spectrum(cov: CovarianceMatrix4, transposed=False) -> np.ndarray:
    """The two symplectic eigenvalues of Xi (or of its partial transpose).

    Computed as the moduli of the eigenvalues of i sigma Xi, which come in
    +-nu pairs; physical states have nu >= 1 in this normalization.
    """
    xi = partial_transpose(cov).xi if transposed else cov.xi
    ev = np.linalg.eigvals(SIGMA @ xi)
    return np.sort(np.abs(ev))[::2]


def ppt_check(cov: CovarianceMatrix4, tol=1e-9) -> str:
    """Positivity of the partially transposed state.

    Returns "entangled" when the smallest transposed symplectic eigenvalue
    drops below 1 (which decides entanglement for two-mode Gaussian states),
    else "separable-consistent".  Unphysical input is rejected.
    """
    _require_physical(cov)
    nu_min = symplectic_spectrum(cov, transposed=True)[0]
    return "entangled" if nu_min < 1.0 - tol else "separable-consistent"


def log_negativity(cov: CovarianceMatrix4) -> float:
    """max(0, -ln nu_min) with nu_min the smallest transposed symplectic eigenvalue."""
    _require_physical(cov)
    nu_min = symplectic_spectrum(cov, transposed=True)[0]
    return max(0.0, -math.log(nu_min))


def symplectic_rank(cov: CovarianceMatrix4, tol=1e-6) -> int:
    """Number of modes with non-unit symplectic eigenvalue (0, 1 or 2).

    A pure Gaussian state has rank 0; a state in which each mode is mixed has
    rank 2.  Unit eigenvalues are counted with relative tolerance ``tol``
    to absorb quadrature-level noise in assembled covariances.
    """
    _require_physical(cov)
    nu = symplectic_spectrum(cov, transposed=False)
    m = int(np.sum(np.abs(nu - 1.0) <= tol))
    return 2 - m


def shot_noise_sensitivity(cov: CovarianceMatrix4, x_scale) -> ShotNoiseReport:
    """Physicality and PPT positivity at a rescaled commutator x*sigma.

    Demonstrates that an underestimated shot-noise calibration (x > 1 on a
    state at the physical boundary) makes the matrix simultaneously
    unphysical and seemingly entangled.  Runs on any symmetric input.
    """
    if x_scale <= 0:
        raise ContractViolationError("x_scale must be positive")
    phys = physicality_margin(cov, x_scale) >= -PHYSICALITY_TOL
    hpt = partial_transpose(cov).xi + 1j * x_scale * SIGMA
    ppt_pos = float(np.linalg.eigvalsh(hpt)[0]) >= -PHYSICALITY_TOL
    return ShotNoiseReport(x_scale=float(x_scale), physical_at_x=phys,
                           ppt_at_x=ppt_pos)


def _duan_min_phi(xi):
    """(min over phi of duan, phi_opt, cross correlator) for a raw matrix."""
    auto = 0.5 * np.trace(xi)
    c = complex(0.5 * (xi[0, 2] - xi[1, 3]), 0.5 * (xi[0, 3] + xi[1, 2]))
    if abs(c) <= 1e-13 * max(1.0, auto):
        return float(auto), 0.0, c
    return float(auto - 2.0 * abs(c)), math.remainder(math.pi - np.angle(c),
                                                      2.0 * math.pi), c


def _local_move(kind, x):
    s = np.eye(4)
    if kind in ("squeeze_E", "squeeze_L"):
        i = 0 if kind.endswith("E") else 2
        s[i, i] = math.exp(-x)
        s[i + 1, i + 1] = math.exp(x)
    else:
        i = 0 if kind.endswith("E") else 2
        c, sn = math.cos(x), math.sin(x)
        s[i, i] = c
        s[i, i + 1] = sn
        s[i + 1, i] = -sn
        s[i + 1, i + 1] = c
    return s


def _golden_min(h, lo, hi, iters=48):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    # coarse scan guards against non-unimodal sections
    xs = np.linspace(lo, hi, 9)
    vals = [h(x) for x in xs]
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    hc, hd = h(c), h(d)
    for _ in range(iters):
        if hc < hd:
            b, d, hd = d, c, hc
            c = b - invphi * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, d, hd
            d = a + invphi * (b - a)
            hd = h(d)
    return (c, hc) if hc < hd else (d, hd)


_WITNESS_FAMILY = (
    "Duan functional dressed by local symplectic transformations "
    "(per-mode rotation and squeeze, composed over sweeps) and the "
    "late-mode rotation angle phi"
)


def optimal_witness(cov: CovarianceMatrix4, *, max_sweeps=80,
                    rel_tol=1e-13) -> WitnessResult:
    """Best second-moment entanglement test in the dressed-Duan family.

    Minimizes tr(X0(phi) S Xi S^T) over local symplectic transformations
    S = S_E (+) S_L (coordinate descent with golden-section line searches,
    composing accepted moves so the search closes over the full local group)
    and analytically over phi.  Every family member is a bona fide witness:
    separable states give >= 2 for all S and phi, so value < 2 certifies
    entanglement; for two-mode Gaussian states the family attains the
    PPT-decided optimum.

    The returned matrix reproduces the value as tr(x_matrix . Xi).
    """
    _require_physical(cov)
    xi = cov.xi.copy()
    s_acc = np.eye(4)
    best, _, _ = _duan_min_phi(xi)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        improved = False
        for kind in ("squeeze_E", "squeeze_L", "rot_E", "rot_L"):
            span = 0.7 if kind.startswith("squeeze") else math.pi / 3.0

            def h(x, kind=kind):
                s = _local_move(kind, x)
                return _duan_min_phi(s @ xi @ s.T)[0]

            xstar, hstar = _golden_min(h, -span, span)
            if best - hstar > rel_tol * max(1.0, abs(best)):
                s = _local_move(kind, xstar)
                xi = s @ xi @ s.T
                s_acc = s @ s_acc
                best = hstar
                improved = True
        if not improved:
            converged = True
            break
    value, phi, _ = _duan_min_phi(xi)
    x_matrix = s_acc.T @ duan_x_matrix(phi) @ s_acc
    return WitnessResult(value=float(value), x_matrix=x_matrix,
                         family=_WITNESS_FAMILY, converged=converged,
                         phi=float(phi), sweeps=sweeps)

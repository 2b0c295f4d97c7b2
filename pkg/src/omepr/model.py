"""Physical parameters, derived rates, and stability of the linearized model.

The dynamical variables are the quadrature vector (x_m, p_m, x_c, p_c) of the
mechanical and cavity modes, driven by shot noise (x_in, p_in) and the
Hermitian Brownian force xi.  All rates are stored as angular frequencies
(rad/s); converters from Hz-style configuration keys apply the 2*pi factor
explicitly so that no other module ever needs to think about it.

Noise normalization used throughout the package: the symmetrized white-noise
correlators are diag(1/2, 1/2, n_th + 1/2) per unit bandwidth, i.e. vacuum
quadrature variance 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractViolationError, UnstableSystemError

__all__ = [
    "SystemParams",
    "DerivedRates",
    "StabilityReport",
    "params_from_keys",
    "coupling_for_cooperativity",
    "derive_rates",
    "drift_matrix",
    "noise_matrix",
    "noise_variances",
    "check_stability",
    "require_stable",
]


@dataclass(frozen=True)
class SystemParams:
    """Rates and occupations defining the optomechanical system (rad/s).

    Attributes
    ----------
    omega_m : float
        Mechanical angular frequency.
    kappa : float
        Cavity power decay rate.
    gamma_m : float
        Mechanical viscous damping rate.
    g : float
        Linearized optomechanical coupling.
    delta : float
        Drive detuning from cavity resonance.
    n_th : float
        Mean thermal phonon occupation of the mechanical bath.
    eta : float
        Detection efficiency in [0, 1].
    """

    omega_m: float
    kappa: float
    gamma_m: float
    g: float
    delta: float = 0.0
    n_th: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not (self.omega_m > 0 and self.kappa > 0 and self.gamma_m > 0):
            raise ContractViolationError(
                "omega_m, kappa and gamma_m must be strictly positive"
            )
        if self.g < 0:
            raise ContractViolationError("g must be non-negative")
        if self.n_th < 0:
            raise ContractViolationError("n_th must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise ContractViolationError("eta must lie in [0, 1]")
        if not all(
            math.isfinite(v)
            for v in (self.omega_m, self.kappa, self.gamma_m, self.g, self.delta,
                      self.n_th, self.eta)
        ):
            raise ContractViolationError("all parameters must be finite")

    @property
    def q_factor(self) -> float:
        return self.omega_m / self.gamma_m


@dataclass(frozen=True)
class DerivedRates:
    """Rates derived from :class:`SystemParams`.

    gamma_ro = 4 g^2 / kappa       (readout rate, rad/s)
    gamma_th = gamma_m (n_th + 1/2) (thermal decoherence rate, rad/s)
    c_q      = 4 g^2 / (kappa gamma_m (n_th + 1))  (quantum cooperativity)
    c_cl     = 4 g^2 / (kappa gamma_m)             (classical cooperativity)
    q_factor = omega_m / gamma_m
    """

    gamma_ro: float
    gamma_th: float
    c_q: float
    c_cl: float
    q_factor: float


@dataclass(frozen=True)
class StabilityReport:
    """Real parts of the drift spectrum and the resulting verdict."""

    drift_eigen_real_parts: tuple
    stable: bool
    margin: float


def coupling_for_cooperativity(c_q, omega_m, kappa, gamma_m, n_th):
    """Invert c_q = 4 g^2 / (kappa gamma_m (n_th+1)) for the coupling g."""
    if c_q < 0:
        raise ContractViolationError("c_q must be non-negative")
    return math.sqrt(c_q * kappa * gamma_m * (n_th + 1.0) / 4.0)


def params_from_keys(
    omega_m_hz=1.0e6,
    kappa_over_omega_m=10.0,
    q_factor=1.0e8,
    n_th=1.0e4,
    g_hz=None,
    c_q=None,
    delta_over_kappa=0.0,
    eta=1.0,
):
    """Build :class:`SystemParams` from the flat configuration keys.

    Frequencies given in Hz are converted to angular rates with an explicit
    2*pi.  Exactly one of ``g_hz`` and ``c_q`` may be given; when neither is,
    the coupling defaults to quantum cooperativity 1.
    """
    if g_hz is not None and c_q is not None:
        raise ContractViolationError("give either g_hz or c_q, not both")
    omega_m = 2.0 * math.pi * float(omega_m_hz)
    kappa = float(kappa_over_omega_m) * omega_m
    gamma_m = omega_m / float(q_factor)
    if g_hz is not None:
        g = 2.0 * math.pi * float(g_hz)
    else:
        g = coupling_for_cooperativity(
            1.0 if c_q is None else float(c_q), omega_m, kappa, gamma_m, float(n_th)
        )
    return SystemParams(
        omega_m=omega_m,
        kappa=kappa,
        gamma_m=gamma_m,
        g=g,
        delta=float(delta_over_kappa) * kappa,
        n_th=float(n_th),
        eta=float(eta),
    )


def derive_rates(params: SystemParams) -> DerivedRates:
    """Readout rate, thermal decoherence rate and the two cooperativities."""
    gamma_ro = 4.0 * params.g**2 / params.kappa
    gamma_th = params.gamma_m * (params.n_th + 0.5)
    c_cl = 4.0 * params.g**2 / (params.kappa * params.gamma_m)
    c_q = c_cl / (params.n_th + 1.0)
    return DerivedRates(
        gamma_ro=gamma_ro,
        gamma_th=gamma_th,
        c_q=c_q,
        c_cl=c_cl,
        q_factor=params.q_factor,
    )


def drift_matrix(params: SystemParams, symmetric_brownian=False) -> np.ndarray:
    """Drift matrix A of d/dt (x_m, p_m, x_c, p_c) = A (...) + noise.

    The default places viscous damping on the mechanical momentum only.  With
    ``symmetric_brownian=True`` the damping is split evenly over both
    mechanical quadratures (quantum-optical form); the two models agree at
    large quality factor.
    """
    om, gm, k, g, d = (
        params.omega_m,
        params.gamma_m,
        params.kappa,
        params.g,
        params.delta,
    )
    if symmetric_brownian:
        mech = [[-gm / 2.0, om], [-om, -gm / 2.0]]
    else:
        mech = [[0.0, om], [-om, -gm]]
    return np.array(
        [
            [mech[0][0], mech[0][1], 0.0, 0.0],
            [mech[1][0], mech[1][1], -2.0 * g, 0.0],
            [0.0, 0.0, -k / 2.0, -d],
            [-2.0 * g, 0.0, d, -k / 2.0],
        ]
    )


def noise_matrix(params: SystemParams, symmetric_brownian=False) -> np.ndarray:
    """Input coupling matrix N with d/dt s = A s + N u.

    Columns are ordered (x_in, p_in, xi) for the momentum-only Brownian model
    and (x_in, p_in, xi_x, xi_p) for the symmetric variant.
    """
    k, gm = params.kappa, params.gamma_m
    sk = math.sqrt(k)
    if symmetric_brownian:
        sg = math.sqrt(gm)
        return np.array(
            [
                [0.0, 0.0, sg, 0.0],
                [0.0, 0.0, 0.0, sg],
                [sk, 0.0, 0.0, 0.0],
                [0.0, sk, 0.0, 0.0],
            ]
        )
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, math.sqrt(2.0 * gm)],
            [sk, 0.0, 0.0],
            [0.0, sk, 0.0],
        ]
    )


def noise_variances(params: SystemParams, symmetric_brownian=False) -> np.ndarray:
    """Symmetrized white-noise variances per unit bandwidth, one per channel."""
    if symmetric_brownian:
        return np.array([0.5, 0.5, params.n_th + 0.5, params.n_th + 0.5])
    return np.array([0.5, 0.5, params.n_th + 0.5])


def _routh_hurwitz_quartic(coeffs) -> bool:
    """Stability of s^4 + c1 s^3 + c2 s^2 + c3 s + c4 by Routh-Hurwitz."""
    c1, c2, c3, c4 = coeffs
    return (
        c1 > 0
        and c3 > 0
        and c4 > 0
        and c1 * c2 * c3 - c3**2 - c1**2 * c4 > 0
    )


@lru_cache(maxsize=512)
def check_stability(params: SystemParams, symmetric_brownian=False) -> StabilityReport:
    """Eigenvalue stability of the drift matrix, cross-checked by Routh-Hurwitz.

    The eigenvalue verdict uses a tolerance of 1e-12 times the largest rate.
    When the spectrum is not marginal, a disagreement with the Routh-Hurwitz
    sign conditions on the characteristic polynomial raises a diagnostic.
    """
    a = drift_matrix(params, symmetric_brownian)
    re = np.sort(np.linalg.eigvals(a).real)
    scale = max(params.omega_m, params.kappa, params.gamma_m, params.g, abs(params.delta))
    tol = 1e-12 * scale
    stable = bool(np.all(re < -tol))
    margin = float(np.min(np.abs(re)))

    if np.max(np.abs(re)) > 0 and np.max(re) < -tol or np.min(re) > tol:
        # clearly non-marginal: the polynomial conditions must agree
        poly = np.poly(a)  # [1, c1, c2, c3, c4]
        rh = _routh_hurwitz_quartic(poly[1:])
        if rh != stable:
            raise RuntimeError(
                "eigenvalue and Routh-Hurwitz stability verdicts disagree: "
                f"eig={stable} rh={rh} for {params}"
            )
    return StabilityReport(
        drift_eigen_real_parts=tuple(float(x) for x in re),
        stable=stable,
        margin=margin,
    )


def require_stable(params: SystemParams) -> None:
    """Raise :class:`UnstableSystemError` unless the steady state exists."""
    if not check_stability(params).stable:
        raise UnstableSystemError(
            "drift matrix has a non-negative eigenvalue real part; "
            "no stationary state exists for these parameters"
        )

"""Three independent evaluators of the EPR-variance and its optimizers.

The EPR-variance of the early/late temporal mode pair is

    Delta_EPR(phi) = <r_E r_E^+ + r_E^+ r_E + r_L r_L^+ + r_L^+ r_L>
                     + (e^{i phi} <r_L r_E + r_E r_L> + h.c.)

with the rotation angle phi attached to the late mode, f_L -> f_L e^{i phi}.
Values below 2 certify entanglement of the mode pair (Duan criterion).

Evaluators
----------
``epr_exact``        resonance-aware quadrature of the exact frequency
                     integrals (shot / back-action / thermal auto- and
                     inter-mode terms plus shot x back-action cross terms).
``epr_matrix_form``  the equivalent compact Hermitian-form integral
                     2 + Integral v^+ M v domega.
``epr_closed_form``  the sideband-unresolved closed formula, exact at the
                     optimal bandwidth where it reduces to 1 + 1/(C_q + 1).

All evaluators report the value after detection-efficiency dressing
value(eta) = eta * value(1) + 2 (1 - eta), which holds exactly for a
beam-splitter loss model in front of an ideal detector.

Numerical note: the intra-mode and inter-mode integrals individually grow
like the Boltzmann occupation (1e4 and larger at the reference parameters)
while their sum stays near 2.  The evaluators therefore integrate the
*combined* integrand, in which that cancellation happens pointwise, instead
of subtracting large integrals.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from ._quad import default_points, integrate_spectrum
from .errors import BracketError, ContractViolationError
from .model import SystemParams, derive_rates, require_stable
from .pulses import PulseParams

__all__ = [
    "EPRResult",
    "PhiOptimum",
    "METHODS",
    "epr_exact",
    "epr_matrix_form",
    "epr_closed_form",
    "epr_exact_groups",
    "matrix_m",
    "gamma_opt",
    "closed_form_domain_ok",
    "optimize_phi",
    "minimize_over_gamma",
]

METHODS = ("exact_quadrature", "matrix_form", "closed_form")


@dataclass(frozen=True)
class EPRResult:
    """An EPR-variance value plus the state of the evaluation that produced it.

    ``margin`` is 2 - value, positive when entangled; ``entangled_flag`` uses
    the strict inequality value < 2 with no tolerance band.
    """

    value: float
    phi_used: float
    gamma_used: float
    method: str
    entangled_flag: bool
    margin: float
    domain_warning: bool = False
    error_estimate: float = None


@dataclass(frozen=True)
class PhiOptimum:
    """Result of the analytic rotation-angle optimization.

    phi minimizes the cross term 2 Re(e^{i phi} c) of the EPR-variance, where
    c = <r_L r_E + r_E r_L>; at the optimum the term contributes -2|c|.
    """

    phi: float
    degenerate: bool
    cross_correlator: complex


def _result(value, phi, gamma, method, err=None, domain_warning=False):
    return EPRResult(
        value=float(value),
        phi_used=float(phi),
        gamma_used=float(gamma),
        method=method,
        entangled_flag=bool(value < 2.0),
        margin=float(2.0 - value),
        domain_warning=domain_warning,
        error_estimate=err,
    )


def _dress_eta(value, eta):
    # beam-splitter loss in front of an ideal detector
    return eta * value + 2.0 * (1.0 - eta)


def _require_resonant(params):
    if params.delta != 0.0:
        raise ContractViolationError(
            "the frequency-integral EPR evaluators require delta = 0; route a "
            "detuned drive through gaussian.covariance_from_spectra instead"
        )


def _spectrum_closure(params):
    """Scalar-fast D(w), P(w) of the exact on-resonance noise factors.

    D = B(w)B(-w) + T(w)T(-w) = 4 g^2 |chi_opt|^2 |chi_m|^2
        (g^2 |chi_opt|^2 + gamma_m (n_th + 1/2))   (real, even)
    P = S(-w) B(w) = 2 g^2 |chi_opt|^2 chi_m(w)
    """
    om = params.omega_m
    gm = params.gamma_m
    k2 = params.kappa / 2.0
    g2 = params.g**2
    gth = gm * (params.n_th + 0.5)
    kap = params.kappa

    def dp(w):
        cm = om / (om * om - w * w - 1j * w * gm)
        ao2 = kap / (k2 * k2 + w * w)
        a2 = cm.real * cm.real + cm.imag * cm.imag
        d = 4.0 * g2 * ao2 * a2 * (g2 * ao2 + gth)
        p = 2.0 * g2 * ao2 * cm
        return d, p

    return dp


def _mode_closure(params, pulse):
    """Scalar-fast frequency transforms f_E(w), f_L(w).

    These are the e^{+i w t} transforms of the time envelopes (the spectral
    integrals below are written in terms of them); they equal
    pulses.mode_freq evaluated at -w.  The mirror symmetry of the pair gives
    f_E(-w) = f_L(w), which the combined integrands exploit.
    """
    om = params.omega_m
    gam = pulse.gamma
    tsep = pulse.t_sep
    ce = -1j * math.sqrt(gam / math.pi) * cmath.exp(1j * om * tsep / 2.0)
    cl = -ce

    def fe(w):
        return ce * cmath.exp(-0.5j * w * tsep) / (w - om - 1j * gam)

    def fl(w):
        return cl * cmath.exp(0.5j * w * tsep) / (w + om + 1j * gam)

    return fe, fl


def _combined_integrand(params, pulse, phi):
    """Pointwise-cancelled integrand of Delta_EPR(phi) at eta = 1.

    Sum of the four exact integral groups: shot-noise normalization,
    auto-correlations of back-action and thermal noise (intra- plus
    inter-mode, the latter rewritten via f_E(-w) f_L(w) = f_L(w)^2), and the
    shot x back-action cross terms.  At delta = 0, S(w) S(-w) = 1 exactly.
    """
    dp = _spectrum_closure(params)
    fe, fl = _mode_closure(params, pulse)
    eip = cmath.exp(1j * phi)

    def g(w):
        d, p = dp(w)
        ae = fe(w)
        al = fl(w)
        m2 = (ae.real * ae.real + ae.imag * ae.imag
              + al.real * al.real + al.imag * al.imag)
        ssq = eip * (ae * ae + al * al)
        return (
            m2 * (1.0 + 2.0 * d)          # shot normalization + auto noise
            - 2.0 * m2 * p.imag           # intra-mode shot x back-action
            - 2.0 * d * ssq.real          # inter-mode auto noise
            + 2.0 * (1j * p * ssq).real   # inter-mode shot x back-action
        )

    return g


def _integrate(params, pulse, fn, quad_tol, epsabs=1e-11):
    pts = default_points(params, pulse)
    value, err = integrate_spectrum(fn, params, pts, epsabs=epsabs)
    if quad_tol is not None and err > quad_tol * max(1.0, abs(value) / 2.0):
        from .errors import QuadratureConvergenceError

        raise QuadratureConvergenceError(
            f"EPR quadrature error estimate {err:.3e} exceeds tolerance "
            f"{quad_tol:.3e} (value {value:.6e})"
        )
    return value, err


def epr_exact(params: SystemParams, pulse: PulseParams, *, quad_tol=1e-8) -> EPRResult:
    """EPR-variance by adaptive quadrature of the exact spectral integrals.

    Requires a resonant drive and a stable system.  The quoted value includes
    the detection efficiency ``params.eta``.
    """
    _require_resonant(params)
    require_stable(params)
    g = _combined_integrand(params, pulse, pulse.phi)
    value, err = _integrate(params, pulse, g, quad_tol)
    return _result(_dress_eta(value, params.eta), pulse.phi, pulse.gamma,
                   "exact_quadrature", err=err)


def epr_exact_groups(params: SystemParams, pulse: PulseParams, *, quad_tol=1e-8):
    """The exact integral groups, for diagnostics and sign checks.

    Returns a dict with the shot-noise normalization, the net auto-correlation
    contribution (intra plus inter, non-negative pointwise), and the intra-
    and inter-mode shot x back-action terms, all at eta = 1 and the pulse's
    phi.  Their sum is the undressed EPR-variance.
    """
    _require_resonant(params)
    require_stable(params)
    dp = _spectrum_closure(params)
    fe, fl = _mode_closure(params, pulse)
    eip = cmath.exp(1j * pulse.phi)

    def parts(w):
        d, p = dp(w)
        ae = fe(w)
        al = fl(w)
        m2 = abs(ae) ** 2 + abs(al) ** 2
        ssq = eip * (ae * ae + al * al)
        return (
            m2,
            2.0 * d * (m2 - ssq.real),
            -2.0 * m2 * p.imag,
            2.0 * (1j * p * ssq).real,
        )

    out = {}
    for idx, name in enumerate(("shot", "auto_net", "pond_intra", "pond_inter")):
        val, _ = _integrate(params, pulse, lambda w, i=idx: parts(w)[i], quad_tol)
        out[name] = val
    return out


def matrix_m(omega, params: SystemParams):
    """The Hermitian 4x4 kernel M(omega) of the compact matrix form.

    Block-diagonal with 2x2 blocks built from D and P = P_R + i P_I:

        [[D - P_I, -D - i P_R], [-D + i P_R, D + P_I]]

    acting on (f_E(w), conj(f_L(-w))), and the complex-conjugate block acting
    on (conj(f_E(w)), f_L(-w)).
    """
    _require_resonant(params)
    dp = _spectrum_closure(params)
    d, p = dp(float(omega))
    pr, pi = p.real, p.imag
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = d - pi
    m[1, 1] = d + pi
    m[0, 1] = -d - 1j * pr
    m[1, 0] = -d + 1j * pr
    m[2, 2] = d - pi
    m[3, 3] = d + pi
    m[2, 3] = -d + 1j * pr
    m[3, 2] = -d - 1j * pr
    return m


def epr_matrix_form(params: SystemParams, pulse: PulseParams, *,
                    quad_tol=1e-8) -> EPRResult:
    """EPR-variance via 2 + Integral v^+ M(omega) v domega.

    v = (f_E(w), conj(f_L(-w)) e^{-i phi}, conj(f_E(w)), f_L(-w) e^{i phi}).
    Agrees with :func:`epr_exact` to quadrature tolerance; the two evaluate
    algebraically identical expressions along different code paths.
    """
    _require_resonant(params)
    require_stable(params)
    dp = _spectrum_closure(params)
    fe, fl = _mode_closure(params, pulse)
    eip = cmath.exp(1j * pulse.phi)

    def integrand(w):
        d, p = dp(w)
        v1 = fe(w)
        v2 = fl(-w).conjugate() / eip
        v4 = fl(-w) * eip
        # block structure of M written out; v3 = conj(v1)
        diag = (d - p.imag) * 2.0 * (v1.real**2 + v1.imag**2) \
            + (d + p.imag) * 2.0 * (v2.real**2 + v2.imag**2)
        off = 2.0 * (v1.conjugate() * (-d - 1j * p.real) * v2).real \
            + 2.0 * (v1 * (-d + 1j * p.real) * v4).real
        return diag + off

    value, err = _integrate(params, pulse, integrand, quad_tol)
    return _result(_dress_eta(2.0 + value, params.eta), pulse.phi, pulse.gamma,
                   "matrix_form", err=err)


def gamma_opt(params: SystemParams) -> float:
    """Optimal pulse bandwidth 2 (Gamma_ro + Gamma_th) + gamma_m / 2."""
    r = derive_rates(params)
    return 2.0 * (r.gamma_ro + r.gamma_th) + params.gamma_m / 2.0


def closed_form_domain_ok(params: SystemParams, pulse: PulseParams) -> bool:
    """Whether the pulse bandwidth is safely inside the closed-form domain.

    The closed formula assumes gamma << omega_m / sqrt(n_th (C_q + 1)); the
    check uses a factor-10 margin on that bound.
    """
    r = derive_rates(params)
    denom = params.n_th * (r.c_q + 1.0)
    if denom <= 0.0:
        return True
    return pulse.gamma <= 0.1 * params.omega_m / math.sqrt(denom)


def epr_closed_form(params: SystemParams, pulse: PulseParams) -> EPRResult:
    """The sideband-unresolved closed formula for the EPR-variance.

    Delta = 2 + eta (4 Gamma_ro / (gamma + gamma_m/2)) [
        (2 (Gamma_ro + Gamma_th) / gamma_m) (1 - s cos phi) - s cos phi ]
    with s = gamma e^{-gamma_m t_sep / 2} / (gamma + gamma_m/2).  At the
    optimal bandwidth, eta = 1 and t_sep = 0 this reduces to 1 + 1/(C_q + 1).
    ``domain_warning`` flags bandwidths outside the formula's accuracy domain.
    """
    r = derive_rates(params)
    gm = params.gamma_m
    gam = pulse.gamma
    s = gam * math.exp(-gm * pulse.t_sep / 2.0) / (gam + gm / 2.0)
    cphi = math.cos(pulse.phi)
    bracket = (2.0 * (r.gamma_ro + r.gamma_th) / gm) * (1.0 - s * cphi) - s * cphi
    value = 2.0 + params.eta * (4.0 * r.gamma_ro / (gam + gm / 2.0)) * bracket
    return _result(value, pulse.phi, gam, "closed_form",
                   domain_warning=not closed_form_domain_ok(params, pulse))


def _cross_correlator_spectral(params, pulse, quad_tol):
    """c = <r_L r_E + r_E r_L> at phi = 0, as a frequency integral.

    c = Integral (f_E^2 + f_L^2) (-D + i P) domega; moderate absolute
    accuracy suffices since only the phase (and a bracketing magnitude) of c
    are consumed.
    """
    dp = _spectrum_closure(params)
    fe, fl = _mode_closure(params, pulse)

    def cpart(w, part):
        d, p = dp(w)
        val = (fe(w) ** 2 + fl(w) ** 2) * (-d + 1j * p)
        return val.real if part == 0 else val.imag

    pts = default_points(params, pulse)
    re, e1 = integrate_spectrum(lambda w: cpart(w, 0), params, pts, epsabs=1e-9)
    im, e2 = integrate_spectrum(lambda w: cpart(w, 1), params, pts, epsabs=1e-9)
    return complex(re, im), e1 + e2


def _wrap_phase(phi):
    return math.remainder(phi, 2.0 * math.pi)


def optimize_phi(params_or_cov, pulse=None, *, quad_tol=1e-8) -> PhiOptimum:
    """Rotation angle minimizing the EPR-variance: phi_opt = pi - arg(c).

    Accepts either a system/pulse pair (c evaluated spectrally, delta = 0) or
    a 4x4 covariance object with attribute ``xi`` in (x_E, p_E, x_L, p_L)
    ordering, where c = ((Xi_13 - Xi_24) + i (Xi_14 + Xi_23)) / 2.
    A vanishing cross correlator leaves phi undetermined; phi = 0 is returned
    with the degeneracy flag set.
    """
    if hasattr(params_or_cov, "xi"):
        xi = params_or_cov.xi
        c = complex(0.5 * (xi[0, 2] - xi[1, 3]), 0.5 * (xi[0, 3] + xi[1, 2]))
        scale = max(1.0, abs(np.trace(xi)) / 4.0)
    else:
        if pulse is None:
            raise ContractViolationError(
                "optimize_phi needs a PulseParams when given SystemParams"
            )
        _require_resonant(params_or_cov)
        c, _ = _cross_correlator_spectral(params_or_cov, pulse, quad_tol)
        scale = max(1.0, abs(c))
    if abs(c) <= 1e-13 * scale:
        return PhiOptimum(phi=0.0, degenerate=True, cross_correlator=c)
    return PhiOptimum(phi=_wrap_phase(math.pi - cmath.phase(c)),
                      degenerate=False, cross_correlator=c)


def _epr_at_optimal_phi(params, pulse, method, quad_tol):
    """(EPRResult at the analytically optimal phi) for one bandwidth."""
    if method == "closed_form":
        # the cos(phi) coefficient in the closed formula is non-positive
        return epr_closed_form(params, replace(pulse, phi=0.0))
    opt = optimize_phi(params, pulse, quad_tol=quad_tol)
    p = replace(pulse, phi=opt.phi)
    if method == "exact_quadrature":
        return epr_exact(params, p, quad_tol=quad_tol)
    return epr_matrix_form(params, p, quad_tol=quad_tol)


def minimize_over_gamma(params: SystemParams, method="exact_quadrature",
                        t_sep=0.0, eta=None, *, quad_tol=1e-8,
                        iters=60, grid_size=19) -> EPRResult:
    """Minimize the EPR-variance over the pulse bandwidth at optimal phi.

    A log-spaced grid over [gamma_m, 0.1 kappa] (always including the
    closed-form optimum) locates a bracketing triple, which golden-section
    refines on log gamma.  Raises :class:`BracketError` when no interior
    minimum exists on the grid.
    """
    if method not in METHODS:
        raise ContractViolationError(f"method must be one of {METHODS}")
    if eta is not None:
        params = replace(params, eta=eta)
    require_stable(params)

    lo, hi = params.gamma_m, 0.1 * params.kappa
    seed = min(max(gamma_opt(params), lo), hi)
    grid = np.geomspace(lo, hi, grid_size)
    grid = np.unique(np.concatenate([grid, [seed]]))

    cache = {}

    def f(gam):
        if gam not in cache:
            cache[gam] = _epr_at_optimal_phi(
                params, PulseParams(gamma=gam, t_sep=t_sep), method, quad_tol
            )
        return cache[gam].value

    vals = [f(g) for g in grid]
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        raise BracketError(
            "no bracketing triple for the bandwidth minimization on "
            f"[{lo:.3e}, {hi:.3e}] rad/s"
        )

    # golden section on log gamma
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(grid[i - 1]), math.log(grid[i + 1])
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    for _ in range(iters):
        if b - a < 1e-6:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
    gbest = math.exp(c) if fc < fd else math.exp(d)
    return cache[gbest]

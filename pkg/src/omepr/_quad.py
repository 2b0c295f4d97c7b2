"""Resonance-aware frequency quadrature shared by the EPR and covariance engines.

The stationary spectra are products of Lorentzians whose widths span up to
eight orders of magnitude (pulse bandwidth down to gamma_m/2 inside a
kappa-wide envelope), so plain adaptive quadrature never finds the peaks.
Every integral here is evaluated in the rescaled variable u = omega/omega_m
over three pieces: (-inf, -X], [-X, X] with forced subdivision points at the
resonances, and [X, inf), with X = 10 max(kappa, omega_m).  The slow 1/omega^2
tails of the mode-function Lorentzians carry part of the shot-noise
normalization, which is why the outer pieces run to infinity.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad, quad_vec

from .errors import QuadratureConvergenceError

_K_FACTORS = (1.0, 3.0, 10.0, 30.0)


def resonance_points(centers, widths, cut, extras=()):
    """Forced subdivision points: each center plus offsets at k*width.

    Parameters
    ----------
    centers, widths : sequences of float
        Peak locations (rad/s) and the characteristic widths present at each
        of them.  Every width is applied around every center.
    cut : float
        Half-length of the finite panel; points outside (-cut, cut) are
        dropped.
    extras : sequence of float
        Additional breakpoints (e.g. kappa-scale features).
    """
    pts = {0.0}
    for c in centers:
        pts.add(c)
        for w in widths:
            if w <= 0:
                continue
            for k in _K_FACTORS:
                pts.add(c - k * w)
                pts.add(c + k * w)
    pts.update(extras)
    return sorted(p for p in pts if -cut < p < cut)


def default_points(params, pulse=None, cut=None):
    """Breakpoints for the closed-loop spectra of ``params`` (and a pulse pair).

    Peak centers come from the drift-matrix eigenvalues (imaginary parts),
    which reduces to +-omega_m on resonance but follows the optical spring at
    nonzero detuning; widths combine the eigenvalue decay rates with the pulse
    bandwidth.
    """
    from .model import drift_matrix

    eigs = np.linalg.eigvals(drift_matrix(params))
    centers = sorted({float(e.imag) for e in eigs if abs(e.imag) > 0})
    if not centers:
        centers = [-params.omega_m, params.omega_m]
    widths = sorted({max(abs(float(e.real)), 1e-300) for e in eigs})
    if pulse is not None:
        widths.append(pulse.gamma)
    if cut is None:
        cut = spectral_cut(params)
    extras = (-params.kappa, -params.kappa / 2, params.kappa / 2, params.kappa)
    return resonance_points(centers, widths, cut, extras)


def spectral_cut(params):
    return 10.0 * max(params.kappa, params.omega_m)


def integrate_spectrum(f, params, points, cut=None, epsabs=1e-11, epsrel=1e-12,
                       limit=800, tol=None):
    """Integrate a scalar real integrand over the whole frequency axis.

    ``f`` takes omega in rad/s.  Returns (value, error_estimate); raises
    :class:`QuadratureConvergenceError` when the estimate exceeds ``tol``.
    """
    if cut is None:
        cut = spectral_cut(params)
    scale = params.omega_m

    def fu(u):
        return scale * f(u * scale)

    ucut = cut / scale
    upts = [p / scale for p in points]
    with np.errstate(all="ignore"):
        v1, e1 = quad(fu, -ucut, ucut, points=upts, limit=limit,
                      epsabs=epsabs, epsrel=epsrel)
        v2, e2 = quad(fu, ucut, np.inf, limit=200, epsabs=epsabs, epsrel=epsrel)
        v3, e3 = quad(fu, -np.inf, -ucut, limit=200, epsabs=epsabs, epsrel=epsrel)
    value = v1 + v2 + v3
    err = e1 + e2 + e3
    if tol is not None and err > tol:
        raise QuadratureConvergenceError(
            f"frequency integral error estimate {err:.3e} exceeds tolerance {tol:.3e}"
        )
    return value, err


def integrate_spectrum_vec(f, params, points, cut=None, epsabs=1e-11,
                           epsrel=1e-12, limit=2000, tol=None):
    """Vector-valued version of :func:`integrate_spectrum` (shared refinement)."""
    if cut is None:
        cut = spectral_cut(params)
    scale = params.omega_m

    def fu(u):
        return scale * f(u * scale)

    ucut = cut / scale
    upts = [p / scale for p in points]
    with np.errstate(all="ignore"):
        v1, e1 = quad_vec(fu, -ucut, ucut, points=upts, limit=limit,
                          epsabs=epsabs, epsrel=epsrel)
        v2, e2 = quad_vec(fu, ucut, np.inf, limit=400, epsabs=epsabs, epsrel=epsrel)
        v3, e3 = quad_vec(fu, -np.inf, -ucut, limit=400, epsabs=epsabs, epsrel=epsrel)
    value = v1 + v2 + v3
    err = e1 + e2 + e3
    if tol is not None and err > tol:
        raise QuadratureConvergenceError(
            f"frequency integral error estimate {err:.3e} exceeds tolerance {tol:.3e}"
        )
    return value, err

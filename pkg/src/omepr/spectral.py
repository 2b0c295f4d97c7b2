"""Frequency-domain solution of the quantum Langevin equations.

Fourier convention: h(omega) = (2*pi)^(-1/2) Integral dt e^{+i omega t} h(t),
so that d/dt maps to -i*omega, and the adjoint is taken after the transform,
h^dag(omega) = (h(omega))^dag.  With this convention the resonantly driven
cavity obeys

    x_out(omega) = S(omega) x_in(omega)
    p_out(omega) = S(omega) p_in(omega)
                   + 4 g^2 chi_opt^2 chi_m x_in(omega)
                   - 2 g sqrt(2 gamma_m) chi_opt chi_m xi(omega)

and the detuned case is obtained by solving the full 4x4 linear system.
All functions are vectorized over ``omega``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .model import SystemParams, derive_rates, require_stable

__all__ = [
    "NoiseFactors",
    "TransferMatrix",
    "chi_m",
    "chi_opt",
    "refl_phase",
    "noise_factors_exact",
    "noise_factors_adiabatic",
    "transfer_detuned",
    "output_response_dense",
]


@dataclass(frozen=True)
class NoiseFactors:
    """Dimensionless pre-factors of shot, back-action and thermal noise.

    Evaluated at the frequencies they were requested for; each field has the
    shape of the ``omega`` argument.  They obey s(-w) = conj(s(w)) and the
    same for b and t.
    """

    s: np.ndarray
    b: np.ndarray
    t: np.ndarray


@dataclass(frozen=True)
class TransferMatrix:
    """2x3 map from Fourier-domain inputs (x_in, p_in, xi) to (x_out, p_out).

    ``m`` has shape ``omega.shape + (2, 3)``.
    """

    omega: np.ndarray
    m: np.ndarray


def chi_m(omega, params: SystemParams):
    """Mechanical susceptibility omega_m / (omega_m^2 - omega^2 - i omega gamma_m)."""
    om, gm = params.omega_m, params.gamma_m
    w = np.asarray(omega, dtype=float)
    return om / (om**2 - w**2 - 1j * w * gm)


def chi_opt(omega, params: SystemParams):
    """Optical susceptibility sqrt(kappa) / (kappa/2 - i omega)."""
    w = np.asarray(omega, dtype=float)
    return np.sqrt(params.kappa) / (params.kappa / 2.0 - 1j * w)


def refl_phase(omega, params: SystemParams):
    """Cavity reflection phase S(omega) = (kappa/2 + i omega)/(kappa/2 - i omega)."""
    w = np.asarray(omega, dtype=float)
    return (params.kappa / 2.0 + 1j * w) / (params.kappa / 2.0 - 1j * w)


def noise_factors_exact(omega, params: SystemParams) -> NoiseFactors:
    """Exact on-resonance noise pre-factors.

    S(w) as above, B = 2 g^2 chi_opt^2 chi_m, and
    T = 2 g sqrt(gamma_m (n_th + 1/2)) chi_opt chi_m.  Only valid for a
    resonant drive; a nonzero detuning is rejected.
    """
    if params.delta != 0.0:
        raise ContractViolationError(
            "noise_factors_exact requires delta = 0; "
            "use transfer_detuned for a detuned drive"
        )
    cm = chi_m(omega, params)
    co = chi_opt(omega, params)
    b = 2.0 * params.g**2 * co**2 * cm
    t = 2.0 * params.g * np.sqrt(params.gamma_m * (params.n_th + 0.5)) * co * cm
    return NoiseFactors(s=refl_phase(omega, params), b=b, t=t)


def noise_factors_adiabatic(omega, params: SystemParams) -> NoiseFactors:
    """Sideband-unresolved approximation of the noise pre-factors.

    S ~ 1, B ~ 2 Gamma_ro chi_m, T ~ 2 sqrt(Gamma_ro Gamma_th) chi_m.  Intended
    for kappa >> omega_m >> gamma_m; nothing is enforced so callers can compare
    regimes.
    """
    rates = derive_rates(params)
    cm = chi_m(omega, params)
    w = np.asarray(omega, dtype=float)
    return NoiseFactors(
        s=np.ones_like(w, dtype=complex),
        b=2.0 * rates.gamma_ro * cm,
        t=2.0 * np.sqrt(rates.gamma_ro * rates.gamma_th) * cm,
    )


def transfer_detuned(omega, params: SystemParams) -> TransferMatrix:
    """Input-output transfer matrix for arbitrary detuning.

    Solves (-i omega I - A) s = N u in closed form (block elimination of the
    tiny fixed-size system) and applies x_out = sqrt(kappa) x_c - x_in and the
    analogue for p.  Requires a stable drift matrix.

    Returns
    -------
    TransferMatrix
        ``m[..., 0, :]`` is the x_out row over (x_in, p_in, xi) and
        ``m[..., 1, :]`` the p_out row.
    """
    require_stable(params)
    w = np.asarray(omega, dtype=float)
    k, g, dl = params.kappa, params.g, params.delta
    sk = np.sqrt(k)
    cm = chi_m(w, params)
    d = k / 2.0 - 1j * w
    den = d**2 + dl**2 + 4.0 * g**2 * dl * cm
    sg = np.sqrt(2.0 * params.gamma_m)

    # cavity quadratures per unit input, columns (x_in, p_in, xi)
    xc = np.stack(
        [d * sk / den, -dl * sk / den, 2.0 * g * dl * cm * sg / den], axis=-1
    )
    lam = (dl + 4.0 * g**2 * cm)[..., None]
    pc = (lam * xc) / d[..., None]
    pc[..., 1] += sk / d
    pc[..., 2] += -2.0 * g * cm * sg / d

    m = np.empty(w.shape + (2, 3), dtype=complex)
    m[..., 0, :] = sk * xc
    m[..., 0, 0] -= 1.0
    m[..., 1, :] = sk * pc
    m[..., 1, 1] -= 1.0
    return TransferMatrix(omega=w, m=m)


def output_response_dense(omega, a, n):
    """Output rows via a dense linear solve; oracle for the closed form.

    Parameters
    ----------
    omega : float
        Single angular frequency.
    a, n : ndarray
        Drift and input-coupling matrices (any Brownian-noise variant).

    Returns
    -------
    ndarray of shape (2, n.shape[1])
    """
    nst = a.shape[0]
    state = np.linalg.solve(-1j * omega * np.eye(nst) - a, n.astype(complex))
    sk = np.sqrt(-2.0 * a[2, 2])  # kappa/2 sits on the cavity diagonal
    out = sk * state[2:4, :]
    out[0, 0] -= 1.0
    out[1, 1] -= 1.0
    return out

"""Temporal mode functions of the early and late pulses.

The early mode has a rising exponential envelope supported on
t <= -t_sep/2 and demodulates the red sideband; the late mode is its mirror
image on t >= +t_sep/2 and demodulates the blue sideband:

    f_E(t) = N exp((gamma - i omega_m) t) theta(-t - t_sep/2)
    f_L(t) = N exp((-gamma + i omega_m) t) theta(t - t_sep/2)

with N = (2 gamma exp(gamma t_sep))^(1/2), so both are unit-normalized and
mutually orthogonal (disjoint supports).  Note f_L(t) = f_E(-t).

``mode_freq`` returns the demodulation weight

    w_i(omega) = (2*pi)^(-1/2) Integral dt e^{-i omega t} f_i(t),

the kernel with which the mode operator acts on the output field in Fourier
space, r_i = Integral domega w_i(omega) a_out(omega).  With this convention
|w_E|^2 is a Lorentzian of half-width gamma centered on the red sideband at
-omega_m, and |w_L|^2 its mirror at +omega_m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ContractViolationError
from .model import SystemParams

__all__ = ["PulseParams", "mode_time", "mode_freq", "overlap"]

_WHICH = ("early", "late")


@dataclass(frozen=True)
class PulseParams:
    """Bandwidth gamma (rad/s), separation t_sep (s), rotation angle phi (rad).

    The EPR angle phi is applied as the replacement f_L -> f_L e^{i phi} by the
    consumers of these mode functions; it does not enter the envelopes here.
    """

    gamma: float
    t_sep: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ContractViolationError("pulse bandwidth gamma must be positive")
        if self.t_sep < 0:
            raise ContractViolationError("pulse separation t_sep must be non-negative")


def _check_which(which):
    if which not in _WHICH:
        raise ContractViolationError(f"which must be one of {_WHICH}, got {which!r}")


def mode_time(which, t, params: SystemParams, pulse: PulseParams):
    """Time-domain mode function f_E or f_L evaluated at t (seconds).

    The Heaviside convention is theta(0) = 1, so the boundary points
    t = -t_sep/2 (early) and t = +t_sep/2 (late) belong to the support.
    """
    _check_which(which)
    t = np.asarray(t, dtype=float)
    gam, tsep = pulse.gamma, pulse.t_sep
    om = params.omega_m
    norm = math.sqrt(2.0 * gam) * math.exp(gam * tsep / 2.0)
    if which == "early":
        inside = t <= -tsep / 2.0
        rate = gam - 1j * om
    else:
        inside = t >= tsep / 2.0
        rate = -gam + 1j * om
    # evaluate the exponential only inside the support to avoid overflow
    out = np.zeros(t.shape, dtype=complex)
    out[inside] = norm * np.exp(rate * t[inside])
    return out if out.ndim else out[()]


def mode_freq(which, omega, params: SystemParams, pulse: PulseParams):
    """Frequency-domain demodulation weight w_E or w_L (see module docstring).

    Both are Lorentzians of half-width gamma,

        w_E(omega) = +i sqrt(gamma/pi) e^{i omega_m t_sep/2}
                     e^{+i omega t_sep/2} / (omega + omega_m + i gamma)
        w_L(omega) = -i sqrt(gamma/pi) e^{i omega_m t_sep/2}
                     e^{-i omega t_sep/2} / (omega - omega_m - i gamma)

    peaked at -omega_m (early) and +omega_m (late).
    """
    _check_which(which)
    w = np.asarray(omega, dtype=float)
    gam, tsep = pulse.gamma, pulse.t_sep
    om = params.omega_m
    amp = math.sqrt(gam / math.pi)
    phase = np.exp(1j * om * tsep / 2.0)
    if which == "early":
        return 1j * amp * phase * np.exp(1j * w * tsep / 2.0) / (w + om + 1j * gam)
    return -1j * amp * phase * np.exp(-1j * w * tsep / 2.0) / (w - om - 1j * gam)


def overlap(which_i, which_j, params: SystemParams, pulse: PulseParams,
            support_decades=40.0):
    """Numerical overlap Integral f_i(t) conj(f_j(t)) dt.

    Returns the Kronecker delta within quadrature tolerance: the mode pair is
    orthonormal by construction.  Integration runs over the (truncated)
    support of the product; envelopes are cut where they have decayed by
    exp(-support_decades).
    """
    _check_which(which_i)
    _check_which(which_j)
    gam, tsep = pulse.gamma, pulse.t_sep
    cut = support_decades / gam

    def seg(which):
        if which == "early":
            return (-tsep / 2.0 - cut, -tsep / 2.0)
        return (tsep / 2.0, tsep / 2.0 + cut)

    lo = max(seg(which_i)[0], seg(which_j)[0])
    hi = min(seg(which_i)[1], seg(which_j)[1])
    if hi <= lo:
        return 0.0 + 0.0j

    def integrand(t, part):
        v = mode_time(which_i, t, params, pulse) * np.conj(
            mode_time(which_j, t, params, pulse)
        )
        return v.real if part == "re" else v.imag

    re, _ = quad(integrand, lo, hi, args=("re",), limit=200)
    im, _ = quad(integrand, lo, hi, args=("im",), limit=200)
    return re + 1j * im

"""Closed-form solutions for the resonant and detuned charger/battery models.

The resonant two-TLS battery observables are superpositions of damped
(hyperbolic) oscillations built from the kernel

    chi(gamma, g, f; t) = cosh(O t/4) + (gamma/O) sinh(O t/4),
    O = sqrt(gamma^2 - 32 f g^2),

with branch constants f0 = 1/2 and

    f1,2 = 1 + 2 (F/g)^2 -/+ sqrt(1 + 4 (F/g)^2).

O is taken as the principal complex square root; the result is real for
either sign of gamma^2 - 32 f g^2, which covers the underdamped and
overdamped regimes on one expression. Near criticality (O -> 0) a power
series in O^2 avoids the 0/0 of sinh(O t/4)/O. The physical observables
always carry the exp(-gamma t/4) envelope; internally the envelope is folded
into the kernel so overdamped evaluations stay finite at arbitrarily large t.

The two-HO battery energy admits an analogous closed form with damping
argument G = sqrt(gamma^2 - 16 g^2); the drive enters only through the
overall scale (F/g)^2.
"""

from __future__ import annotations

import math
import warnings
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import OnResonancePole, RegimeMismatch, RequiresResonance
from .models import Params

RESONANCE_TOL = 1e-12
# switch to the series form of the kernel when |O t/4|^2 is below this
_SERIES_X2 = 1e-4


class Regime(Enum):
    SMALL_GAMMA = "small_gamma"
    LARGE_GAMMA_WEAK_DRIVE = "large_gamma_weak_drive"
    LARGE_GAMMA_STRONG_DRIVE = "large_gamma_strong_drive"
    HO_SMALL_GAMMA = "ho_small_gamma"
    HO_LARGE_GAMMA = "ho_large_gamma"


class DetunedCase(Enum):
    DETUNED_DRIVE = "detuned_drive"          # D_Cd = D_Bd != 0
    DETUNED_CHARGER_BATTERY = "detuned_cb"   # D_CB = D_Cd != 0, D_Bd = 0


def branch_constants(p: Params) -> Tuple[float, float, float]:
    """(f0, f1, f2) controlling the three damped-oscillation branches."""
    r2 = (p.F / p.g) ** 2
    root = math.sqrt(1.0 + 4.0 * r2)
    return 0.5, 1.0 + 2.0 * r2 - root, 1.0 + 2.0 * r2 + root


def _series_kernel(gamma_c: float, x2: np.ndarray, t: np.ndarray) -> np.ndarray:
    """cosh(x) + (gamma t/4) sinh(x)/x expanded in x^2 = omega_sq (t/4)^2."""
    cosh_s = 1.0 + x2 / 2.0 + x2 * x2 / 24.0 + x2 ** 3 / 720.0
    sinhc = 1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2 ** 3 / 5040.0
    return cosh_s + gamma_c * t / 4.0 * sinhc


def _kernel(gamma_c: float, omega_sq: float, t) -> np.ndarray | float:
    """cosh(O t/4) + (gamma/O) sinh(O t/4), O = sqrt(omega_sq), real output."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x2 = omega_sq * (t / 4.0) ** 2
    out = np.empty_like(t)
    small = np.abs(x2) < _SERIES_X2
    if small.any():
        out[small] = _series_kernel(gamma_c, x2[small], t[small])
    big = ~small
    if big.any():
        omega = np.sqrt(complex(omega_sq))
        x = omega * t[big] / 4.0
        out[big] = np.real(np.cosh(x) + (gamma_c / omega) * np.sinh(x))
    return float(out[0]) if scalar else out


def _damped_kernel(gamma_c: float, omega_sq: float, t) -> np.ndarray | float:
    """exp(-gamma t/4) * kernel, evaluated without overflow for any t >= 0.

    omega_sq = gamma^2 - s with s >= 0, so both exponents
    (+-O - gamma) t/4 are non-positive in the overdamped regime.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x2 = omega_sq * (t / 4.0) ** 2
    out = np.empty_like(t)

    small = np.abs(x2) < _SERIES_X2
    if small.any():
        out[small] = np.exp(-gamma_c * t[small] / 4.0) * _series_kernel(
            gamma_c, x2[small], t[small])
    if omega_sq < 0.0:
        osc = ~small
        if osc.any():
            w = math.sqrt(-omega_sq)
            ph = w * t[osc] / 4.0
            out[osc] = np.exp(-gamma_c * t[osc] / 4.0) * (
                np.cos(ph) + (gamma_c / w) * np.sin(ph))
    else:
        over = ~small
        if over.any():
            omega = math.sqrt(omega_sq)
            s = gamma_c * gamma_c - omega_sq
            # slow rate (gamma - O)/4 without cancellation: s / (gamma + O)
            r_slow = -s / (gamma_c + omega) if (gamma_c + omega) > 0 else 0.0
            r_fast = -(gamma_c + omega)
            c = gamma_c / omega if omega > 0 else math.inf
            ts = t[over] / 4.0
            out[over] = 0.5 * ((1.0 + c) * np.exp(r_slow * ts)
                               + (1.0 - c) * np.exp(r_fast * ts))
    return float(out[0]) if scalar else out


def chi(gamma_c: float, g: float, f: float, t) -> np.ndarray | float:
    """Damped-oscillation kernel for branch constant ``f``; chi(t=0) = 1."""
    return _kernel(gamma_c, gamma_c ** 2 - 32.0 * f * g * g, t)


def _require_resonance(p: Params):
    if not p.resonant(RESONANCE_TOL):
        raise RequiresResonance(
            f"closed form requires delta_Cd = delta_Bd = 0, got "
            f"({p.delta_Cd}, {p.delta_Bd})"
        )


def tls_sigma_z_closed(p: Params, t) -> np.ndarray | float:
    """Battery inversion <sz_B>(t) for the resonant two-TLS model."""
    _require_resonance(p)
    r2 = (p.F / p.g) ** 2
    root = math.sqrt(1.0 + 4.0 * r2)
    f0, f1, f2 = branch_constants(p)
    gam, g = p.gamma_C, p.g

    def damped(f):
        return _damped_kernel(gam, gam * gam - 32.0 * f * g * g, t)

    bracket = (8.0 * r2 * damped(f0) + (1.0 + root) * damped(f1)
               + (1.0 - root) * damped(f2))
    return -bracket / (2.0 * (1.0 + 4.0 * r2))


def tls_energy_closed(p: Params, t) -> np.ndarray | float:
    """Battery energy E_B(t) for the resonant two-TLS model."""
    return 0.5 * p.omega_B * (tls_sigma_z_closed(p, t) + 1.0)


def tls_energy_largegamma(p: Params, t) -> np.ndarray | float:
    """Three-exponential approximation of the energy, valid for gamma_C >> F, g.

    Each oscillation branch relaxes like exp(-4 f g^2 t / gamma) plus a fast
    exp(-gamma t/2) transient; keeping terms through O(1/gamma) leaves three
    slow exponentials whose weakest rate sets the charging time.
    """
    _require_resonance(p)
    r2 = (p.F / p.g) ** 2
    root = math.sqrt(1.0 + 4.0 * r2)
    t = np.asarray(t, dtype=float)
    gam, g = p.gamma_C, p.g

    def branch(f):
        slow = np.exp(-4.0 * f * g * g * t / gam)
        fast = np.exp((-gam / 2.0 + 4.0 * f * g * g / gam) * t)
        c = 1.0 + 16.0 * f * g * g / gam ** 2
        return 0.5 * ((slow + fast) + c * (slow - fast))

    f0, f1, f2 = branch_constants(p)
    bracket = (8.0 * r2 * branch(f0) + (1.0 + root) * branch(f1)
               + (1.0 - root) * branch(f2))
    out = p.omega_B * (0.5 - bracket / (4.0 * (1.0 + 4.0 * r2)))
    return out if np.ndim(out) else float(out)


def tls_sigma_minus_closed(p: Params, t) -> np.ndarray | complex:
    """Battery coherence <sm_B>(t) for the resonant two-TLS model.

    Real-valued in the rotating frame; returned as complex for a uniform
    interface. Relaxes at rate gamma/4 towards -(F/g)/(1 + 4 F^2/g^2) with
    oscillation scale sqrt(16 (g^2 + 4 F^2) - gamma^2)/4.
    """
    _require_resonance(p)
    r = p.F / p.g
    const = r / (1.0 + 4.0 * r * r)
    osc = _damped_kernel(p.gamma_C,
                         p.gamma_C ** 2 - 16.0 * (p.g ** 2 + 4.0 * p.F ** 2), t)
    out = np.asarray(-const + const * osc, dtype=complex)
    return out if out.ndim else complex(out)


def tls_ergotropy_closed(p: Params, t) -> np.ndarray | float:
    """Battery ergotropy from the closed-form moments.

    Uses the two-level identity erg = (omega/2)(sqrt(<sz>^2 + 4|<sm>|^2) + <sz>)
    on the exact <sz_B> and <sm_B>; equivalent to the minimization over
    battery unitaries.
    """
    sz = np.asarray(tls_sigma_z_closed(p, t), dtype=float)
    sm = np.abs(np.asarray(tls_sigma_minus_closed(p, t)))
    out = 0.5 * p.omega_B * (np.sqrt(sz * sz + 4.0 * sm * sm) + sz)
    return out if out.ndim else float(out)


def tls_steady(p: Params) -> Tuple[float, float]:
    """(steady energy, steady ergotropy) of the two-TLS battery.

    Valid at resonance and for charger-battery detuning with resonant drive
    (delta_Bd = 0), where the long-time limits coincide.
    """
    r = p.F / p.g
    return 0.5 * p.omega_B, (r / (1.0 + 4.0 * r * r)) * p.omega_B


def ho_energy_closed_resonant(p: Params, t) -> np.ndarray | float:
    """Battery energy E_B(t) for the resonant two-HO model.

    (F/g)^2 enters only as an overall scale; the damping structure is set by
    G^2 = gamma^2 - 16 g^2 and G^2 - 48 g^2.
    """
    _require_resonance(p)
    r2 = (p.F / p.g) ** 2
    gam, g = p.gamma_C, p.g
    k1 = _damped_kernel(gam, gam * gam - 16.0 * g * g, t)
    k2 = _damped_kernel(gam, gam * gam - 64.0 * g * g, t)
    out = p.omega_B * r2 * (1.5 - 0.5 * (4.0 * k1 - k2))
    return out if np.ndim(out) else float(out)


def ho_steady(p: Params) -> Tuple[float, float]:
    """(steady energy, steady ergotropy) of the two-HO battery.

    The energy (3/2)(F/g)^2 is exact; the ergotropy value (F/g)^2 is the
    numerically established fit, good to a few percent.
    """
    r2 = (p.F / p.g) ** 2
    return 1.5 * r2 * p.omega_B, r2 * p.omega_B


def ho_closed_detuned(p: Params, t, case: DetunedCase) -> np.ndarray | float:
    """Closed-case (gamma_C = 0) battery energy of the detuned two-HO model.

    DETUNED_DRIVE: drive detuned from both oscillators (delta_Cd = delta_Bd);
    diverges as |delta_Cd| -> g (normal-mode resonance), so that pole raises
    OnResonancePole. DETUNED_CHARGER_BATTERY: charger detuned from battery
    with resonant drive (delta_Bd = 0); finite for all detunings.
    """
    if p.gamma_C != 0.0:
        raise ValueError("closed-case expression requires gamma_C = 0")
    t = np.asarray(t, dtype=float)
    g, F = p.g, p.F
    if case is DetunedCase.DETUNED_DRIVE:
        if abs(p.delta_Cd - p.delta_Bd) > 1e-12:
            raise ValueError("detuned-drive case requires delta_Cd = delta_Bd")
        d = p.delta_Cd
        if abs(abs(d) - g) < 1e-9:
            raise OnResonancePole(f"|delta_Cd| = {abs(d)} is at the pole g = {g}")
        pre = F * F / (2.0 * (d * d - g * g) ** 2)
        out = pre * (3.0 * g * g + g * g * np.cos(2.0 * g * t)
                     - 4.0 * g * g * np.cos(g * t) * np.cos(d * t)
                     + 2.0 * np.sin(g * t) * d * (d * np.sin(g * t)
                                                  - 2.0 * g * np.sin(d * t)))
        out = p.omega_B * out
        return out if out.ndim else float(out)
    if case is DetunedCase.DETUNED_CHARGER_BATTERY:
        if abs(p.delta_Bd) > 1e-12:
            raise ValueError("charger-battery case requires delta_Bd = 0")
        d = p.delta_CB
        s = math.sqrt(d * d + 4.0 * g * g)
        alpha = math.sqrt(g * g + 0.5 * d * d + 0.5 * d * s)
        r2 = (F / g) ** 2
        out = r2 * (2.0 - 2.0 * g * g / s ** 2
                    + 2.0 * g * g * np.cos(s * t) / s ** 2
                    - (np.cos(g * t / alpha) + np.cos(alpha * t))
                    - d / s * (np.cos(g * t / alpha) - np.cos(alpha * t)))
        out = p.omega_B * out
        return out if out.ndim else float(out)
    raise ValueError(f"unknown case {case}")


def ho_peak_energy_detuned_drive(p: Params) -> float:
    """Transient maximum of the closed detuned-drive energy, at t = (2k+1) pi/g.

    Valid for |delta_Cd| < g.
    """
    d = p.delta_Cd
    if abs(abs(d) - p.g) < 1e-9:
        raise OnResonancePole(f"|delta_Cd| = {abs(d)} is at the pole g = {p.g}")
    return (4.0 * p.F ** 2 * p.g ** 2 / (d * d - p.g ** 2) ** 2
            * math.cos(math.pi * d / (2.0 * p.g)) ** 2 * p.omega_B)


def ho_longtime_slope(p: Params) -> float:
    """Late-time linear growth rate of E_B for the dephased detuned-drive HO.

    dE_B/dt -> 2 F^2 gamma d^2 / (4 g^4 - 8 g^2 d^2 + gamma^2 d^2 + 4 d^4),
    with d = delta_Cd = delta_Bd.
    """
    if abs(p.delta_Cd - p.delta_Bd) > 1e-12:
        raise ValueError("long-time slope applies to delta_Cd = delta_Bd")
    d, g, gam = p.delta_Cd, p.g, p.gamma_C
    denom = 4.0 * g ** 4 - 8.0 * g * g * d * d + gam * gam * d * d + 4.0 * d ** 4
    return 2.0 * p.F ** 2 * gam * d * d / denom * p.omega_B


# thresholds bounding where each asymptotic charging-time formula applies
_WEAK_DRIVE_MAX = 0.2
_STRONG_DRIVE_MIN = 5.0
_SMALL_GAMMA_MAX = 0.2   # gamma_C / g
_LARGE_GAMMA_MIN = 5.0


def charging_time_asymptotic(p: Params, n: int, regime: Regime) -> float:
    """Asymptotic charging time for threshold exponent ``n``.

    small gamma:               tau ~ 4 n / gamma
    large gamma, weak drive:   tau ~ n g^2 gamma / F^4
    large gamma, strong drive: tau ~ n gamma / (2 g^2)
    HO small / large gamma:    tau ~ 4 n / gamma  and  n gamma / (2 g^2)

    Emits a RegimeMismatch warning when the parameters sit outside the
    regime the formula was derived for.
    """
    gam, g, F = p.gamma_C, p.g, p.F

    def warn(msg):
        warnings.warn(msg, RegimeMismatch, stacklevel=2)

    if regime in (Regime.SMALL_GAMMA, Regime.HO_SMALL_GAMMA):
        if gam > _SMALL_GAMMA_MAX * g:
            warn(f"gamma_C = {gam} is not << g = {g}")
        return 4.0 * n / gam
    if gam < _LARGE_GAMMA_MIN * g:
        warn(f"gamma_C = {gam} is not >> g = {g}")
    if regime is Regime.LARGE_GAMMA_WEAK_DRIVE:
        if p.drive_ratio > _WEAK_DRIVE_MAX:
            warn(f"F/g = {p.drive_ratio} is not weak drive")
        return n * g * g * gam / F ** 4
    if regime is Regime.LARGE_GAMMA_STRONG_DRIVE:
        if p.drive_ratio < _STRONG_DRIVE_MIN:
            warn(f"F/g = {p.drive_ratio} is not strong drive")
        return n * gam / (2.0 * g * g)
    if regime is Regime.HO_LARGE_GAMMA:
        return n * gam / (2.0 * g * g)
    raise ValueError(f"unknown regime {regime}")


def optimal_dephasing(p: Params, kind: str = "two_tls") -> float:
    """Dephasing rate minimizing the charging time.

    Two-TLS: 8 F^2/g for weak drive, 4 g for strong drive; in between, the
    underdamped-to-overdamped criticality gamma^2 = 32 f g^2 of whichever
    oscillation branch has the dominant amplitude. Two-HO: 4 g always.
    """
    if kind in ("two_ho", "ho"):
        return 4.0 * p.g
    r = p.drive_ratio
    if r <= _WEAK_DRIVE_MAX:
        return 8.0 * p.F ** 2 / p.g
    if r >= _STRONG_DRIVE_MIN:
        return 4.0 * p.g
    f0, f1, _ = branch_constants(p)
    amp_f0 = 8.0 * r * r
    amp_f1 = 1.0 + math.sqrt(1.0 + 4.0 * r * r)
    f_dom = f1 if amp_f1 >= amp_f0 else f0
    return math.sqrt(32.0 * f_dom) * p.g

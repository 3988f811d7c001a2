"""Battery figures of merit: energy, ergotropy, entropy, charging time.

Ergotropy is the work extractable by unitaries: the battery state is rotated
into the passive state, which pairs populations sorted descending with
energy levels sorted ascending. For a two-level battery this reduces to

    erg = (omega/2) (sqrt(<sz>^2 + 4 |<sm>|^2) + <sz>),

and entropy and ergotropy are tied through the binary entropy of
(E - erg)/omega.

The charging time tau is defined against a threshold exp(-n) of the initial
distance to the steady energy: tau is the LAST time the running energy
crosses the threshold band, so |E(t) - E_ss| < e^{-n} |E(0) - E_ss| for all
later sampled times. An oscillatory undamped signal never settles and raises
NotConverged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import opalg
from .errors import DimMismatch, NotConverged
from .models import Params

_EIG_FLOOR = 1e-14  # spectral weights below this contribute no entropy


@dataclass(frozen=True)
class ChargingReport:
    """Outcome of a charging-time measurement."""

    tau: float
    n: int
    e_ss: float
    e_max_transient: float
    gamma_C: float
    converged: bool


def energy(rho_b: np.ndarray, h_b: np.ndarray) -> float:
    """Mean battery energy Tr[rho H]."""
    val = opalg.expect(h_b, rho_b)
    return float(val.real)


def ergotropy(rho_b: np.ndarray, h_b: np.ndarray) -> float:
    """Maximal unitarily extractable work, via the passive state."""
    rho_b = np.asarray(rho_b, dtype=complex)
    h_b = np.asarray(h_b, dtype=complex)
    if rho_b.shape != h_b.shape:
        raise DimMismatch("state and Hamiltonian dimensions differ")
    e_now = energy(rho_b, h_b)
    pops = np.linalg.eigvalsh(rho_b)[::-1]          # descending
    levels = opalg.herm_eig(h_b).eigenvalues        # ascending
    e_passive = float(np.real(pops @ levels))
    return max(e_now - e_passive, 0.0)


def passive_state(rho_b: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    """The zero-ergotropy state reached by the optimal extraction unitary."""
    pops = np.linalg.eigvalsh(rho_b)[::-1]
    levels, vecs = opalg.herm_eig(np.asarray(h_b, dtype=complex))
    return (vecs * pops) @ vecs.conj().T


def tls_ergotropy_formula(sz: float, sm_abs: float, omega_b: float = 1.0) -> float:
    """Two-level ergotropy from the Bloch components."""
    return 0.5 * omega_b * (math.sqrt(sz * sz + 4.0 * sm_abs * sm_abs) + sz)


def entropy(rho_b: np.ndarray) -> float:
    """Von Neumann entropy, natural log."""
    w = np.linalg.eigvalsh(np.asarray(rho_b, dtype=complex))
    w = w[w > _EIG_FLOOR]
    return float(-np.sum(w * np.log(w)))


def entropy_from_energy_gap(e: float, erg: float, omega_b: float = 1.0) -> float:
    """Two-level entropy as the binary entropy of x = (E - erg)/omega."""
    x = (e - erg) / omega_b
    x = min(max(x, 0.0), 1.0)
    out = 0.0
    if x > _EIG_FLOOR:
        out -= x * math.log(x)
    if 1.0 - x > _EIG_FLOOR:
        out -= (1.0 - x) * math.log(1.0 - x)
    return out


def default_horizon(p: Params, n: int) -> float:
    """Root-search horizon: 20x the worst asymptotic charging-time estimate.

    The weak-drive large-gamma scale g^2 gamma / F^4 only applies below
    F/g = 1 and is dropped above it.
    """
    if p.gamma_C <= 0:
        raise ValueError("horizon needs gamma_C > 0 (undamped case never settles)")
    cands = [4.0 * n / p.gamma_C, n * p.gamma_C / (2.0 * p.g ** 2)]
    if p.drive_ratio < 1.0 and p.F > 0:
        cands.append(n * p.g ** 2 * p.gamma_C / p.F ** 4)
    return 20.0 * max(cands)


def charging_time(times, energies, e_ss: float, n: int = 1,
                  gamma_c: float = float("nan"),
                  energy_fn: Optional[Callable[[float], float]] = None,
                  rel_tol: float = 1e-6) -> ChargingReport:
    """Last-root charging time of a sampled energy trajectory.

    ``energy_fn`` (optional) evaluates E(t) between samples during the
    bisection refinement; otherwise the refinement runs on the linear
    interpolant of the bracketing samples. Raises NotConverged when the
    threshold is still exceeded at the final sample.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if times.shape != energies.shape or times.ndim != 1 or len(times) < 2:
        raise ValueError("times and energies must be matching 1-d arrays")
    if not math.isfinite(e_ss):
        raise ValueError("e_ss must be finite")
    gap0 = abs(energies[0] - e_ss)
    if gap0 == 0.0:
        raise ValueError("E(0) equals e_ss; charging time undefined")
    thr = math.exp(-n) * gap0
    resid = np.abs(energies - e_ss) - thr
    e_max = float(np.max(energies))

    if resid[-1] >= 0.0:
        report = ChargingReport(tau=math.nan, n=n, e_ss=e_ss,
                                e_max_transient=e_max, gamma_C=gamma_c,
                                converged=False)
        raise NotConverged(
            f"|E - e_ss| still >= threshold at horizon t={times[-1]:g}",
            report=report)

    above = np.nonzero(resid >= 0.0)[0]
    if len(above) == 0:
        # inside the band from the first sample on; settle on the first interval
        k = 0
    else:
        k = int(above[-1])

    t_lo, t_hi = times[k], times[k + 1]
    if energy_fn is None:
        e_lo, e_hi = energies[k], energies[k + 1]

        def f(t):
            w = (t - t_lo) / (t_hi - t_lo)
            return abs((1.0 - w) * e_lo + w * e_hi - e_ss) - thr
    else:
        def f(t):
            return abs(energy_fn(t) - e_ss) - thr

    lo, hi = t_lo, t_hi
    f_lo = f(lo)
    # bisect |E(t) - e_ss| - thr between the bracketing samples
    for _ in range(200):
        if hi - lo <= rel_tol * max(abs(hi), 1.0):
            break
        mid = 0.5 * (lo + hi)
        if (f(mid) >= 0.0) == (f_lo >= 0.0):
            lo = mid
            f_lo = f(lo)
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    return ChargingReport(tau=float(tau), n=n, e_ss=e_ss,
                          e_max_transient=e_max, gamma_C=gamma_c,
                          converged=True)


def charging_time_from_series(series, e_ss: float, n: int = 1,
                              gamma_c: float = float("nan"),
                              energy_key: str = "energy",
                              energy_fn=None) -> ChargingReport:
    """Convenience wrapper reading the energy record of a TimeSeries."""
    return charging_time(series.times, series.observables[energy_key], e_ss,
                         n=n, gamma_c=gamma_c, energy_fn=energy_fn)

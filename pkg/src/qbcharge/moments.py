"""Closed linear moment systems dV/dt = M V + W for the TLS and HO models.

The master equation closes on small sets of operator expectation values:

* two TLS: a 10-component block (inversions and charger-excitation-like
  coherences) and an independent 5-component block (battery coherence and
  its partners), both homogeneous;
* two HO at resonance: five moments in the frame displaced by F/g, where the
  drive enters only through the initial conditions;
* two HO with detuning: eight real moments driven by a constant
  inhomogeneity W = (0, ..., 0, -F).

Complex moments are split into real and imaginary parts, preserving the
component ordering of the defining equations so that matrix entries and the
determinant identities stay auditable. Propagation is by matrix exponential
(scaling-and-squaring Pade, via scipy), which is exact for linear systems;
inhomogeneous systems use the augmented-matrix form exp([[M, W], [0, 0]] t)
so a singular M needs no special casing. The explicit particular-solution
formula V(t) = e^{Mt} V0 + M^{-1}(e^{Mt} - I) W is kept as a cross-check
path for invertible M.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import RequiresResonance, SingularMatrix
from .models import Params
from .series import TimeSeries

V1_LABELS = ("sz_B", "sz_C", "re_spC_smB", "im_spC_smB", "re_szC_smB",
             "im_szC_smB", "re_smC_smB", "im_smC_smB", "re_smC", "im_smC")
V2_LABELS = ("re_smB", "im_smB", "re_smC_szB", "im_smC_szB", "szC_szB")
HO_RES_LABELS = ("re_aC", "im_aC", "re_aB", "im_aB", "n_C",
                 "re_adC_aB", "im_adC_aB", "n_B")
HO_DET_LABELS = ("n_B", "n_C", "im_adC_aB", "re_adC_aB",
                 "re_aB", "im_aB", "re_aC", "im_aC")


@dataclass(frozen=True, eq=False)
class MomentSystem:
    """Linear ODE system dV/dt = M V + W with initial vector v0."""

    matrix: np.ndarray
    inhomogeneity: np.ndarray
    v0: np.ndarray
    labels: Tuple[str, ...]

    def __post_init__(self):
        n = self.matrix.shape[0]
        if not (self.matrix.shape == (n, n) and len(self.v0) == n
                and len(self.inhomogeneity) == n and len(self.labels) == n):
            raise ValueError("inconsistent moment-system dimensions")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def homogeneous(self) -> bool:
        return not np.any(self.inhomogeneity)


def tls_moment_systems(p: Params) -> Tuple[MomentSystem, MomentSystem]:
    """The two independent moment blocks of the two-TLS model.

    Block 1 (10-dim) carries <sz_B>, <sz_C> and the coherences
    <sp_C sm_B>, <sz_C sm_B>, <sm_C sm_B>, <sm_C>; block 2 (5-dim) carries
    <sm_B>, <sm_C sz_B>, <sz_C sz_B>. Ground-state start fixes
    V1(0) = (-1, -1, 0, ..., 0) and V2(0) = (0, 0, 0, 0, 1).
    """
    g, F, gam = p.g, p.F, p.gamma_C
    d_cd, d_bd = p.delta_Cd, p.delta_Bd
    d_cb, d_sum = d_cd - d_bd, d_cd + d_bd

    m1 = np.zeros((10, 10))
    m1[0, 3] = -4 * g
    m1[1, 3] = 4 * g
    m1[1, 9] = -4 * F
    m1[2, 2] = -gam / 2
    m1[2, 3] = -d_cb
    m1[2, 5] = F
    m1[3, 0] = g / 2
    m1[3, 1] = -g / 2
    m1[3, 2] = d_cb
    m1[3, 3] = -gam / 2
    m1[3, 4] = -F
    m1[4, 3] = 2 * F
    m1[4, 5] = d_bd
    m1[4, 7] = -2 * F
    m1[4, 9] = -g
    m1[5, 2] = -2 * F
    m1[5, 4] = -d_bd
    m1[5, 6] = 2 * F
    m1[5, 8] = g
    m1[6, 5] = -F
    m1[6, 6] = -gam / 2
    m1[6, 7] = d_sum
    m1[7, 4] = F
    m1[7, 6] = -d_sum
    m1[7, 7] = -gam / 2
    m1[8, 5] = -g
    m1[8, 8] = -gam / 2
    m1[8, 9] = d_cd
    m1[9, 1] = F
    m1[9, 4] = g
    m1[9, 8] = -d_cd
    m1[9, 9] = -gam / 2

    m2 = np.zeros((5, 5))
    m2[0, 1] = d_bd
    m2[0, 3] = -g
    m2[1, 0] = -d_bd
    m2[1, 2] = g
    m2[2, 1] = -g
    m2[2, 2] = -gam / 2
    m2[2, 3] = d_cd
    m2[3, 0] = g
    m2[3, 2] = -d_cd
    m2[3, 3] = -gam / 2
    m2[3, 4] = F
    m2[4, 3] = -4 * F

    v1_0 = np.zeros(10)
    v1_0[0] = v1_0[1] = -1.0
    v2_0 = np.zeros(5)
    v2_0[4] = 1.0
    sys1 = MomentSystem(m1, np.zeros(10), v1_0, V1_LABELS)
    sys2 = MomentSystem(m2, np.zeros(5), v2_0, V2_LABELS)
    return sys1, sys2


def ho_resonant_moment_system(p: Params) -> MomentSystem:
    """Two-HO moments at resonance, in the battery frame displaced by F/g.

    The displacement removes the drive from the generator; it survives only
    in the initial conditions <a_B>(0) = F/g, <n_B>(0) = (F/g)^2. The lab
    energy is recovered as n_B - (F/g) (a_B + a_B^dag) + (F/g)^2.
    """
    if not p.resonant():
        raise RequiresResonance("displaced-frame system requires zero detunings")
    g, gam = p.g, p.gamma_C
    m = np.zeros((8, 8))
    m[0, 0] = -gam / 2
    m[0, 3] = g
    m[1, 1] = -gam / 2
    m[1, 2] = -g
    m[2, 1] = g
    m[3, 0] = -g
    m[4, 6] = 2 * g
    m[5, 5] = -gam / 2
    m[6, 4] = -g
    m[6, 6] = -gam / 2
    m[6, 7] = g
    m[7, 6] = -2 * g
    v0 = np.zeros(8)
    r = p.F / p.g
    v0[2] = r
    v0[7] = r * r
    return MomentSystem(m, np.zeros(8), v0, HO_RES_LABELS)


def ho_detuned_moment_system(p: Params) -> MomentSystem:
    """Two-HO moments in the drive-rotating frame, valid for any detuning.

    Inhomogeneous: the drive acts as the constant vector W = (0,...,0,-F) on
    Im<a_C>. Vacuum start gives V(0) = 0. At resonance the energy agrees with
    the displaced-frame system (different frames, same observable).
    """
    g, F, gam = p.g, p.F, p.gamma_C
    d_cd, d_bd = p.delta_Cd, p.delta_Bd
    d_cb = d_cd - d_bd
    m = np.zeros((8, 8))
    m[0, 2] = -2 * g
    m[1, 2] = 2 * g
    m[1, 7] = -2 * F
    m[2, 0] = g
    m[2, 1] = -g
    m[2, 2] = -gam / 2
    m[2, 3] = d_cb
    m[2, 4] = F
    m[3, 2] = -d_cb
    m[3, 3] = -gam / 2
    m[3, 5] = -F
    m[4, 5] = d_bd
    m[4, 7] = g
    m[5, 4] = -d_bd
    m[5, 6] = -g
    m[6, 5] = g
    m[6, 6] = -gam / 2
    m[6, 7] = d_cd
    m[7, 4] = -g
    m[7, 6] = -d_cd
    m[7, 7] = -gam / 2
    w = np.zeros(8)
    w[7] = -F
    return MomentSystem(m, w, np.zeros(8), HO_DET_LABELS)


def _propagate_expm(sys: MomentSystem, t_grid: np.ndarray) -> np.ndarray:
    """Exact propagation by matrix exponentials over consecutive grid steps."""
    n = sys.dim
    if sys.homogeneous:
        a = sys.matrix
        state = sys.v0.copy()
    else:
        # augmented generator: d/dt (V, 1) = [[M, W], [0, 0]] (V, 1)
        a = np.zeros((n + 1, n + 1))
        a[:n, :n] = sys.matrix
        a[:n, n] = sys.inhomogeneity
        state = np.concatenate([sys.v0, [1.0]])
    out = np.empty((len(t_grid), n))
    cache: Dict[float, np.ndarray] = {}
    t_prev = 0.0
    for k, t in enumerate(t_grid):
        dt = t - t_prev
        if dt != 0.0:
            prop = cache.get(dt)
            if prop is None:
                prop = expm(a * dt)
                cache[dt] = prop
            state = prop @ state
        out[k] = state[:n]
        t_prev = t
    return out


def _propagate_inverse(sys: MomentSystem, t_grid: np.ndarray) -> np.ndarray:
    """Particular-solution path V(t) = e^{Mt} V0 + M^{-1}(e^{Mt} - I) W.

    Raises SingularMatrix when M has no inverse (then only the augmented
    path applies).
    """
    m = sys.matrix
    n = sys.dim
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrix(f"moment matrix condition number {cond:.2e}")
    m_inv_w = np.linalg.solve(m, sys.inhomogeneity)
    out = np.empty((len(t_grid), n))
    for k, t in enumerate(t_grid):
        e = expm(m * t)
        out[k] = e @ sys.v0 + (e @ m_inv_w - m_inv_w)
    return out


def evolve_moments(sys: MomentSystem, t_grid, method: str = "expm") -> TimeSeries:
    """Solve the moment system on ``t_grid`` (ascending, may start anywhere >= 0).

    method "expm" uses the (augmented) matrix exponential and works for any
    M; "inverse" uses the explicit particular solution and raises
    SingularMatrix when M is not invertible. Both agree to ~1e-9 where both
    apply.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be strictly increasing and non-negative")
    if method == "expm":
        values = _propagate_expm(sys, t_grid)
    elif method == "inverse":
        if sys.homogeneous:
            values = _propagate_expm(sys, t_grid)
        else:
            values = _propagate_inverse(sys, t_grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    observables = {lbl: values[:, i] for i, lbl in enumerate(sys.labels)}
    return TimeSeries(times=t_grid, observables=observables,
                      meta={"solver": f"moments/{method}"})


# --- observable reconstruction -------------------------------------------

def tls_energy_from_moments(series: TimeSeries, p: Params) -> np.ndarray:
    return 0.5 * p.omega_B * (series.observables["sz_B"] + 1.0)


def tls_sigma_minus_from_moments(series: TimeSeries) -> np.ndarray:
    return series.observables["re_smB"] + 1j * series.observables["im_smB"]


def tls_observables(p: Params, t_grid) -> TimeSeries:
    """Energy, ergotropy and moment records for the two-TLS model."""
    sys1, sys2 = tls_moment_systems(p)
    s1 = evolve_moments(sys1, t_grid)
    s2 = evolve_moments(sys2, t_grid)
    sz = s1.observables["sz_B"]
    sm_abs = np.abs(tls_sigma_minus_from_moments(s2))
    energy = 0.5 * p.omega_B * (sz + 1.0)
    ergotropy = 0.5 * p.omega_B * (np.sqrt(sz ** 2 + 4.0 * sm_abs ** 2) + sz)
    obs = {"energy": energy, "ergotropy": ergotropy, "sz_B": sz,
           "abs_sm_B": sm_abs}
    obs.update({k: v for k, v in s1.observables.items() if k != "sz_B"})
    obs.update(s2.observables)
    return TimeSeries(times=np.asarray(t_grid, dtype=float), observables=obs,
                      meta={"solver": "moments"})


def ho_resonant_energy(p: Params, t_grid) -> TimeSeries:
    """Two-HO battery energy at resonance via the displaced-frame system."""
    series = evolve_moments(ho_resonant_moment_system(p), t_grid)
    r = p.F / p.g
    energy = p.omega_B * (series.observables["n_B"]
                          - 2.0 * r * series.observables["re_aB"] + r * r)
    series.observables["energy"] = energy
    return series


def ho_detuned_energy(p: Params, t_grid, method: str = "expm") -> TimeSeries:
    """Two-HO battery energy for arbitrary detunings (lab-frame moments)."""
    series = evolve_moments(ho_detuned_moment_system(p), t_grid, method=method)
    series.observables["energy"] = p.omega_B * series.observables["n_B"]
    return series

"""Rotating-frame model builders for the four charger/battery setups.

Every model is expressed in the frame co-rotating with the drive, where the
Hamiltonian is time independent:

    two TLS:   Hbar = D_Cd sp_C sm_C + D_Bd sp_B sm_B
                      + g (sp_C sm_B + sm_C sp_B) + F (sp_C + sm_C)
    two HO:    Hbar = D_Cd n_C + D_Bd n_B + g (ac^dag ab + ab^dag ac)
                      + F (ac + ac^dag)
    TLS-HO:    TLS charger, oscillator battery, same structure
    star TLS:  one driven charger TLS coupled with equal strength g to N
               identical battery TLSs

with D_Cd = omega_C - omega_d and D_Bd = omega_B - omega_d. The dephasing jump
operator is the charger excitation number (sp_C sm_C or n_C), which commutes
with the bare charger term, so energies and |<sm_B>| computed here coincide
with their lab-frame values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

from . import opalg
from .errors import CutoffTooSmall, TooManyBatteries

MAX_STAR_BATTERIES = 6  # dim 2^(N+1) <= 128

# runtime Fock-truncation validity bound: population of the top two levels
TRUNCATION_TOL = 1e-8


class ModelKind(Enum):
    TWO_TLS = "two_tls"
    TWO_HO = "two_ho"
    TLS_HO = "tls_ho"
    STAR_TLS = "star_tls"


@dataclass(frozen=True)
class Params:
    """Physical rates, all in units of the battery frequency omega_B."""

    g: float = 1.0          # charger-battery coupling
    F: float = 0.0          # drive amplitude
    gamma_C: float = 0.0    # charger dephasing rate
    delta_Cd: float = 0.0   # omega_C - omega_d
    delta_Bd: float = 0.0   # omega_B - omega_d
    omega_B: float = 1.0    # unit of frequency; fixed to 1 in practice

    def __post_init__(self):
        if self.g < 0 or self.F < 0 or self.gamma_C < 0:
            raise ValueError("g, F and gamma_C must be non-negative")

    @property
    def delta_CB(self) -> float:
        """omega_C - omega_B."""
        return self.delta_Cd - self.delta_Bd

    @property
    def drive_ratio(self) -> float:
        return self.F / self.g if self.g > 0 else math.inf

    def resonant(self, tol: float = 1e-12) -> bool:
        return abs(self.delta_Cd) <= tol and abs(self.delta_Bd) <= tol


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A concrete build of one setup: operators plus bookkeeping.

    All matrices act on the full composite space except ``battery_h``, which
    lives on the battery factor alone. Instances are immutable and safe to
    share across threads.
    """

    kind: ModelKind
    params: Params
    dims: Tuple[int, ...]            # (charger_dim, battery_dims...)
    hamiltonian: np.ndarray          # rotating-frame Hbar
    jump: np.ndarray                 # hermitian dephasing operator L_C (x) I_B
    charger_h: np.ndarray            # bare charger term of Hbar, full space
    battery_h: np.ndarray            # battery Hamiltonian on the battery factor
    ground_ket: np.ndarray           # joint free ground state
    n_batteries: int = 1
    cutoff: int = field(default=0)   # Fock truncation (0 for TLS-only models)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def charger_dim(self) -> int:
        return self.dims[0]

    @property
    def battery_dim(self) -> int:
        return int(np.prod(self.dims[1:]))

    @property
    def ground_dm(self) -> np.ndarray:
        return opalg.dm(self.ground_ket)

    def reduced_battery(self, rho: np.ndarray) -> np.ndarray:
        """Trace out the charger."""
        return opalg.partial_trace(rho, (self.charger_dim, self.battery_dim), 1)

    def reduced_charger(self, rho: np.ndarray) -> np.ndarray:
        return opalg.partial_trace(rho, (self.charger_dim, self.battery_dim), 0)


def default_fock_cutoff(p: Params) -> int:
    """Truncation heuristic: steady occupations grow like (F/g)^2.

    Smallest N_c >= 2 + ceil(8 (F/g)^2 + 6 F/g); callers still validate the
    top-level populations at runtime (TRUNCATION_TOL).
    """
    if p.g <= 0:
        raise ValueError("cutoff heuristic needs g > 0")
    r = p.F / p.g
    return 2 + math.ceil(8.0 * r * r + 6.0 * r)


def top_fock_population(rho: np.ndarray, model: ModelSpec) -> float:
    """Total population of the top two Fock levels of every oscillator factor."""
    pops = np.real(np.diag(rho))
    total = 0.0
    dims = model.dims
    for k, d in enumerate(dims):
        if d <= 2:  # TLS factor: no truncation involved
            continue
        grid = pops.reshape(dims)
        axes = tuple(i for i in range(len(dims)) if i != k)
        marg = grid.sum(axis=axes) if axes else grid
        total += float(marg[d - 1] + marg[d - 2])
    return total


def check_truncation(rho: np.ndarray, model: ModelSpec, tol: float = TRUNCATION_TOL):
    top = top_fock_population(rho, model)
    if top > tol:
        raise CutoffTooSmall(
            f"top two Fock levels hold population {top:.2e} > {tol:.0e}; "
            f"increase the cutoff (currently {model.cutoff})"
        )


def _two_site_ops(op_c: np.ndarray, dim_b: int):
    return opalg.kron(op_c, opalg.identity(dim_b))


def build_two_tls(p: Params) -> ModelSpec:
    """Driven TLS charger coupled to a TLS battery."""
    sp, sm = opalg.sigma_plus(), opalg.sigma_minus()
    i2 = opalg.identity(2)
    sp_c, sm_c = opalg.kron(sp, i2), opalg.kron(sm, i2)
    sp_b, sm_b = opalg.kron(i2, sp), opalg.kron(i2, sm)
    charger_h = p.delta_Cd * (sp_c @ sm_c)
    h = (charger_h + p.delta_Bd * (sp_b @ sm_b)
         + p.g * (sp_c @ sm_b + sm_c @ sp_b) + p.F * (sp_c + sm_c))
    jump = sp_c @ sm_c
    ground_ket = np.kron(opalg.basis_ket(2, 1), opalg.basis_ket(2, 1))
    return ModelSpec(
        kind=ModelKind.TWO_TLS, params=p, dims=(2, 2), hamiltonian=h,
        jump=jump, charger_h=charger_h, battery_h=p.omega_B * (sp @ sm),
        ground_ket=ground_ket,
    )


def build_two_ho(p: Params, cutoff: int | None = None) -> ModelSpec:
    """Driven oscillator charger coupled to an oscillator battery."""
    if cutoff is None:
        cutoff = default_fock_cutoff(p)
    if cutoff < 2:
        raise CutoffTooSmall(f"cutoff must be >= 2, got {cutoff}")
    a = opalg.destroy(cutoff)
    n_op = opalg.number(cutoff)
    i_n = opalg.identity(cutoff)
    a_c, a_b = opalg.kron(a, i_n), opalg.kron(i_n, a)
    n_c = opalg.kron(n_op, i_n)
    charger_h = p.delta_Cd * n_c
    h = (charger_h + p.delta_Bd * opalg.kron(i_n, n_op)
         + p.g * (opalg.dag(a_c) @ a_b + opalg.dag(a_b) @ a_c)
         + p.F * (a_c + opalg.dag(a_c)))
    ground_ket = np.kron(opalg.basis_ket(cutoff, 0), opalg.basis_ket(cutoff, 0))
    return ModelSpec(
        kind=ModelKind.TWO_HO, params=p, dims=(cutoff, cutoff), hamiltonian=h,
        jump=n_c, charger_h=charger_h, battery_h=p.omega_B * n_op,
        ground_ket=ground_ket, cutoff=cutoff,
    )


def build_tls_ho(p: Params, cutoff: int | None = None) -> ModelSpec:
    """Driven TLS charger coupled to an oscillator battery (driven JC model)."""
    if cutoff is None:
        cutoff = default_fock_cutoff(p)
    if cutoff < 2:
        raise CutoffTooSmall(f"cutoff must be >= 2, got {cutoff}")
    sp, sm = opalg.sigma_plus(), opalg.sigma_minus()
    i2, i_n = opalg.identity(2), opalg.identity(cutoff)
    a = opalg.destroy(cutoff)
    sp_c, sm_c = opalg.kron(sp, i_n), opalg.kron(sm, i_n)
    a_b = opalg.kron(i2, a)
    charger_h = p.delta_Cd * (sp_c @ sm_c)
    h = (charger_h + p.delta_Bd * opalg.kron(i2, opalg.number(cutoff))
         + p.g * (sp_c @ a_b + opalg.dag(a_b) @ sm_c)
         + p.F * (sp_c + sm_c))
    jump = sp_c @ sm_c
    ground_ket = np.kron(opalg.basis_ket(2, 1), opalg.basis_ket(cutoff, 0))
    return ModelSpec(
        kind=ModelKind.TLS_HO, params=p, dims=(2, cutoff), hamiltonian=h,
        jump=jump, charger_h=charger_h,
        battery_h=p.omega_B * opalg.number(cutoff),
        ground_ket=ground_ket, cutoff=cutoff,
    )


def build_star_tls(p: Params, n_batteries: int) -> ModelSpec:
    """One driven TLS charger collectively coupled to N identical TLS batteries."""
    if not 1 <= n_batteries <= MAX_STAR_BATTERIES:
        raise TooManyBatteries(
            f"n_batteries must be in [1, {MAX_STAR_BATTERIES}], got {n_batteries}"
        )
    n_sites = n_batteries + 1
    sp, sm = opalg.sigma_plus(), opalg.sigma_minus()
    i2 = opalg.identity(2)

    def site_op(op, k):
        return opalg.kron_all([op if j == k else i2 for j in range(n_sites)])

    sp_c = site_op(sp, 0)
    sm_c = opalg.dag(sp_c)
    sm_sum = sum(site_op(sm, 1 + j) for j in range(n_batteries))
    num_b = sum(site_op(sp, 1 + j) @ site_op(sm, 1 + j) for j in range(n_batteries))
    charger_h = p.delta_Cd * (sp_c @ sm_c)
    h = (charger_h + p.delta_Bd * num_b
         + p.g * (sp_c @ sm_sum + opalg.dag(sm_sum) @ sm_c)
         + p.F * (sp_c + sm_c))
    jump = sp_c @ sm_c

    # battery Hamiltonian on the 2^N battery factor
    def bat_op(op, k):
        return opalg.kron_all([op if j == k else i2 for j in range(n_batteries)])

    battery_h = p.omega_B * sum(bat_op(sp, k) @ bat_op(sm, k) for k in range(n_batteries))
    ground_ket = opalg.basis_ket(2 ** n_sites, 2 ** n_sites - 1)  # all |g>
    return ModelSpec(
        kind=ModelKind.STAR_TLS, params=p, dims=(2,) + (2,) * n_batteries,
        hamiltonian=h, jump=jump, charger_h=charger_h,
        battery_h=np.asarray(battery_h, dtype=complex),
        ground_ket=ground_ket, n_batteries=n_batteries,
    )


def build(kind: ModelKind, p: Params, cutoff: int | None = None,
          n_batteries: int = 1) -> ModelSpec:
    if kind is ModelKind.TWO_TLS:
        return build_two_tls(p)
    if kind is ModelKind.TWO_HO:
        return build_two_ho(p, cutoff)
    if kind is ModelKind.TLS_HO:
        return build_tls_ho(p, cutoff)
    if kind is ModelKind.STAR_TLS:
        return build_star_tls(p, n_batteries)
    raise ValueError(f"unknown model kind {kind}")

"""Master-equation integration, steady states and the averaged dephasing channel.

The generator is

    drho/dt = -i [Hbar, rho] + gamma_C (L rho L - {L^2, rho}/2)

with hermitian jump L commuting with the bare charger Hamiltonian (pure
dephasing: populations in the L eigenbasis are conserved, coherences decay).

Integration is an adaptive embedded Runge-Kutta 5(4) pair with dense output
sampled on the requested grid; the state is re-hermitized after every
accepted step (roundoff projection; the cumulative drift magnitude is
recorded in the output metadata). A matrix-exponential propagation of the
vectorized generator is available as an exact-propagator cross-check for
small dimensions. Operator products switch to sparse storage for large
composite spaces, where the Hamiltonians have O(dim) nonzeros.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, Optional

import numpy as np
import scipy.sparse as sps
from scipy.integrate import RK45
from scipy.linalg import expm

from . import opalg
from .errors import DegenerateSteadyState, DimMismatch, StepSizeUnderflow
from .models import ModelSpec, check_truncation
from .series import TimeSeries

# dimension above which H and L act as sparse matrices in the RHS
_SPARSE_DIM = 48
# largest vectorized dimension (dim^2) for dense superoperator work
MAX_SUPEROP_DIM = 4096

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11


def liouvillian_apply(model: ModelSpec, rho: np.ndarray) -> np.ndarray:
    """Apply the generator to an operator (not restricted to states).

    The dephasing rate is taken from ``model.params.gamma_C``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != model.hamiltonian.shape:
        raise DimMismatch(
            f"state dim {rho.shape} != model dim {model.hamiltonian.shape}")
    h, jump, gam = model.hamiltonian, model.jump, model.params.gamma_C
    out = -1j * (h @ rho - rho @ h)
    if gam:
        jj = jump @ jump
        out += gam * (jump @ rho @ jump - 0.5 * (jj @ rho + rho @ jj))
    return out


def liouvillian_matrix(model: ModelSpec) -> np.ndarray:
    """Dense superoperator acting on the row-major vectorization of rho."""
    d = model.dim
    if d * d > MAX_SUPEROP_DIM:
        raise DimMismatch(
            f"vectorized dimension {d * d} exceeds {MAX_SUPEROP_DIM}")
    h, jump, gam = model.hamiltonian, model.jump, model.params.gamma_C
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    if gam:
        jj = jump @ jump
        sup = sup + gam * (np.kron(jump, jump.T)
                           - 0.5 * (np.kron(jj, eye) + np.kron(eye, jj.T)))
    return sup


def _rhs_factory(model: ModelSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    d = model.dim
    gam = model.params.gamma_C
    if d >= _SPARSE_DIM:
        h = sps.csr_matrix(model.hamiltonian)
        jump = sps.csr_matrix(model.jump)
        jj = (jump @ jump).tocsr()
        h_t = sps.csr_matrix(model.hamiltonian.T)
        jump_t = sps.csr_matrix(model.jump.T)
        jj_t = sps.csr_matrix(jj.T)

        def rhs(t, y):
            rho = y.reshape(d, d)
            # right multiplications via transposed operators on rho^T views
            out = -1j * (h @ rho - (h_t @ rho.T).T)
            if gam:
                lrl = (jump_t @ (jump @ rho).T).T
                out += gam * (lrl - 0.5 * ((jj @ rho) + (jj_t @ rho.T).T))
            return out.ravel()
    else:
        h = model.hamiltonian
        jump = model.jump
        jj = jump @ jump

        def rhs(t, y):
            rho = y.reshape(d, d)
            out = -1j * (h @ rho - rho @ h)
            if gam:
                out += gam * (jump @ rho @ jump - 0.5 * (jj @ rho + rho @ jj))
            return out.ravel()

    return rhs


def _sample_record(series_obs: Dict[str, list], observables, rho):
    for name, fn in observables.items():
        series_obs[name].append(fn(rho))


def integrate(model: ModelSpec, t_grid, rho0: Optional[np.ndarray] = None,
              method: str = "rk45", rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL,
              observables: Optional[Dict[str, Callable]] = None,
              store_states: Optional[bool] = None,
              check_cutoff: bool = True) -> TimeSeries:
    """Evolve ``rho0`` (default: joint ground state) and sample on ``t_grid``.

    ``observables`` maps names to callables rho -> float recorded at each
    grid time; when given and ``store_states`` is not requested, states are
    discarded to keep long runs cheap. method "expm" propagates the
    vectorized generator exactly (dim^2 <= 4096).

    Raises StepSizeUnderflow (with the last good time) if the adaptive
    stepper stalls, and CutoffTooSmall if an oscillator factor accumulates
    population in its top two truncated levels.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be strictly increasing and non-negative")
    d = model.dim
    rho0 = model.ground_dm if rho0 is None else np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise DimMismatch(f"rho0 shape {rho0.shape} != model dim {d}")
    if store_states is None:
        store_states = observables is None

    obs_records: Dict[str, list] = {k: [] for k in (observables or {})}
    states: list = []
    trunc_max = 0.0

    def take_sample(rho):
        nonlocal trunc_max
        rho = opalg.hermitize(rho)
        if store_states:
            states.append(rho)
        if observables:
            _sample_record(obs_records, observables, rho)
        if check_cutoff and model.cutoff:
            from .models import top_fock_population
            trunc_max = max(trunc_max, top_fock_population(rho, model))
        return rho

    if method == "expm":
        _propagate_expm(model, rho0, t_grid, take_sample)
        herm_drift = 0.0
    elif method == "rk45":
        herm_drift = _propagate_rk45(model, rho0, t_grid, take_sample,
                                     rtol, atol)
    else:
        raise ValueError(f"unknown method {method!r}")

    if check_cutoff and model.cutoff:
        from .models import TRUNCATION_TOL
        if trunc_max > TRUNCATION_TOL:
            from .errors import CutoffTooSmall
            raise CutoffTooSmall(
                f"top two Fock levels reached population {trunc_max:.2e}; "
                f"increase cutoff (currently {model.cutoff})")

    series = TimeSeries(
        times=t_grid,
        states=states if store_states else None,
        observables={k: np.asarray(v) for k, v in obs_records.items()},
        meta={"solver": f"lindblad/{method}", "rtol": rtol, "atol": atol,
              "herm_drift_max": herm_drift,
              "truncation_top2_max": trunc_max if model.cutoff else None},
    )
    return series


def _propagate_expm(model: ModelSpec, rho0, t_grid, take_sample):
    d = model.dim
    sup = liouvillian_matrix(model)
    vec = rho0.ravel().astype(complex)
    cache: Dict[float, np.ndarray] = {}
    t_prev = 0.0
    for t in t_grid:
        dt = t - t_prev
        if dt != 0.0:
            prop = cache.get(dt)
            if prop is None:
                prop = expm(sup * dt)
                cache[dt] = prop
            vec = prop @ vec
        take_sample(vec.reshape(d, d))
        t_prev = t


def _propagate_rk45(model: ModelSpec, rho0, t_grid, take_sample,
                    rtol, atol) -> float:
    d = model.dim
    rhs = _rhs_factory(model)
    t_end = float(t_grid[-1])
    grid_idx = 0
    n_grid = len(t_grid)
    herm_drift = 0.0

    if t_grid[0] == 0.0:
        take_sample(rho0)
        grid_idx = 1
    if grid_idx == n_grid:
        return herm_drift

    solver = RK45(rhs, 0.0, rho0.ravel().astype(complex), t_end,
                  rtol=rtol, atol=atol)
    while grid_idx < n_grid:
        if solver.status == "finished":
            break
        try:
            msg = solver.step()
        except Exception as exc:  # scipy raises on unsalvageable steps
            raise StepSizeUnderflow(str(exc), last_good_time=solver.t) from exc
        if solver.status == "failed":
            raise StepSizeUnderflow(
                f"adaptive step failed: {msg}", last_good_time=solver.t)
        # dense-sample every grid point inside the accepted step
        if grid_idx < n_grid and t_grid[grid_idx] <= solver.t:
            interp = solver.dense_output()
            while grid_idx < n_grid and t_grid[grid_idx] <= solver.t:
                y = interp(t_grid[grid_idx])
                take_sample(y.reshape(d, d))
                grid_idx += 1
        # re-hermitize the accepted state; log the projection size
        rho = solver.y.reshape(d, d)
        herm = opalg.hermitize(rho)
        herm_drift = max(herm_drift, float(np.max(np.abs(rho - herm))))
        solver.y = herm.ravel()
    if grid_idx < n_grid:
        raise StepSizeUnderflow(
            f"integration ended at t={solver.t} before grid end {t_end}",
            last_good_time=solver.t)
    return herm_drift


def _null_space_candidates(model: ModelSpec):
    """Null vectors of the vectorized generator via the spectrum of L^dag L.

    Returns (null_vectors, ambiguous): eigenvalues below w_max * 1e-12 count
    as null (the eigh roundoff floor sits near w_max * 1e-15); ``ambiguous``
    flags further eigenvalues within w_max * 1e-8, where slow physical modes
    cannot be told apart from the kernel and the caller must not trust a
    seemingly unique null vector.
    """
    sup = liouvillian_matrix(model)
    w, v = np.linalg.eigh(sup.conj().T @ sup)  # w = singular values squared
    scale = max(float(w[-1]), 1e-300)
    null_mask = w <= scale * 1e-12
    loose = int(np.sum(w <= scale * 1e-8))
    return v[:, null_mask], loose > int(np.sum(null_mask))


def steady_state_horizon(model: ModelSpec) -> float:
    """Integration horizon for the degenerate-steady-state fallback."""
    p = model.params
    gam = max(p.gamma_C, 1e-12)
    return 50.0 * max(1.0 / gam, gam / p.g ** 2, 1.0 / p.g)


def steady_state(model: ModelSpec, rho0: Optional[np.ndarray] = None,
                 fallback: bool = True, resid_tol: float = 1e-8) -> np.ndarray:
    """Stationary state of the generator.

    Default path: one-dimensional null space of the vectorized generator.
    Pure dephasing often leaves conserved quantities (the battery coherence
    block has no unique fixed point); the null space is then degenerate and,
    with ``fallback`` enabled, the steady state reached from ``rho0``
    (default: joint ground state) is computed by long-time integration.
    With ``fallback=False`` degeneracy raises DegenerateSteadyState.
    """
    if model.params.gamma_C <= 0:
        raise ValueError("steady_state requires gamma_C > 0")
    d = model.dim
    if d * d <= MAX_SUPEROP_DIM:
        null, ambiguous = _null_space_candidates(model)
        null_dim = null.shape[1]
        if null_dim == 1 and not ambiguous:
            rho = opalg.hermitize(null[:, 0].reshape(d, d))
            tr = np.trace(rho).real
            if abs(tr) > 1e-12:
                rho = rho / tr
                resid = float(np.max(np.abs(liouvillian_apply(model, rho))))
                w_min = float(np.linalg.eigvalsh(rho)[0])
                if resid <= resid_tol and w_min >= -1e-9:
                    return rho
        if not fallback:
            raise DegenerateSteadyState(
                f"generator null space has dimension {null_dim}"
                + (" (plus unresolved slow modes)" if ambiguous else "")
                + "; steady state depends on the initial state",
                null_dim=null_dim)
    elif not fallback:
        raise DegenerateSteadyState(
            "dimension too large for the dense null-space path", null_dim=-1)

    # fallback: relax the physical initial state
    rho = model.ground_dm if rho0 is None else np.asarray(rho0, dtype=complex)
    horizon = steady_state_horizon(model)
    method = "expm" if d * d <= 1024 else "rk45"
    for _ in range(6):
        series = integrate(model, np.array([horizon]), rho0=rho,
                           method=method, check_cutoff=False)
        rho = series.states[-1]
        resid = float(np.max(np.abs(liouvillian_apply(model, rho))))
        if resid <= resid_tol:
            break
        horizon *= 2.0
    rho = opalg.hermitize(rho)
    return rho / np.trace(rho).real


def povm_average_channel(rho: np.ndarray, jump: np.ndarray, gamma: float,
                         dt: float) -> np.ndarray:
    """Outcome-averaged finite-step dephasing channel.

    A weak measurement of the hermitian ``jump`` over a step ``dt`` with
    Gaussian measurement operators, averaged over outcomes, multiplies the
    (m, n) coherence in the jump eigenbasis by
    exp(-gamma dt (lambda_m - lambda_n)^2 / 2) and leaves populations fixed.
    Composes exactly: n steps of dt reproduce one step of n dt.
    """
    if gamma * dt < 0:
        raise ValueError("gamma * dt must be non-negative")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != jump.shape:
        raise DimMismatch("state and jump dimensions differ")
    lam, v = opalg.herm_eig(np.asarray(jump, dtype=complex))
    diff = lam[:, None] - lam[None, :]
    decay = np.exp(-gamma * dt * diff ** 2 / 2.0)
    rho_eig = v.conj().T @ rho @ v
    return v @ (decay * rho_eig) @ v.conj().T

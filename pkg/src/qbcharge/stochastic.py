"""Stochastic pure-state unravellings of the dephasing master equation.

Two schemes, both Euler-Maruyama with per-step renormalization:

* MEASUREMENT_NONLINEAR - continuous weak measurement of the jump operator:

      d|psi> = -i H |psi> dt - (gamma/2)(L - <L>)^2 |psi> dt
               + sqrt(gamma) (L - <L>) |psi> dW

  The nonlinear drift keeps the state normalized in the continuum limit;
  eigenstates of L are fixed points of the stochastic part.

* CLASSICAL_NOISE_LINEAR - white frequency noise added to the Hamiltonian,
  H -> H + sqrt(gamma) xi(t) L, whose Ito form reads

      d|psi> = (-i H - (gamma/2) L^2) |psi> dt - i sqrt(gamma) L |psi> dW.

  For hermitian L this is unitary evolution under a noisy Hamiltonian, so
  the norm is a martingale (drift-free); renormalizing each step only
  removes the O(dt) discretization bias and is recorded as metadata.

Averaging projectors |psi><psi| over trajectories reproduces the GKLS
dephasing evolution in both schemes. Trajectories draw their Wiener
increments from independent substreams keyed by (seed, trajectory index),
so ensembles are deterministic and independent of scheduling order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import Unstable
from .models import ModelSpec
from .series import TimeSeries

NORM_BLOWUP = 1e3
# stability policy for the Euler-Maruyama step
MAX_DT_GAMMA = 0.05
MAX_DT_HNORM = 0.05


class Scheme(Enum):
    MEASUREMENT_NONLINEAR = "measurement_nonlinear"
    CLASSICAL_NOISE_LINEAR = "classical_noise_linear"


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float
    n_steps: int
    n_traj: int
    seed: int
    scheme: Scheme = Scheme.MEASUREMENT_NONLINEAR

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 1 or self.n_traj < 1:
            raise ValueError("dt, n_steps and n_traj must be positive")


def hamiltonian_norm(model: ModelSpec) -> float:
    """Spectral norm of the rotating-frame Hamiltonian."""
    return float(np.linalg.norm(model.hamiltonian, 2))


def recommended_config(model: ModelSpec, t_max: float, n_traj: int, seed: int,
                       scheme: Scheme = Scheme.MEASUREMENT_NONLINEAR,
                       dt_cap: Optional[float] = None) -> TrajectoryConfig:
    """Largest stable step meeting dt*gamma <= 0.05 and dt*|H| <= 0.05."""
    scale = max(model.params.gamma_C / MAX_DT_GAMMA,
                hamiltonian_norm(model) / MAX_DT_HNORM, 1e-9)
    dt = min(1.0 / scale, dt_cap if dt_cap else np.inf)
    n_steps = max(int(np.ceil(t_max / dt - 1e-12)), 1)
    dt = t_max / n_steps
    return TrajectoryConfig(dt=dt, n_steps=n_steps, n_traj=n_traj, seed=seed,
                            scheme=scheme)


def validate_stability(model: ModelSpec, cfg: TrajectoryConfig):
    if cfg.dt * model.params.gamma_C > MAX_DT_GAMMA + 1e-12:
        raise ValueError(
            f"dt*gamma_C = {cfg.dt * model.params.gamma_C:.3g} exceeds "
            f"{MAX_DT_GAMMA} (unstable step)")
    hnorm = hamiltonian_norm(model)
    if cfg.dt * hnorm > MAX_DT_HNORM + 1e-12:
        raise ValueError(
            f"dt*|H| = {cfg.dt * hnorm:.3g} exceeds {MAX_DT_HNORM} "
            f"(unstable step)")


def _step_measurement(psi: np.ndarray, h, jump, gamma: float, dt: float,
                      dw: np.ndarray) -> np.ndarray:
    """Vectorized nonlinear measurement step on (n_traj, dim) states."""
    h_psi = psi @ h.T
    l_psi = psi @ jump.T
    l_avg = np.real(np.einsum("ti,ti->t", psi.conj(), l_psi))[:, None]
    dev = l_psi - l_avg * psi
    dev2 = dev @ jump.T - l_avg * dev
    out = (psi - 1j * dt * h_psi - 0.5 * gamma * dt * dev2
           + np.sqrt(gamma) * dw[:, None] * dev)
    return out


def _step_noise(psi: np.ndarray, h, jump, gamma: float, dt: float,
                dw: np.ndarray) -> np.ndarray:
    """Vectorized linear classical-noise step (Ito form)."""
    h_psi = psi @ h.T
    l_psi = psi @ jump.T
    ll_psi = l_psi @ jump.T
    out = (psi - 1j * dt * h_psi - 0.5 * gamma * dt * ll_psi
           - 1j * np.sqrt(gamma) * dw[:, None] * l_psi)
    return out


def sse_step_measurement(psi: np.ndarray, model: ModelSpec, dt: float,
                         dw: float) -> np.ndarray:
    """One renormalized Euler-Maruyama step of the measurement unravelling."""
    out = _step_measurement(np.asarray(psi, dtype=complex)[None, :],
                            model.hamiltonian, model.jump,
                            model.params.gamma_C, dt, np.array([dw]))[0]
    return out / np.linalg.norm(out)


def sse_step_noise(psi: np.ndarray, model: ModelSpec, dt: float,
                   dw: float, renormalize: bool = True) -> np.ndarray:
    """One Euler-Maruyama step of the classical-noise unravelling."""
    out = _step_noise(np.asarray(psi, dtype=complex)[None, :],
                      model.hamiltonian, model.jump,
                      model.params.gamma_C, dt, np.array([dw]))[0]
    return out / np.linalg.norm(out) if renormalize else out


def _worker_count() -> int:
    env = os.environ.get("QB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _checkpoint_indices(t_grid: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    idx = np.rint(t_grid / dt).astype(int)
    if np.any(np.abs(idx * dt - t_grid) > 1e-9 * np.maximum(1.0, t_grid)):
        raise ValueError("every t_grid entry must be an integer multiple of dt")
    if np.any(idx > n_steps):
        raise ValueError("t_grid extends past n_steps * dt")
    return idx


def _run_chunk(model: ModelSpec, cfg: TrajectoryConfig,
               traj_ids: Sequence[int], check_idx: np.ndarray,
               record_ops: Dict[str, np.ndarray], want_state: bool):
    """Simulate a batch of trajectories; returns per-checkpoint accumulators."""
    dim = model.dim
    n_chunk = len(traj_ids)
    gamma = model.params.gamma_C
    h, jump = model.hamiltonian, model.jump
    stepper = (_step_measurement
               if cfg.scheme is Scheme.MEASUREMENT_NONLINEAR else _step_noise)

    # per-trajectory deterministic substream: child sequence (seed, index)
    noise = np.empty((n_chunk, cfg.n_steps))
    for row, tid in enumerate(traj_ids):
        gen = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(tid,)))
        noise[row] = gen.normal(0.0, np.sqrt(cfg.dt), cfg.n_steps)

    psi = np.tile(model.ground_ket, (n_chunk, 1)).astype(complex)
    n_check = len(check_idx)
    sums = {k: np.zeros(n_check) for k in record_ops}
    sumsq = {k: np.zeros(n_check) for k in record_ops}
    state_acc = (np.zeros((n_check, dim, dim), dtype=complex)
                 if want_state else None)
    check_pos = {int(s): i for i, s in enumerate(check_idx)}

    def record(step):
        pos = check_pos.get(step)
        if pos is None:
            return
        for name, op in record_ops.items():
            vals = np.real(np.einsum("ti,ij,tj->t", psi.conj(), op, psi))
            sums[name][pos] += vals.sum()
            sumsq[name][pos] += (vals ** 2).sum()
        if state_acc is not None:
            state_acc[pos] += np.einsum("ti,tj->ij", psi, psi.conj())

    record(0)
    for step in range(cfg.n_steps):
        psi = stepper(psi, h, jump, gamma, cfg.dt, noise[:, step])
        norms = np.linalg.norm(psi, axis=1)
        if np.any(norms > NORM_BLOWUP):
            raise Unstable(
                f"trajectory norm reached {norms.max():.2e} at step {step + 1}")
        psi /= norms[:, None]
        record(step + 1)
    return sums, sumsq, state_acc


def ensemble_run(model: ModelSpec, cfg: TrajectoryConfig, t_grid,
                 extra_ops: Optional[Dict[str, np.ndarray]] = None,
                 accumulate_state: bool = False) -> TimeSeries:
    """Average an ensemble of trajectories at the checkpoint times ``t_grid``.

    Records the battery energy (and any ``extra_ops`` expectation values)
    with standard errors (sample std / sqrt(n_traj)); with
    ``accumulate_state`` the ensemble-mean density matrix at each checkpoint
    is stored for nonlinear functionals (ergotropy, entropy).
    """
    validate_stability(model, cfg)
    t_grid = np.asarray(t_grid, dtype=float)
    check_idx = _checkpoint_indices(t_grid, cfg.dt, cfg.n_steps)

    hb_full = np.kron(np.eye(model.charger_dim), model.battery_h)
    record_ops = {"energy": hb_full}
    if extra_ops:
        record_ops.update(extra_ops)

    workers = _worker_count()
    ids = np.arange(cfg.n_traj)
    chunks = np.array_split(ids, min(workers, cfg.n_traj))
    results = []
    if len(chunks) == 1:
        results.append(_run_chunk(model, cfg, chunks[0], check_idx,
                                  record_ops, accumulate_state))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, model, cfg, chunk, check_idx,
                                   record_ops, accumulate_state)
                       for chunk in chunks if len(chunk)]
            for fut in futures:
                results.append(fut.result())

    n = cfg.n_traj
    observables, errors = {}, {}
    for name in record_ops:
        total = sum(r[0][name] for r in results)
        total_sq = sum(r[1][name] for r in results)
        mean = total / n
        var = np.maximum(total_sq / n - mean ** 2, 0.0)
        observables[name] = mean
        errors[name] = np.sqrt(var / n)

    states = None
    if accumulate_state:
        states = [sum(r[2][k] for r in results) / n
                  for k in range(len(check_idx))]

    return TimeSeries(
        times=t_grid, states=states, observables=observables, errors=errors,
        meta={"solver": f"sse/{cfg.scheme.value}", "dt": cfg.dt,
              "n_traj": cfg.n_traj, "seed": cfg.seed, "renormalized": True},
    )

"""Time-series container shared by the deterministic and stochastic solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

TRACE_TOL = 1e-7
POSITIVITY_TOL = 1e-7


@dataclass(eq=False)
class TimeSeries:
    """A strictly increasing time grid with states and/or observable records.

    ``observables`` maps a name ("energy", "ergotropy", "entropy", moment
    labels, ...) to an array aligned with ``times``; ``errors`` carries
    statistical standard errors for stochastic runs. ``states`` optionally
    stores the density matrix at each grid time.
    """

    times: np.ndarray
    states: Optional[List[np.ndarray]] = None
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    errors: Dict[str, np.ndarray] = field(default_factory=dict)
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("times must be a non-empty 1-d array")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = len(self.times)
        if self.states is not None and len(self.states) != n:
            raise ValueError("states length must match times")
        for key, vals in self.observables.items():
            if len(vals) != n:
                raise ValueError(f"observable {key!r} length must match times")

    def __len__(self) -> int:
        return len(self.times)

    def validate_states(self, max_eig_checks: int = 32, full: bool = False):
        """Check trace and positivity of stored states.

        Trace is checked on every state; the eigenvalue (positivity) check is
        sampled on at most ``max_eig_checks`` evenly spaced states unless
        ``full`` is set, to keep validation cheap on long fine grids.
        """
        if not self.states:
            return
        for k, rho in enumerate(self.states):
            tr = np.trace(rho)
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(
                    f"state at t={self.times[k]:g} has trace {tr} "
                    f"(drift beyond {TRACE_TOL:.0e})")
        n = len(self.states)
        if full or n <= max_eig_checks:
            idx = range(n)
        else:
            idx = np.unique(np.linspace(0, n - 1, max_eig_checks).astype(int))
        for k in idx:
            w = np.linalg.eigvalsh(self.states[k])
            if w[0] < -POSITIVITY_TOL:
                raise ValueError(
                    f"state at t={self.times[k]:g} has eigenvalue {w[0]:.3e} "
                    f"below -{POSITIVITY_TOL:.0e}")

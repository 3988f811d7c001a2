"""Built-in oracle cross-checks behind the ``selftest`` CLI subcommand."""

from __future__ import annotations

import numpy as np

from . import analytic, lindblad, metrics, moments
from .models import ModelKind, Params, build_two_tls
from .scenarios import observable_functions


def _check_determinants() -> tuple[bool, str]:
    p = Params(F=0.5, g=1.0, gamma_C=0.3)
    sys1, sys2 = moments.tls_moment_systems(p)
    det1 = np.linalg.det(sys1.matrix)
    det2 = np.linalg.det(sys2.matrix)
    want1 = 4 * p.F ** 4 * p.g ** 2 * p.gamma_C ** 2 * (4 * p.F ** 2 + p.g ** 2)
    ok = abs(det1 - want1) <= 1e-8 * abs(want1) and abs(det2) <= 1e-10
    p_det = Params(F=0.5, g=1.0, gamma_C=0.3, delta_Cd=0.2, delta_Bd=0.2)
    _, sys2d = moments.tls_moment_systems(p_det)
    want2d = -2 * p_det.F ** 2 * p_det.gamma_C * p_det.delta_Cd ** 2
    ok = ok and abs(np.linalg.det(sys2d.matrix) - want2d) <= 1e-10
    return ok, f"det(M1)={det1:.6g} det(M2)={det2:.2e}"


def _check_moments_vs_lindblad() -> tuple[bool, str]:
    p = Params(F=0.5, g=1.0, gamma_C=1.0)
    t_grid = np.linspace(0.0, 20.0, 201)
    mom = moments.tls_observables(p, t_grid)
    model = build_two_tls(p)
    fns = observable_functions(model, ["energy"])
    lin = lindblad.integrate(model, t_grid, observables=fns,
                             store_states=False)
    err = float(np.max(np.abs(mom.observables["energy"]
                              - lin.observables["energy"])))
    return err <= 1e-7, f"max|E_moments - E_lindblad| = {err:.2e}"


def _check_ergotropy_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    h = np.diag([1.0, 0.0]).astype(complex)  # excited level first
    worst = 0.0
    for _ in range(50):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        erg = metrics.ergotropy(rho, h)
        sz = float(np.real(rho[0, 0] - rho[1, 1]))
        sm = abs(rho[0, 1])
        worst = max(worst, abs(erg - metrics.tls_ergotropy_formula(sz, sm)))
    return worst <= 1e-10, f"max formula deviation = {worst:.2e}"


def _check_closed_form() -> tuple[bool, str]:
    p = Params(F=0.5, g=1.0, gamma_C=1.15)
    t_grid = np.linspace(0.0, 30.0, 301)
    closed = np.asarray(analytic.tls_energy_closed(p, t_grid))
    mom = moments.tls_observables(p, t_grid).observables["energy"]
    err = float(np.max(np.abs(closed - mom)))
    return err <= 1e-9, f"max|closed - moments| = {err:.2e}"


CHECKS = (
    ("determinant identities", _check_determinants),
    ("moments vs lindblad energy", _check_moments_vs_lindblad),
    ("ergotropy passive-state oracle", _check_ergotropy_oracle),
    ("closed-form vs moments energy", _check_closed_form),
)


def run_selftest(verbose: bool = True) -> int:
    failures = 0
    for name, check in CHECKS:
        ok, detail = check()
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1

"""Command-line front end: config parsing, scenario execution, CSV output.

Config format: flat ``key = value`` lines plus an optional ``[sweep]``
section. Grids accept ``linspace(a, b, n)``, ``logspace(a, b, n)`` (raw
endpoints, geometric spacing) or ``list(v1, v2, ...)``. Unknown keys are
rejected with a line-numbered diagnostic.

Every CSV is written with 17 significant digits (bit-exact round trip for
doubles), a header row, ``#``-prefixed metadata lines, and a JSON run
manifest alongside (config hash, toolkit version, seed, wall time,
warnings).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .errors import NotConverged, ParseError, QBError, ValidationError
from .models import ModelKind, Params
from .scenarios import Scenario, Solver, SweepSpec, Table
from .series import TimeSeries
from .stochastic import Scheme

_MODEL_NAMES = {k.value: k for k in ModelKind}
_SOLVER_NAMES = {s.value: s for s in Solver}
_SCHEME_NAMES = {"measurement": Scheme.MEASUREMENT_NONLINEAR,
                 "noise": Scheme.CLASSICAL_NOISE_LINEAR}

_PARAM_KEYS = ("F", "g", "gamma_C", "delta_Cd", "delta_Bd", "omega_B")
_FLOAT_KEYS = _PARAM_KEYS + ("t_max", "dt")
_INT_KEYS = ("n", "seed", "cutoff", "n_batteries", "n_times", "n_traj")
_STR_KEYS = ("model", "solver", "scheme", "output", "observables")
_ALL_KEYS = set(_FLOAT_KEYS) | set(_INT_KEYS) | set(_STR_KEYS)
_SWEEP_KEYS = {"variable", "grid"}


def _parse_grid(text: str, line_no: int) -> Tuple[float, ...]:
    text = text.strip()
    for name in ("linspace", "logspace", "list"):
        if text.startswith(name + "(") and text.endswith(")"):
            body = text[len(name) + 1:-1]
            parts = [s.strip() for s in body.split(",") if s.strip()]
            try:
                args = [float(s) for s in parts]
            except ValueError as exc:
                raise ParseError(f"bad grid argument in {text!r}: {exc}",
                                 line_no) from None
            if name == "list":
                return tuple(args)
            if len(args) != 3:
                raise ParseError(f"{name} needs (start, stop, count)", line_no)
            start, stop, count = args[0], args[1], int(args[2])
            if name == "linspace":
                return tuple(np.linspace(start, stop, count))
            if start <= 0 or stop <= 0:
                raise ParseError("logspace endpoints must be positive", line_no)
            return tuple(np.geomspace(start, stop, count))
    raise ParseError(f"unknown grid spec {text!r} "
                     f"(use linspace/logspace/list)", line_no)


def _read_config_lines(path: str) -> List[Tuple[int, str, str, str]]:
    """Yield (line_no, section, key, value) for every assignment."""
    out = []
    section = ""
    text = Path(path).read_text()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section != "sweep":
                raise ParseError(f"unknown section [{section}]", line_no)
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line_no,
                             column=len(raw) - len(raw.lstrip()) + 1)
        key, value = line.split("=", 1)
        out.append((line_no, section, key.strip(), value.strip()))
    return out


def parse_config(path: str) -> Scenario:
    """Parse and fully validate a scenario config file."""
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    sweep_values: Dict[str, str] = {}
    sweep_lines: Dict[str, int] = {}
    for line_no, section, key, value in _read_config_lines(path):
        if section == "sweep":
            if key not in _SWEEP_KEYS:
                raise ParseError(f"unknown sweep key {key!r}", line_no)
            sweep_values[key] = value
            sweep_lines[key] = line_no
        else:
            if key not in _ALL_KEYS:
                raise ParseError(f"unknown key {key!r}", line_no)
            values[key] = value
            lines[key] = line_no

    def take_float(key, default=None):
        if key not in values:
            return default
        try:
            return float(values[key])
        except ValueError:
            raise ValidationError(f"not a number: {values[key]!r}", key) from None

    def take_int(key, default=None):
        if key not in values:
            return default
        try:
            return int(values[key])
        except ValueError:
            raise ValidationError(f"not an integer: {values[key]!r}", key) from None

    model_name = values.get("model")
    if model_name is None:
        raise ValidationError("required key missing", "model")
    if model_name not in _MODEL_NAMES:
        raise ValidationError(f"unknown model {model_name!r} "
                              f"(choose from {sorted(_MODEL_NAMES)})", "model")
    kind = _MODEL_NAMES[model_name]

    try:
        params = Params(
            g=take_float("g", 1.0), F=take_float("F", 0.0),
            gamma_C=take_float("gamma_C", 0.0),
            delta_Cd=take_float("delta_Cd", 0.0),
            delta_Bd=take_float("delta_Bd", 0.0),
            omega_B=take_float("omega_B", 1.0),
        )
    except ValueError as exc:
        bad = next((k for k in ("g", "F", "gamma_C")
                    if take_float(k, 0.0) < 0), "params")
        raise ValidationError(str(exc), bad) from None

    solver_name = values.get("solver", "lindblad")
    if solver_name not in _SOLVER_NAMES:
        raise ValidationError(f"unknown solver {solver_name!r}", "solver")
    scheme_name = values.get("scheme", "measurement")
    if scheme_name not in _SCHEME_NAMES:
        raise ValidationError(f"unknown scheme {scheme_name!r}", "scheme")

    observables: Tuple[str, ...] = ("energy", "ergotropy")
    if "observables" in values:
        observables = tuple(s.strip() for s in values["observables"].split(",")
                            if s.strip())

    sweep = None
    if sweep_values:
        if "variable" not in sweep_values:
            raise ValidationError("sweep block needs 'variable'",
                                  "sweep.variable")
        if "grid" not in sweep_values:
            raise ValidationError("sweep block needs 'grid'", "sweep.grid")
        grid = _parse_grid(sweep_values["grid"], sweep_lines["grid"])
        sweep = SweepSpec(variable=sweep_values["variable"], values=grid)

    n = take_int("n", 1)
    if n < 1:
        raise ValidationError("n must be >= 1", "n")
    scenario = Scenario(
        kind=kind, params=params, solver=_SOLVER_NAMES[solver_name],
        t_max=take_float("t_max", 30.0), n_times=take_int("n_times", 601),
        observables=observables, n=n, seed=take_int("seed", 1234),
        cutoff=take_int("cutoff"), n_batteries=take_int("n_batteries", 1),
        n_traj=take_int("n_traj", 1000), scheme=_SCHEME_NAMES[scheme_name],
        sweep=sweep, output=values.get("output"),
    )
    return scenario


def canonical_config(s: Scenario) -> str:
    """Deterministic config text reproducing the scenario on re-parse."""
    lines = [
        f"model = {s.kind.value}",
        f"F = {s.params.F!r}",
        f"g = {s.params.g!r}",
        f"gamma_C = {s.params.gamma_C!r}",
        f"delta_Cd = {s.params.delta_Cd!r}",
        f"delta_Bd = {s.params.delta_Bd!r}",
        f"omega_B = {s.params.omega_B!r}",
        f"solver = {s.solver.value}",
        f"t_max = {s.t_max!r}",
        f"n_times = {s.n_times}",
        f"observables = {', '.join(s.observables)}",
        f"n = {s.n}",
        f"seed = {s.seed}",
        f"n_batteries = {s.n_batteries}",
        f"n_traj = {s.n_traj}",
        ("scheme = measurement"
         if s.scheme is Scheme.MEASUREMENT_NONLINEAR else "scheme = noise"),
    ]
    if s.cutoff is not None:
        lines.append(f"cutoff = {s.cutoff}")
    if s.output is not None:
        lines.append(f"output = {s.output}")
    if s.sweep is not None:
        grid = ", ".join(repr(v) for v in s.sweep.values)
        lines += ["[sweep]", f"variable = {s.sweep.variable}",
                  f"grid = list({grid})"]
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    """Provenance record written next to every output CSV."""

    config_hash: str
    version: str
    seed: int
    wall_time_s: float
    warnings: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, table: Table, manifest: RunManifest):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for key in sorted(table.meta):
            fh.write(f"# {key} = {table.meta[key]}\n")
        fh.write(",".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    with open(path.with_suffix(".manifest.json"), "w") as fh:
        fh.write(manifest.to_json() + "\n")


def series_to_table(series: TimeSeries) -> Table:
    cols = ["t"] + list(series.observables)
    data = [series.times] + [series.observables[k] for k in series.observables]
    for key in series.errors:
        cols.append(f"stderr_{key}")
        data.append(series.errors[key])
    meta = {k: v for k, v in series.meta.items() if v is not None}
    return Table(columns=tuple(cols), rows=list(zip(*data)), meta=meta)


def _execute_and_write(scenario: Scenario, out_dir: Path, stem: str,
                       config_text: str) -> int:
    from . import scenarios as sc

    started = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = sc.run_scenario(scenario)
    wall = time.perf_counter() - started
    manifest = RunManifest(
        config_hash=hashlib.sha256(config_text.encode()).hexdigest(),
        version=__version__, seed=scenario.seed, wall_time_s=wall,
        warnings=[str(w.message) for w in caught],
    )
    table = result if isinstance(result, Table) else series_to_table(result)
    write_csv(out_dir / f"{stem}.csv", table, manifest)
    print(f"wrote {out_dir / f'{stem}.csv'}")
    return 0


def _cmd_simulate(args) -> int:
    scenario = parse_config(args.config)
    out_dir = Path(args.output or scenario.output or ".")
    return _execute_and_write(scenario, out_dir, args.name,
                              canonical_config(scenario))


def _cmd_sweep(args) -> int:
    scenario = parse_config(args.config)
    if scenario.sweep is None:
        raise ValidationError("config has no [sweep] block", "sweep")
    out_dir = Path(args.output or scenario.output or ".")
    return _execute_and_write(scenario, out_dir, args.name,
                              canonical_config(scenario))


def _cmd_charging_time(args) -> int:
    from . import scenarios as sc

    kind = _MODEL_NAMES[args.model]
    params = Params(F=args.F, g=args.g, gamma_C=args.gamma,
                    delta_Cd=args.delta_cd, delta_Bd=args.delta_bd)
    table = sc.charging_time_sweep(kind, params, [args.gamma], args.n,
                                   cutoff=args.cutoff)
    row = table.rows[0]
    if not row[4]:
        print("charging time did not converge within the horizon",
              file=sys.stderr)
        return 1
    print(f"tau = {_fmt(row[1])}")
    print(f"n = {args.n}")
    print(f"e_ss = {_fmt(row[2])}")
    print(f"e_max_transient = {_fmt(row[3])}")
    print(f"gamma_C = {_fmt(args.gamma)}")
    print("converged = true")
    return 0


def _cmd_figure(args) -> int:
    from .figures import FIGURES

    fn = FIGURES.get(args.name)
    if fn is None:
        raise ValidationError(
            f"unknown figure {args.name!r} (choose from {sorted(FIGURES)})",
            "figure")
    out_dir = Path(args.output or ".")
    started = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tables = fn()
    wall = time.perf_counter() - started
    manifest = RunManifest(
        config_hash=hashlib.sha256(f"figure:{args.name}".encode()).hexdigest(),
        version=__version__, seed=0, wall_time_s=wall,
        warnings=[str(w.message) for w in caught])
    for name, table in tables.items():
        write_csv(out_dir / f"{name}.csv", table, manifest)
        print(f"wrote {out_dir / f'{name}.csv'}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qbcharge",
        description="dephasing-assisted quantum battery charging toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a time-series scenario")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--output", default=None)
    p_sim.add_argument("--name", default="timeseries")
    p_sim.set_defaults(func=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a sweep scenario")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--output", default=None)
    p_sweep.add_argument("--name", default="sweep")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_tau = sub.add_parser("charging-time", help="single charging-time run")
    p_tau.add_argument("--model", required=True, choices=sorted(_MODEL_NAMES))
    p_tau.add_argument("--F", type=float, required=True)
    p_tau.add_argument("--g", type=float, required=True)
    p_tau.add_argument("--gamma", type=float, required=True)
    p_tau.add_argument("--n", type=int, default=1)
    p_tau.add_argument("--delta-cd", type=float, default=0.0)
    p_tau.add_argument("--delta-bd", type=float, default=0.0)
    p_tau.add_argument("--cutoff", type=int, default=None)
    p_tau.set_defaults(func=_cmd_charging_time)

    p_fig = sub.add_parser("figure", help="reproduce a canned figure dataset")
    p_fig.add_argument("name")
    p_fig.add_argument("--output", default=None)
    p_fig.set_defaults(func=_cmd_figure)

    p_self = sub.add_parser("selftest", help="run the oracle cross-checks")
    p_self.set_defaults(func=_cmd_selftest)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        return args.func(args)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except QBError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())

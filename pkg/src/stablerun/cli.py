"""Command-line interface.

Subcommands: check, solve, risk, classify, statics, simulate, sweep.

Parameters come from REFERENCE, then an optional config file
(``--config``, one ``key = value`` per line, ``#`` comments), then flags.
Output is JSON (floats with 17 significant digits) or CSV (12 significant
digits, NaN as an empty field, LF line endings). ``sweep`` defaults to CSV.

Exit status: 0 ok, 1 parameter or assumption error, 2 solver error, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import enum
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import SolverError, solve_equilibrium
from .model import (
    PARAM_NAMES,
    REFERENCE,
    AssumptionError,
    GameParams,
    ParameterError,
    require_assumption,
    validate,
)
from .normal import TailUnderflowError
from .risk import classify_regions, region_thresholds, run_decomposition
from .simulate import UINT64_MAX, SimConfig, estimate_run_prob
from .statics import StepSizeError, statics_report

EXIT_OK = 0
EXIT_PARAM = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

FORMATS = ("json", "csv")

SWEEP_COLUMNS = (
    "param", "value", "x_star_0", "x_star_1", "theta_bar_0", "theta_bar_1",
    "r0", "r1", "r", "s0", "s1", "region_tau", "region_taux", "assumption_ok", "status",
)


class UsageError(Exception):
    """Malformed command line or config file."""


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    param: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.param not in PARAM_NAMES:
            raise UsageError(f"sweep parameter must be one of {', '.join(PARAM_NAMES)}, got {self.param!r}")
        if self.steps < 2:
            raise UsageError(f"sweep needs at least 2 steps, got {self.steps}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Output:
    format: str = "json"
    path: str | None = None  # None means standard output


@dataclass(frozen=True)
class RunConfig:
    params: GameParams = REFERENCE
    sweep: Sweep | None = None
    sim: SimConfig | None = None
    output: Output = field(default_factory=Output)

    def to_text(self) -> str:
        lines = [f"{name} = {getattr(self.params, name)!r}" for name in PARAM_NAMES]
        if self.sweep is not None:
            s = self.sweep
            lines += [f"sweep_param = {s.param}", f"sweep_start = {s.start!r}",
                      f"sweep_stop = {s.stop!r}", f"sweep_steps = {s.steps}"]
        if self.sim is not None:
            c = self.sim
            lines += [f"sim_investors = {c.n_investors}", f"sim_trials = {c.n_trials}",
                      f"sim_seed = {c.seed}", f"sim_x_bar_0 = {c.thresholds[0]!r}",
                      f"sim_x_bar_1 = {c.thresholds[1]!r}"]
        lines.append(f"format = {self.output.format}")
        if self.output.path is not None:
            lines.append(f"output = {self.output.path}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return build_config(parse_config_text(text))


_FLOAT_KEYS = set(PARAM_NAMES) | {"sweep_start", "sweep_stop", "sim_x_bar_0", "sim_x_bar_1"}
_INT_KEYS = {"sweep_steps", "sim_investors", "sim_trials", "sim_seed"}
_STR_KEYS = {"sweep_param", "format", "output"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise UsageError(f"config line {lineno}: {exc}") from None
    return values


def _convert(key: str, value: str):
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _INT_KEYS:
        return int(value, 10)
    return value


def build_config(values: dict) -> RunConfig:
    """Assemble a RunConfig from already-typed values over REFERENCE defaults."""
    params = GameParams(**{n: values.get(n, getattr(REFERENCE, n)) for n in PARAM_NAMES})
    sweep = None
    sweep_keys = ("sweep_param", "sweep_start", "sweep_stop", "sweep_steps")
    if any(k in values for k in sweep_keys):
        missing = [k for k in sweep_keys if k not in values]
        if missing:
            raise UsageError(f"incomplete sweep: missing {', '.join(missing)}")
        sweep = Sweep(values["sweep_param"], values["sweep_start"], values["sweep_stop"], values["sweep_steps"])
    sim = None
    sim_keys = ("sim_investors", "sim_trials", "sim_seed", "sim_x_bar_0", "sim_x_bar_1")
    if any(k in values for k in sim_keys):
        missing = [k for k in sim_keys if k not in values]
        if missing:
            raise UsageError(f"incomplete simulation config: missing {', '.join(missing)}")
        try:
            sim = SimConfig(values["sim_investors"], values["sim_trials"], values["sim_seed"],
                            (values["sim_x_bar_0"], values["sim_x_bar_1"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    fmt = values.get("format", "json")
    if fmt not in FORMATS:
        raise UsageError(f"format must be json or csv, got {fmt!r}")
    return RunConfig(params, sweep, sim, Output(fmt, values.get("output")))


# -- emitters -----------------------------------------------------------------


def _json_value(v) -> str:
    if isinstance(v, enum.Enum):
        v = v.value
    if v is None or isinstance(v, bool):
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v).__name__}")


def to_json(record) -> str:
    """JSON with every float at 17 significant digits; NaN and infinities become null."""
    if isinstance(record, list):
        body = ",\n".join("  " + _json_value(r) for r in record)
        return "[\n" + body + "\n]\n"
    items = [f"  {json.dumps(k)}: {_json_value(v)}" for k, v in record.items()]
    return "{\n" + ",\n".join(items) + "\n}\n"


def _csv_cell(v) -> str:
    if isinstance(v, enum.Enum):
        v = v.value
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".12g") if math.isfinite(v) else ""
    return str(v)


def to_csv(rows: list, columns=None) -> str:
    if columns is None:
        columns = list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------


def cmd_check(cfg: RunConfig, args) -> dict:
    report = validate(cfg.params)
    return {
        "assumption_ok": report.holds,
        "slack": report.slack,
        "eta_ok": report.eta_ok,
        "dispersion_ok": report.dispersion_ok,
    }


def cmd_solve(cfg: RunConfig, args) -> dict:
    eq = solve_equilibrium(cfg.params)
    return {
        "x_star_0": eq.x_star_0,
        "x_star_1": eq.x_star_1,
        "theta_bar_0": eq.theta_bar_0,
        "theta_bar_1": eq.theta_bar_1,
        "residual_0": eq.residuals[0],
        "residual_1": eq.residuals[1],
        "iterations_0": eq.iterations[0],
        "iterations_1": eq.iterations[1],
    }


def cmd_risk(cfg: RunConfig, args) -> dict:
    rd = run_decomposition(cfg.params)
    return {"r0": rd.r0, "r1": rd.r1, "r": rd.r_total, "s0": rd.s0, "s1": rd.s1}


def cmd_classify(cfg: RunConfig, args) -> dict:
    eq = solve_equilibrium(cfg.params)
    rc = classify_regions(cfg.params, eq)
    th = rc.thresholds
    return {
        "mu": cfg.params.mu,
        "tau_sign_0": rc.tau_sign_0,
        "tau_sign_1": rc.tau_sign_1,
        "taux_sign_0": rc.taux_sign_0,
        "taux_sign_1": rc.taux_sign_1,
        "region_tau": rc.region_label_tau,
        "region_taux": rc.region_label_taux,
        "tau_lower_0": th.tau_lower[0],
        "tau_lower_1": th.tau_lower[1],
        "tau_upper_0": th.tau_upper[0],
        "tau_upper_1": th.tau_upper[1],
        "taux_threshold_0": th.tau_x[0],
        "taux_threshold_1": th.tau_x[1],
    }


def cmd_statics(cfg: RunConfig, args) -> dict:
    rep = statics_report(cfg.params)
    out = {}
    for name, check in rep.checks().items():
        out[f"{name}"] = check.analytic
        out[f"{name}_fd"] = check.fd_value
        out[f"{name}_rel_gap"] = check.rel_gap
        out[f"{name}_ok"] = check.ok
    out["d_s1_d_mu_total_fd"] = rep.d_s1_d_mu_total_fd
    out["reverse_hazard_0"], out["reverse_hazard_1"] = rep.reverse_hazards
    out["ok"] = rep.ok
    return out


def cmd_simulate(cfg: RunConfig, args) -> dict:
    sim = cfg.sim
    if sim is None:
        eq = solve_equilibrium(cfg.params)
        sim = SimConfig(10_000, 10_000, 0, (eq.x_star_0, eq.x_star_1))
    rep = estimate_run_prob(cfg.params, sim)
    return {
        "n_investors": sim.n_investors,
        "seed": sim.seed,
        "x_bar_0": sim.thresholds[0],
        "x_bar_1": sim.thresholds[1],
        "trials": rep.trials,
        "sale_trials": rep.sale_trials,
        "empirical_run_prob": rep.empirical_run_prob,
        "empirical_r0": rep.empirical_r0,
        "empirical_r1": rep.empirical_r1,
        "std_error": rep.std_error,
    }


def sweep_rows(params: GameParams, sweep: Sweep) -> list:
    """One row per grid point. Assumption and solver failures are reported in
    the row; type-invariant violations are rejected before any solving."""
    grid = sweep.grid()
    points = [params.replace(**{sweep.param: float(v)}) for v in grid]  # raises ParameterError
    rows = []
    for value, point in zip(grid, points):
        row = {c: None for c in SWEEP_COLUMNS}
        row.update(param=sweep.param, value=float(value), assumption_ok=validate(point).holds)
        try:
            require_assumption(point)
            eq = solve_equilibrium(point)
            rd = run_decomposition(point, eq)
            rc = classify_regions(point, eq)
            row.update(
                x_star_0=eq.x_star_0, x_star_1=eq.x_star_1,
                theta_bar_0=eq.theta_bar_0, theta_bar_1=eq.theta_bar_1,
                r0=rd.r0, r1=rd.r1, r=rd.r_total, s0=rd.s0, s1=rd.s1,
                region_tau=rc.region_label_tau, region_taux=rc.region_label_taux,
                status="ok" if _ordered(eq) else "ordering_violated",
            )
        except AssumptionError:
            row["status"] = "assumption_violated"
        except SolverError as exc:
            row["status"] = f"solver_error: {exc}"
        rows.append(row)
    return rows


def _ordered(eq) -> bool:
    return eq.x_star_0 < eq.x_star_1 and eq.theta_bar_0 <= eq.theta_bar_1


def cmd_sweep(cfg: RunConfig, args) -> list:
    if cfg.sweep is None:
        raise UsageError("sweep needs --param, --start, --stop and --steps (or a config with sweep_* keys)")
    return sweep_rows(cfg.params, cfg.sweep)


COMMANDS = {
    "check": (cmd_check, "check the uniqueness assumption"),
    "solve": (cmd_solve, "solve the switching signals and run thresholds"),
    "risk": (cmd_risk, "run probability and its decomposition"),
    "classify": (cmd_classify, "sign regions in the prior and signal precisions"),
    "statics": (cmd_statics, "analytic comparative statics with finite-difference checks"),
    "simulate": (cmd_simulate, "discrete-investor Monte Carlo"),
    "sweep": (cmd_sweep, "solve along a one-parameter grid"),
}


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _uint64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal integer: {text!r}") from None
    if not 0 <= value <= UINT64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64-1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value parameter file")
    for name in PARAM_NAMES:
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--output", help="write here instead of standard output")

    parser = _Parser(prog="stablerun", description="Stablecoin run game with a large seller.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "solve":
            p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
        if name == "simulate":
            p.add_argument("--investors", type=int, dest="sim_investors")
            p.add_argument("--trials", type=int, dest="sim_trials")
            p.add_argument("--seed", type=_uint64, dest="sim_seed")
            p.add_argument("--x-bar-0", type=float, dest="sim_x_bar_0")
            p.add_argument("--x-bar-1", type=float, dest="sim_x_bar_1")
        if name == "sweep":
            p.add_argument("--param", dest="sweep_param", choices=PARAM_NAMES)
            p.add_argument("--start", type=float, dest="sweep_start")
            p.add_argument("--stop", type=float, dest="sweep_stop")
            p.add_argument("--steps", type=int, dest="sweep_steps")
    return parser


def _collect(args) -> dict:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if args.command == "simulate":
        _fill_simulation(values)
    if args.command == "sweep" and "format" not in values:
        values["format"] = "csv"
    return values


def _fill_simulation(values: dict) -> None:
    """Default to N = 10^4 investors, 10^4 trials, seed 0, solved thresholds."""
    values.setdefault("sim_investors", 10_000)
    values.setdefault("sim_trials", 10_000)
    values.setdefault("sim_seed", 0)
    if "sim_x_bar_0" not in values or "sim_x_bar_1" not in values:
        params = GameParams(**{n: values.get(n, getattr(REFERENCE, n)) for n in PARAM_NAMES})
        eq = solve_equilibrium(params)
        values.setdefault("sim_x_bar_0", eq.x_star_0)
        values.setdefault("sim_x_bar_1", eq.x_star_1)


def _emit(result, cfg: RunConfig, columns=None) -> str:
    rows = result if isinstance(result, list) else [result]
    if cfg.output.format == "csv":
        return to_csv(rows, columns)
    return to_json(result)


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = build_config(_collect(args))
        if args.command == "solve" and args.dump_config:
            _write(cfg.to_text(), cfg.output.path)
            return EXIT_OK
        func = COMMANDS[args.command][0]
        result = func(cfg, args)
        _write(_emit(result, cfg, SWEEP_COLUMNS if args.command == "sweep" else None), cfg.output.path)
        if args.command == "check" and not result["assumption_ok"]:
            print("error: uniqueness assumption violated: " + "; ".join(validate(cfg.params).reasons()), file=sys.stderr)
            return EXIT_PARAM
        return EXIT_OK
    except UsageError as exc:
        print(f"stablerun: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, AssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (SolverError, StepSizeError, TailUnderflowError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())

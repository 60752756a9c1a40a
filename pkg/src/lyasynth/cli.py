"""Command-line front end.

Subcommands:
  synth      run synthesis on a benchmark or system file
  sweep      run a grid of synthesis cells (hidden widths x outer radius)
  levelsets  export a plot-ready (x, y, V, Vdot) grid for a 2-d certificate
  check      re-verify a stored certificate against a system and domain

Every flag has a config-file equivalent (--config FILE, JSON object keyed
by flag name with dashes as underscores); explicit flags win over the
file.  Exit codes for synth/check: 0 verified, 2 exhausted/falsified,
3 inconclusive, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cegis import (
    EXHAUSTED,
    INCONCLUSIVE,
    VERIFIED,
    CegisConfig,
    ConfigError,
    derive_seed,
    run_cegis,
)
from .dynamics import (
    BALL,
    ORTHANT_ANNULUS,
    ORTHANT_BALL,
    DomainSpec,
    EquilibriumError,
    SystemFormatError,
    VectorField,
    benchmark_ids,
    get_benchmark,
    parse_system,
)
from .learner import LearnerConfig
from .network import LAST_LAYER_MODES, NetworkShape
from .poly import ParseError
from .translation import lie_derivative, load_certificate
from .verifier import SolverConfig, build_queries, discover_solver, run_queries

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EXHAUSTED = 2
EXIT_INCONCLUSIVE = 3


class CliError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config-file merging: every option defaults to None at parse time; the
# effective value is flag, else config-file entry, else the built-in default.
# ---------------------------------------------------------------------------

class Options:
    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file: dict = {}
        config_path = self.args.get("config")
        if config_path:
            try:
                self.file = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as err:
                raise CliError(f"cannot read config file {config_path}: {err}") from err
            if not isinstance(self.file, dict):
                raise CliError("config file must contain a JSON object")

    def get(self, key: str, default=None):
        value = self.args.get(key)
        if value is not None:
            return value
        if key in self.file:
            return self.file[key]
        return default


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError as err:
        raise CliError(f"bad integer list {text!r}") from err


def _load_target(opts: Options) -> tuple[VectorField, DomainSpec | None]:
    benchmark = opts.get("benchmark")
    system = opts.get("system")
    if (benchmark is None) == (system is None):
        raise CliError("specify exactly one of --benchmark or --system")
    if benchmark is not None:
        try:
            bench = get_benchmark(benchmark)
        except KeyError as err:
            raise CliError(str(err)) from err
        return bench.field, bench.default_domain
    path = Path(system)
    if not path.exists():
        raise CliError(f"system file not found: {path}")
    return parse_system(path.read_text())


def _resolve_domain(opts: Options, base: DomainSpec | None) -> DomainSpec:
    gamma = opts.get("gamma")
    rho = opts.get("rho")
    orthant = bool(opts.get("orthant", False))
    if gamma is None and base is None:
        raise CliError("no domain: give --gamma (and optionally --orthant/--rho)")
    gamma_f = Fraction(str(gamma)) if gamma is not None else base.gamma
    rho_f = Fraction(str(rho)) if rho is not None else (
        base.rho if base is not None and base.kind == ORTHANT_ANNULUS else Fraction(0)
    )
    if rho_f > 0:
        return DomainSpec(ORTHANT_ANNULUS, gamma_f, rho_f)
    if orthant or (base is not None and base.orthant):
        return DomainSpec(ORTHANT_BALL, gamma_f)
    return DomainSpec(BALL, gamma_f)


def _resolve_solver(opts: Options) -> SolverConfig:
    timeout = float(opts.get("solver_timeout", 30.0))
    executable = opts.get("solver")
    if executable:
        return SolverConfig(str(executable), (), timeout)
    solver = discover_solver(timeout)
    if solver is None:
        raise CliError(
            "no SMT solver found: pass --solver, set LYASYNTH_SOLVER, or run "
            "scripts/setup_solver.sh"
        )
    return solver


def _build_cegis_config(opts: Options, dimension: int, domain: DomainSpec) -> CegisConfig:
    hidden = _parse_int_list(opts.get("hidden", "2"))
    degrees_opt = opts.get("degrees")
    degrees = (
        _parse_int_list(degrees_opt)
        if degrees_opt is not None
        else tuple(2 for _ in hidden)
    )
    if len(degrees) == 1 and len(hidden) > 1:
        degrees = degrees * len(hidden)
    slope = opts.get("slope", "auto")
    slope_value = slope if slope == "auto" else float(slope)
    try:
        shape = NetworkShape(dimension, hidden, degrees)
        learner = LearnerConfig(
            epsilon=float(opts.get("epsilon", 0.01)),
            slope_a=slope_value,
            learning_rate=float(opts.get("lr", 0.05)),
            max_epochs=int(opts.get("epochs", 2000)),
        )
        return CegisConfig(
            shape=shape,
            domain=domain,
            last_layer_mode=str(opts.get("last_layer", "ones")),
            learner=learner,
            solver=_resolve_solver(opts),
            initial_samples=int(opts.get("initial_samples", 500)),
            max_iterations=int(opts.get("max_iterations", 100)),
            cex_count=int(opts.get("cex_points", 20)),
            master_seed=int(opts.get("seed", 0)),
            emit_smt=bool(opts.get("emit_smt", False)),
        )
    except (ValueError, ConfigError) as err:
        raise CliError(str(err)) from err


def _print_outcome(outcome, quiet: bool = False) -> None:
    print(f"status: {outcome.status}")
    print(f"iterations: {len(outcome.iterations)}")
    totals: dict[str, float] = {}
    for rec in outcome.iterations:
        for phase, seconds in rec.timings.items():
            totals[phase] = totals.get(phase, 0.0) + seconds
    if totals:
        print(
            "time: "
            + "  ".join(f"{phase}={seconds:.2f}s" for phase, seconds in totals.items())
        )
    if outcome.reason:
        print(f"reason: {outcome.reason}")
    if outcome.certificate is not None and not quiet:
        names = outcome.certificate.var_names
        print("certificate:")
        print("  V =", outcome.certificate.v.to_text(names))


def _outcome_exit_code(status: str) -> int:
    return {VERIFIED: EXIT_OK, EXHAUSTED: EXIT_EXHAUSTED, INCONCLUSIVE: EXIT_INCONCLUSIVE}[status]


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    opts = Options(args)
    field, base_domain = _load_target(opts)
    domain = _resolve_domain(opts, base_domain)
    cfg = _build_cegis_config(opts, field.dimension, domain)
    out_dir = opts.get("out")
    progress = None if opts.get("quiet") else lambda msg: print(msg, flush=True)
    outcome = run_cegis(field, cfg, artifact_dir=out_dir, progress=progress)
    _print_outcome(outcome)
    if out_dir:
        print(f"artifacts: {out_dir}")
    return _outcome_exit_code(outcome.status)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args: argparse.Namespace) -> int:
    opts = Options(args)
    field, base_domain = _load_target(opts)
    hidden_grid = [
        _parse_int_list(cell)
        for cell in str(opts.get("hidden_grid", "")).split(";")
        if cell.strip()
    ]
    gamma_grid = [
        Fraction(part.strip())
        for part in str(opts.get("gamma_grid", "")).split(",")
        if part.strip()
    ]
    orthant = bool(opts.get("orthant", False)) or (
        base_domain is not None and base_domain.orthant
    )
    kind = ORTHANT_BALL if orthant else BALL
    master_seed = int(opts.get("seed", 0))

    rows = []
    for hidden in hidden_grid:
        for gamma in gamma_grid:
            cell_opts = Options(args)
            cell_opts.args = dict(cell_opts.args)
            cell_opts.args["hidden"] = ",".join(map(str, hidden))
            cell_opts.args["gamma"] = None
            domain = DomainSpec(kind, gamma)
            label = "[" + ",".join(map(str, hidden)) + "]"
            seed = derive_seed(master_seed, f"sweep-{label}-{gamma}")
            cell_opts.args["seed"] = seed
            start = time.perf_counter()
            try:
                cfg = _build_cegis_config(cell_opts, field.dimension, domain)
                outcome = run_cegis(field, cfg)
                status = {
                    VERIFIED: "success",
                    EXHAUSTED: "oot",
                    INCONCLUSIVE: "inconclusive",
                }[outcome.status]
                iterations = len(outcome.iterations)
            except Exception as err:  # a failing cell must not abort the sweep
                status, iterations = f"error", 0
                print(f"cell {label} gamma={gamma}: error: {err}", file=sys.stderr)
            elapsed = time.perf_counter() - start
            rows.append(
                {
                    "hidden": label,
                    "gamma": str(gamma),
                    "status": status,
                    "iterations": iterations,
                    "wall_time_s": round(elapsed, 3),
                    "seed": seed,
                }
            )
            print(
                f"{label:>10}  gamma={str(gamma):>6}  {status:<12} "
                f"iters={iterations:<4} {elapsed:7.2f}s",
                flush=True,
            )

    out = opts.get("out")
    if out:
        out_path = Path(out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["hidden", "gamma", "status", "iterations", "wall_time_s", "seed"]
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# levelsets
# ---------------------------------------------------------------------------

def cmd_levelsets(args: argparse.Namespace) -> int:
    opts = Options(args)
    cert_path = Path(opts.get("certificate"))
    if not cert_path.exists():
        raise CliError(f"certificate file not found: {cert_path}")
    cand = load_certificate(cert_path.read_text())
    if cand.dimension != 2:
        raise CliError("level-set export requires a 2-dimensional system")
    field, base_domain = _load_target(opts)
    if field.dimension != 2:
        raise CliError("level-set export requires a 2-dimensional system")
    vdot = lie_derivative(cand.v, field)

    resolution = int(opts.get("resolution", 101))
    if resolution < 1:
        raise CliError("resolution must be at least 1")
    bounds_text = opts.get("bounds")
    if bounds_text is not None:
        parts = [float(p) for p in str(bounds_text).split(",")]
        if len(parts) != 4:
            raise CliError("bounds must be xmin,xmax,ymin,ymax")
        x0, x1, y0, y1 = parts
    else:
        domain = _resolve_domain(opts, base_domain)
        g = float(domain.gamma)
        x0, x1, y0, y1 = -g, g, -g, g

    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    grid = np.array([(x, y) for y in ys for x in xs])
    v_vals = cand.v.eval_float_batch(grid)
    vdot_vals = vdot.eval_float_batch(grid)

    out = Path(opts.get("out", "levelsets.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "V", "Vdot"])
        for (x, y), v, vd in zip(grid, v_vals, vdot_vals):
            writer.writerow([x, y, v, vd])
    print(f"wrote {out} ({resolution}x{resolution} grid)")

    history_path = opts.get("history")
    if history_path:
        history = json.loads(Path(history_path).read_text())
        cex_out = out.with_suffix(".cex.csv")
        with cex_out.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "formula", "iteration"])
            for rec in history.get("iterations", []):
                for cex in rec.get("counterexamples", []):
                    if not cex.get("injected"):
                        continue
                    point = [float(Fraction(c)) for c in cex["point"]]
                    writer.writerow([point[0], point[1], cex["formula"], rec["index"]])
        print(f"wrote {cex_out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(args: argparse.Namespace) -> int:
    opts = Options(args)
    cert_path = Path(opts.get("certificate"))
    if not cert_path.exists():
        raise CliError(f"certificate file not found: {cert_path}")
    cand = load_certificate(cert_path.read_text())
    field, base_domain = _load_target(opts)
    domain = _resolve_domain(opts, base_domain)
    recomputed = lie_derivative(cand.v, field)
    if recomputed != cand.vdot:
        raise CliError(
            "stored Vdot does not equal the derivative of V along this system; "
            "wrong system or corrupted certificate"
        )
    solver = _resolve_solver(opts)
    results = run_queries(list(build_queries(cand, domain)), solver)
    for result in results:
        line = f"{result.which}: {result.status}"
        if result.reason:
            line += f" ({result.reason})"
        print(line)
    if all(r.status == "unsat" for r in results):
        print("certificate is valid on", domain.describe())
        return EXIT_OK
    if any(r.status == "sat" for r in results):
        print("certificate is falsified")
        return EXIT_EXHAUSTED
    print("verification inconclusive")
    return EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_target_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--benchmark", choices=benchmark_ids(), help="built-in system id")
    sub.add_argument("--system", help="path to a system file")
    sub.add_argument("--gamma", help="outer radius of the domain")
    sub.add_argument("--rho", help="inner radius (positive-orthant annulus)")
    sub.add_argument("--orthant", action="store_true", default=None,
                     help="restrict the domain to the positive orthant")
    sub.add_argument("--config", help="JSON config file with flag equivalents")


def _add_synth_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--hidden", help="hidden layer widths, e.g. 2 or 5,2")
    sub.add_argument("--degrees", help="activation degrees per layer, e.g. 2 or 2,4")
    sub.add_argument("--last-layer", dest="last_layer", choices=list(LAST_LAYER_MODES))
    sub.add_argument("--epsilon", type=float, help="loss margin")
    sub.add_argument("--slope", help="leaky slope: auto or a positive float")
    sub.add_argument("--lr", type=float, help="learning rate")
    sub.add_argument("--epochs", type=int, help="max training epochs per iteration")
    sub.add_argument("--initial-samples", dest="initial_samples", type=int)
    sub.add_argument("--max-iterations", dest="max_iterations", type=int)
    sub.add_argument("--cex-points", dest="cex_points", type=int,
                     help="random neighbors injected per counterexample")
    sub.add_argument("--solver", help="SMT solver executable (reads SMT-LIB2 on stdin)")
    sub.add_argument("--solver-timeout", dest="solver_timeout", type=float,
                     help="per-query time limit in seconds")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--emit-smt", dest="emit_smt", action="store_true", default=None,
                     help="write each query's SMT-LIB2 script to the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyasynth",
        description="Synthesize formally verified Lyapunov certificates.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="run synthesis")
    _add_target_flags(synth)
    _add_synth_flags(synth)
    synth.add_argument("--out", help="artifact output directory")
    synth.add_argument("--quiet", action="store_true", default=None)
    synth.set_defaults(func=cmd_synth)

    sweep = commands.add_parser("sweep", help="run a synthesis grid")
    _add_target_flags(sweep)
    _add_synth_flags(sweep)
    sweep.add_argument("--hidden-grid", dest="hidden_grid",
                       help="semicolon-separated hidden-width cells, e.g. '2;5;5,2'")
    sweep.add_argument("--gamma-grid", dest="gamma_grid",
                       help="comma-separated outer radii, e.g. '10,20,50'")
    sweep.add_argument("--out", help="CSV output path")
    sweep.set_defaults(func=cmd_sweep)

    levelsets = commands.add_parser("levelsets", help="export V/Vdot grid")
    _add_target_flags(levelsets)
    levelsets.add_argument("--certificate", required=True, help="certificate file")
    levelsets.add_argument("--resolution", type=int, help="grid points per axis")
    levelsets.add_argument("--bounds", help="xmin,xmax,ymin,ymax")
    levelsets.add_argument("--history", help="history.json to export counterexamples")
    levelsets.add_argument("--out", help="CSV output path")
    levelsets.set_defaults(func=cmd_levelsets)

    check = commands.add_parser("check", help="re-verify a stored certificate")
    _add_target_flags(check)
    check.add_argument("--certificate", required=True, help="certificate file")
    check.add_argument("--solver")
    check.add_argument("--solver-timeout", dest="solver_timeout", type=float)
    check.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        ParseError,
        SystemFormatError,
        EquilibriumError,
        OSError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

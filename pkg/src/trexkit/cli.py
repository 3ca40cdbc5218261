"""Command-line interface.

Exit codes:
    0  success
    1  unexpected internal error
    2  invalid arguments (bad flag values such as phi <= 0 or q outside [0, 1])
    3  input file missing or unreadable
    4  input file malformed (CSV that does not parse)
    5  data rejected (dimension mismatch, zero columns, n < p, singular Gram)
    6  solver failure (no subproblem reached optimality)
    7  invalid simulation config (message names the field)
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, conic
from .io import CsvFormatError, read_csv_matrix, read_csv_vector, write_csv, write_json
from .knockoff import (DEFAULT_PHI_GRID, bhq_select, compute_statistic, construct_knockoffs,
                       knockoff_threshold)
from .qtrex import QtrexParams, qtrex_multistart
from .simlab import SimConfig, SimConfigError, run_fdr_experiment, run_heuristic_study
from .trex import CtrexFailure, RegressionProblem, TrexParams, ctrex, ctrex_path, topology_report

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_DATA, EXIT_SOLVER, EXIT_CONFIG = range(8)
STATS = {"fvalue": "f_value", "phipath": "phi_path", "lasso": "lasso_signed_max", "bhq": "bhq"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("grid values must be positive")
    return sorted(set(values), reverse=True)


def _load_problem(x_path: str, y_path: str) -> RegressionProblem:
    for path in (x_path, y_path):
        if not Path(path).is_file():
            raise CliError(EXIT_IO, f"cannot read input file: {path}")
    try:
        X, _ = read_csv_matrix(x_path)
        Y = read_csv_vector(y_path)
    except CsvFormatError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read input: {exc}") from None
    try:
        return RegressionProblem(X, Y)
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None


def _settings(args) -> conic.SolverSettings:
    return conic.SolverSettings(tolerance=args.tolerance, max_iterations=args.max_iterations)


def _echo(args, keys: Sequence[str]) -> dict[str, Any]:
    return {"command": args.command, "version": __version__,
            **{k: getattr(args, k) for k in keys}}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_trex_solve(args) -> int:
    problem = _load_problem(args.x, args.y)
    sol = ctrex(problem, TrexParams(phi=args.phi), parallelism=args.parallelism, settings=_settings(args))
    topo = topology_report(sol, bins=args.bins)
    out = _out_dir(args)
    write_json(out / "trex_solution.json",
               {"config": _echo(args, ["x", "y", "phi", "tolerance", "max_iterations", "bins"]),
                "solution": sol.to_dict(include_betas=args.include_betas),
                "failed": [list(f) for f in topo.failed]})
    write_csv(out / "topology.csv", ["feature", "best_value", "importance", "rank"], topo.rows())
    write_csv(out / "topology_histogram.csv", ["bin_left", "bin_right", "count"],
              zip(topo.bin_edges[:-1], topo.bin_edges[1:], topo.bin_counts))
    return EXIT_OK


def cmd_trex_path(args) -> int:
    problem = _load_problem(args.x, args.y)
    path = ctrex_path(problem, args.phi_grid, settings=_settings(args), parallelism=args.parallelism)
    out = _out_dir(args)
    write_json(out / "trex_path.json",
               {"config": _echo(args, ["x", "y", "phi_grid", "tolerance", "max_iterations"]),
                "path": path.to_dict()})
    write_csv(out / "entry_values.csv", ["feature", "entry_phi"], enumerate(path.entry_values))
    return EXIT_OK


def cmd_trex_heuristic(args) -> int:
    problem = _load_problem(args.x, args.y)
    params = QtrexParams(q_exponent=args.q_exponent, phi=args.phi, n_starts=args.n_starts, seed=args.seed)
    res = qtrex_multistart(problem, params, parallelism=args.parallelism)
    out = _out_dir(args)
    write_json(out / "qtrex_result.json",
               {"config": _echo(args, ["x", "y", "phi", "q_exponent", "n_starts", "seed"]),
                "result": res.to_dict()})
    res.write_traces(out / "qtrex_starts.csv")
    return EXIT_OK


def cmd_knockoff(args) -> int:
    problem = _load_problem(args.x, args.y)
    stat = STATS[args.stat]
    out = _out_dir(args)
    echo = _echo(args, ["x", "y", "stat", "q", "seed", "phi", "tolerance", "max_iterations"])
    if stat == "bhq":
        try:
            sel = bhq_select(problem.X, problem.Y, args.q)
        except ValueError as exc:
            raise CliError(EXIT_DATA, str(exc)) from None
        write_json(out / "knockoff_selection.json", {"config": echo, "selection": sel.to_dict()})
        return EXIT_OK
    try:
        aug = construct_knockoffs(problem.X, problem.Y, seed=args.seed)
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    kwargs: dict[str, Any] = {}
    if stat == "f_value":
        kwargs = {"phi": args.phi, "settings": _settings(args), "parallelism": args.parallelism}
    elif stat == "phi_path":
        kwargs = {"phi_grid": args.phi_grid, "heuristic_params": QtrexParams(seed=args.seed)}
    W = compute_statistic(aug, stat, **kwargs)
    sel = knockoff_threshold(W.W, args.q, variant=stat)
    aug_info = {k: v for k, v in aug.to_dict().items() if k != "X_tilde"}
    write_json(out / "knockoff_selection.json",
               {"config": echo, "augmentation": aug_info, "statistics": W.to_dict(),
                "selection": sel.to_dict()})
    W.write_csv(out / "knockoff_W.csv")
    return EXIT_OK


def _load_config(path: str) -> SimConfig:
    if not Path(path).is_file():
        raise CliError(EXIT_IO, f"cannot read config file: {path}")
    try:
        return SimConfig.load(path)
    except SimConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {path}: {exc}") from None


def cmd_sim(args) -> int:
    config = _load_config(args.config)
    run = run_fdr_experiment if args.command == "sim-fdr" else run_heuristic_study
    try:
        report = run(config, parallelism=args.parallelism)
    except SimConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {args.config}: {exc}") from None
    report.write(_out_dir(args))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trexkit", description="Exact and heuristic TREX regression, "
                                     "knockoff variable selection, and simulation harnesses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, solver=True):
        if data:
            p.add_argument("x", help="design matrix CSV (rows = observations)")
            p.add_argument("y", help="response CSV (one column)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--parallelism", type=int, default=1, help="worker threads (output is unaffected)")
        if solver:
            p.add_argument("--tolerance", type=_positive, default=1e-8, help="conic solver tolerance")
            p.add_argument("--max-iterations", type=int, default=100_000)

    p = sub.add_parser("trex-solve", help="global TREX minimiser and subproblem topology")
    common(p)
    p.add_argument("--phi", type=_positive, default=0.5)
    p.add_argument("--bins", type=int, default=20, help="histogram bins for the topology CSV")
    p.add_argument("--include-betas", action="store_true", help="store every subproblem estimate")
    p.set_defaults(func=cmd_trex_solve)

    p = sub.add_parser("trex-path", help="global TREX estimates along a decreasing phi grid")
    common(p)
    p.add_argument("--phi-grid", type=_grid, default=DEFAULT_PHI_GRID.tolist(),
                   help="comma-separated phi values (default 1.5, 1.45, ..., 0.1)")
    p.set_defaults(func=cmd_trex_path)

    p = sub.add_parser("trex-heuristic", help="q-TREX from the zero start plus random restarts")
    common(p, solver=False)
    p.add_argument("--phi", type=_positive, default=0.5)
    p.add_argument("--q-exponent", type=int, default=40)
    p.add_argument("--n-starts", type=int, default=21)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_trex_heuristic)

    p = sub.add_parser("knockoff", help="knockoff filter (or BHq) variable selection")
    common(p)
    p.add_argument("--stat", choices=sorted(STATS), default="fvalue")
    p.add_argument("--q", type=_unit_interval, default=0.1, help="target FDR in [0, 1]")
    p.add_argument("--phi", type=_positive, default=0.5, help="phi for the fvalue statistic")
    p.add_argument("--phi-grid", type=_grid, default=DEFAULT_PHI_GRID.tolist(),
                   help="phi grid for the phipath statistic")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_knockoff)

    for name, helptext in (("sim-fdr", "knockoff FDR experiment"),
                           ("sim-heuristic", "q-TREX success-probability study")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON or TOML config file")
        common(p, data=False, solver=False)
        p.set_defaults(func=cmd_sim)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CtrexFailure as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

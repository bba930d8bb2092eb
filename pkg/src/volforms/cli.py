"""Command-line entry point.

    volforms solve --config run.ini --out runs/a
    volforms check cat0 --lambdas 0,0.25,0.5,0.75,1 --out runs/b
    volforms distance 0 0.5 --eps 0.25

Exit status: 0 success, 1 numerical failure or failed check, 2 bad
configuration or usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import RunConfig, field_from_spec, load_config
from .errors import ConfigurationError, DomainError, SolverError
from .fieldio import write_field, write_table
from .geometry import distance, energy_elements
from .grid import BoundaryPair
from .solver import solve_geodesic
from .suites import SUITES, SuiteParams, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SUITE_NAMES = tuple(SUITES) + ("all",)

log = logging.getLogger("volforms")


def _g(x) -> str:
    return f"{x:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def _parse_lambdas(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("lambdas must be a comma list of values in [0, 1]")
    return vals


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--eps", type=_positive_float, help="perturbation parameter epsilon")
    common.add_argument("--samples", type=_positive_int, help="sample count (concavity)")
    common.add_argument("--lambdas", type=_parse_lambdas, help="comma list in [0, 1]")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="volforms",
        description="Geodesics in the space of volume forms on the flat torus.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve for the eps-geodesic")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", parents=[common], help="run a named check suite")
    p.add_argument("suite_name", nargs="?", metavar="SUITE",
                   help=f"one of {', '.join(SUITE_NAMES)}")
    p.add_argument("--suite", dest="suite_flag", metavar="NAME")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("distance", parents=[common],
                       help="eps-distance between two points",
                       description="A point is a number (constant field), a field file, "
                                   "or trig modes such as '1 0.01 0; 2 0.002 1.5'.")
    p.add_argument("point_a")
    p.add_argument("point_b")
    p.add_argument("--extrapolate", action="store_true",
                   help="also print d at eps, eps/2, eps/4 and a Richardson estimate")
    p.set_defaults(func=cmd_distance)
    return parser


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.samples = args.samples
    if args.lambdas is not None:
        cfg.lambdas = args.lambdas
    return cfg


def _out_dir(args, cfg, default: str) -> Path:
    out = args.out or (Path(cfg.output) if cfg.output else Path(default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, cfg: RunConfig, argv):
    """Verbatim config plus the command line: enough to rerun."""
    (out / "config.ini").write_text(cfg.text)
    _dump_json(out / "invocation.json", {"argv": list(argv), "seed": cfg.seed,
                                         "samples": cfg.samples, "lambdas": cfg.lambdas})


def cmd_solve(args, argv) -> int:
    cfg = _run_config(args)
    eps = args.eps if args.eps is not None else cfg.solver.epsilon
    boundary = cfg.boundary_pair()
    out = _out_dir(args, cfg, "run")
    _echo_config(out, cfg, argv)
    grid = cfg.grid
    t0 = time.perf_counter()
    try:
        rep = solve_geodesic(boundary, eps, cfg.solver)
    except SolverError as exc:
        _dump_json(out / "report.json", {"converged": False, "error": str(exc),
                                         "epsilon": eps, "residual_history": exc.history,
                                         "last_good_s": getattr(exc, "last_good_s", None)})
        (out / "summary.txt").write_text(f"FAILED  {exc}\n")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.perf_counter() - t0
    d = distance(rep.phi, grid)
    report = rep.to_dict()
    report.update(distance=d, elapsed_seconds=elapsed,
                  grid={"dim": grid.dim, "n": grid.n, "nt": grid.nt})
    write_field(out / "phi.f64", rep.phi, grid)
    _dump_json(out / "report.json", report)
    e = energy_elements(rep.phi, grid)
    write_table(out / "energy.csv", ["j", "t", "energy_element"],
                [(j, float(grid.t[j]), float(e[j])) for j in range(grid.nt)])
    lines = [f"epsilon         {_g(eps)}",
             f"residual_sup    {_g(rep.residual_sup)}",
             f"min_margin      {_g(rep.margins.min())}",
             f"distance        {_g(d)}",
             f"newton_iters    {sum(rep.newton_iters)}",
             f"s_steps         {len(rep.s_trace) - 1}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _suite_params(cfg: RunConfig, args) -> SuiteParams:
    return SuiteParams(grid=cfg.grid, solver=cfg.solver, seed=cfg.seed, samples=cfg.samples,
                       lambdas=tuple(cfg.lambdas),
                       eps=args.eps if args.eps is not None else cfg.eps,
                       pairs=cfg.pairs, triples=cfg.triples, families=cfg.families,
                       c_slack=cfg.c_slack)


def cmd_check(args, argv) -> int:
    name = args.suite_flag or args.suite_name
    if args.suite_flag and args.suite_name and args.suite_flag != args.suite_name:
        raise ConfigurationError("suite given twice with different names")
    cfg = _run_config(args)
    name = name or cfg.suite
    if name is None:
        raise ConfigurationError(f"no suite given; choose from {', '.join(SUITE_NAMES)}")
    if name not in SUITE_NAMES:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}")
    out = _out_dir(args, cfg, "check")
    _echo_config(out, cfg, argv)
    try:
        reports = run_suite(name, _suite_params(cfg, args))
    except SolverError as exc:
        _dump_json(out / "check.json", [{"name": name, "passed": False, "error": str(exc)}])
        (out / "summary.txt").write_text(f"FAIL  {name}  solver failure: {exc}\n")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _dump_json(out / "check.json", [r.to_dict() for r in reports])
    lines = []
    for r in reports:
        line = r.line()
        if "min_c_slack" in r.details:
            line += f" min_c_slack={_g(r.details['min_c_slack'])}"
        lines.append(line)
    failed = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - failed}/{len(reports)} passed")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_distance(args, argv) -> int:
    cfg = _run_config(args)
    eps = args.eps if args.eps is not None else cfg.solver.epsilon
    grid = cfg.grid
    a = field_from_spec(args.point_a, grid)
    b = field_from_spec(args.point_b, grid)
    boundary = BoundaryPair(a, b, grid, cfg.boundary.margin)
    rep = solve_geodesic(boundary, eps, cfg.solver)
    d = distance(rep.phi, grid)
    print(f"distance {_g(d)}")
    print(f"epsilon  {_g(eps)}")
    if args.extrapolate:
        rows = [(eps, d)]
        for k in (1, 2):
            e_k = eps / 2**k
            rep = solve_geodesic(boundary, e_k, cfg.solver, init=rep.phi, init_boundary=boundary)
            rows.append((e_k, distance(rep.phi, grid)))
        print("epsilon,distance")
        for e_k, d_k in rows:
            print(f"{_g(e_k)},{_g(d_k)}")
        # linear-in-eps error model on the two smallest values
        print(f"extrapolated,{_g(2 * rows[-1][1] - rows[-2][1])}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2 already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

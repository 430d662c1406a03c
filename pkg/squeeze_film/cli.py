"""
Command line entry point: simulate, steady, pullin and verify.
"""
import argparse
import asyncio
import logging
from pathlib import Path
import sys

import numpy as np

from .const import (
    CONF_SEED,
    DOMAIN,
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_OK,
    SUITE_ALL,
    SUITES,
)
from .diagnostics import (
    RunManifest,
    field_difference,
    package_version,
    run_directory,
    sweep_csv,
    sweep_to_csv,
    write_json,
)
from .errors import ConfigurationError, QuenchImminentError, SolverError
from .grid import build_grid
from .helpers.config import SolverConfig
from .helpers.log import log_json
from .helpers.scenario_config import available_scenarios, get_scenario
from .oracle import QuenchEvent, mol_solve, quench_scan
from .parabolic import gamma_fixed_point
from .steady import (
    DEFAULT_MAX_NEWTON,
    async_sweep_steady,
    parse_sweep,
    pullin_threshold,
    steady_membrane,
)
from .verify import run_suite

_LOGGER = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(
        prog=DOMAIN, description="Coupled squeeze film simulator and checks."
    )
    parser.add_argument("--version", action="version", version=package_version())
    parser.add_argument(
        "--workers", type=int, default=None, help="Worker threads for sweeps."
    )
    parser.add_argument("--seed", type=int, default=None, help="Override run.seed.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run both solvers on a config.")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="key=value or YAML config file.")
    source.add_argument(
        "--scenario", help=f"Bundled scenario: {', '.join(available_scenarios())}."
    )
    simulate.add_argument("--out", help="Output directory.")
    simulate.set_defaults(handler=cmd_simulate)

    steady = commands.add_parser("steady", help="Steady membrane deflection.")
    load = steady.add_mutually_exclusive_group(required=True)
    load.add_argument("--beta-f", type=float, help="Single load β_F.")
    load.add_argument("--sweep", help="Loads LO:HI:N, written as CSV.")
    steady.add_argument("--config", help="Grid and tolerances from a config file.")
    steady.add_argument("--out", help="CSV file (default stdout).")
    steady.add_argument(
        "--max-newton",
        type=int,
        default=DEFAULT_MAX_NEWTON,
        help="Newton iteration cap per load.",
    )
    steady.set_defaults(handler=cmd_steady)

    pullin = commands.add_parser("pullin", help="Bisect the pull-in threshold.")
    pullin.add_argument("--tol", type=float, default=1e-3, help="Bracket width.")
    pullin.add_argument("--length", type=float, default=1.0, help="Domain length L.")
    pullin.add_argument("--n-nodes", type=int, default=63, help="Interior nodes.")
    pullin.set_defaults(handler=cmd_pullin)

    verify = commands.add_parser("verify", help="Run a verification suite.")
    verify.add_argument(
        "--suite", required=True, help=f"One of {', '.join([*SUITES, SUITE_ALL])}."
    )
    verify.add_argument("--config", help="Base config (defaults otherwise).")
    verify.add_argument("--out", help="JSON report file.")
    verify.set_defaults(handler=cmd_verify)
    return parser


def _load_config(args, path=None, scenario=None):
    if scenario is not None:
        cfg = get_scenario(scenario)
        if cfg is None:
            raise ConfigurationError(f"no bundled scenario {scenario!r}", "scenario")
    elif path is not None:
        cfg = SolverConfig.load(path)
    else:
        cfg = SolverConfig()
    if args.seed is not None:
        cfg = cfg.replace({CONF_SEED: args.seed})
    return cfg


def _run_solvers(cfg, manifest, diagnostics):
    """Oracle then Γ iteration; fills diagnostics and returns the first quench."""
    oracle = mol_solve(cfg)
    manifest.write_paths("oracle", oracle)
    diagnostics["oracle"] = oracle.as_dict()
    quench = oracle.quench
    try:
        solution = gamma_fixed_point(cfg)
    except QuenchImminentError as e:
        _LOGGER.info("Γ iteration stopped by quench: %s", e)
        diagnostics["gamma_quench"] = {"message": str(e), "node": e.node, "gap": e.gap}
        if e.time is not None:
            quench = quench or QuenchEvent(float(e.time), int(e.node), float(e.gap))
    else:
        paths = (solution.u_path, solution.v_path, solution.w_path)
        manifest.write_paths("gamma", paths)
        diagnostics["gamma"] = solution.as_dict()
        diagnostics["difference"] = {
            name: field_difference(a, b)
            for name, a, b in zip("uvw", paths, oracle)
        }
        diagnostics["max_u_deviation"] = float(
            np.max(np.abs(solution.u_path.values - cfg.theta1))
        )
        quench = quench or quench_scan(solution.w_path, cfg.quench_threshold)
    diagnostics["quench"] = quench.as_dict() if quench else None
    return quench


def cmd_simulate(args):
    """Run the Γ iteration and the oracle, writing both and their difference."""
    cfg = _load_config(args, args.config, args.scenario)
    manifest = RunManifest(run_directory(cfg, args.out), cfg)
    _LOGGER.info("Simulating %s into %s", cfg, manifest.directory)
    manifest.path("config.txt").write_text(cfg.emit(), encoding="utf-8")

    diagnostics = {"oracle": None, "gamma": None, "difference": None, "quench": None}
    try:
        quench = _run_solvers(cfg, manifest, diagnostics)
    except SolverError as e:
        _LOGGER.error("Simulation failed: %s", e)
        diagnostics["failure"] = {
            "error": type(e).__name__,
            "message": str(e),
            "ratios": list(getattr(e, "ratios", None) or []),
        }
        return EXIT_FAILURE
    finally:
        _LOGGER.debug("Diagnostics %s", log_json(diagnostics))
        write_json(diagnostics, manifest.path("diagnostics.json"))
        manifest.summarize(
            quench=diagnostics["quench"],
            difference=diagnostics["difference"],
            max_u_deviation=diagnostics.get("max_u_deviation"),
            failure=diagnostics.get("failure"),
        )
        manifest.write()

    if quench:
        print(f"quench at t={quench.time:.6g} node {quench.node_index}")
    if diagnostics["difference"]:
        for name, value in diagnostics["difference"].items():
            print(f"{name}: gamma/oracle difference {value:.3e}")
    print(f"wrote {manifest.directory}")
    return EXIT_OK


def cmd_steady(args):
    cfg = _load_config(args, args.config)
    grid = cfg.grid
    tol, cap = cfg.newton_tol, args.max_newton
    if args.sweep is None:
        results = [steady_membrane(args.beta_f, grid, tol, cap)]
    else:
        betas = parse_sweep(args.sweep)
        results = asyncio.run(async_sweep_steady(betas, grid, tol, cap, args.workers))
    if args.out:
        sweep_to_csv(results, args.out)
    else:
        print(sweep_csv(results), end="")
    return EXIT_OK


def cmd_pullin(args):
    grid = build_grid(args.length, args.n_nodes)
    result = pullin_threshold(grid, bracket_tol=args.tol)
    lo, hi = result.bracket
    print(f"beta_F* ≈ {result.estimate:.9g}")
    print(f"bracket [{lo:.9g}, {hi:.9g}]")
    print(f"upper bound 4(π/L)²/27 = {result.upper_bound:.9g}")
    return EXIT_OK


def cmd_verify(args):
    cfg = _load_config(args, args.config)
    report = run_suite(args.suite, cfg, args.workers)
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, 0 for --help and --version.
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.workers is not None and args.workers < 1:
        _LOGGER.error("--workers must be at least 1")
        return EXIT_CONFIG
    try:
        return args.handler(args)
    except ConfigurationError as e:
        _LOGGER.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except SolverError as e:
        _LOGGER.error("Solver failed: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

"""
Command handlers for the lab CLI.

Handles all subcommands:
- barenblatt - Profile constants and closed-form tables
- correction - Correction ODE table, phase-plane and decay reports
- simulate   - Full solver run with summary, snapshots and report
- refine     - Grid refinement study (Richardson orders)
- sweep      - (gamma, lambda, mu) parameter sweep
- rates      - Re-fit a power law from a stored CSV
- hardy      - Standalone Hardy-ratio study

Each handler takes the parsed arguments and returns a process exit code.
"""

import argparse
import logging
from typing import Callable, Dict

from config import settings
from models.config import RunConfig, load_run_config
from services.experiments import ExperimentRunner

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]


def _runner(args: argparse.Namespace) -> ExperimentRunner:
    config: RunConfig = load_run_config(args.config, args.override or ())
    return ExperimentRunner(config, args.out)


# ============== barenblatt ==============

def cmd_barenblatt(args: argparse.Namespace) -> int:
    """
    Emit the Barenblatt constants and (x, rho_bar, u_bar) tables.

    Returns:
        int: 0 on success
    """
    result = _runner(args).barenblatt()
    profile = result["profile"]
    logger.info(f"A={profile['A']:.10g} B={profile['B']:.10g} L={profile['L']:.10g}")
    return 0


# ============== correction ==============

def cmd_correction(args: argparse.Namespace) -> int:
    """Integrate the correction ODE and emit its table and reports."""
    result = _runner(args).correction()
    phase = result["report"]["phase_plane"]
    if "error" in phase:
        logger.warning(f"Phase plane: {phase['error']}")
    logger.info(f"Envelope constant K = {result['decay'].K:.8g}")
    return 0


# ============== simulate ==============

def cmd_simulate(args: argparse.Namespace) -> int:
    """
    Run the solver and write summary.csv, series.csv, snapshots and report.json.

    Returns:
        int: 0 when the run completes, 3 when it ends in map degeneracy
    """
    result = _runner(args).simulate()
    outcome = result.outcome
    if not outcome.completed:
        logger.warning(f"Run ended at t={outcome.t_final:g}: {outcome.message}")
        return outcome.exit_code

    if result.rate_report is not None:
        for row in result.rate_report.rows:
            fitted = "n/a" if row.fitted is None else f"{row.fitted:+.4f}"
            logger.info(f"{row.quantity:<18} fitted {fitted} predicted {row.predicted:+.4f} passed={row.passed}")
    if result.energy_decay is not None:
        logger.info(f"Boundedness rows passed: {result.energy_decay.passed}")
    return 0


# ============== refine ==============

def cmd_refine(args: argparse.Namespace) -> int:
    """Richardson refinement study on w(., t_probe)."""
    report = _runner(args).refine(args.n)
    for row in report.rows:
        logger.info(f"n={row.n_coarse}/{row.n_mid}/{row.n_fine}: observed order {row.observed_order:.3f}")
    if report.passed:
        logger.info(f"Finest triplet order {report.asymptotic_order:.3f} meets target {report.order_target:g}")
    else:
        logger.warning(
            f"Refinement below target: finest triplet order {report.asymptotic_order:.3f}, "
            f"target {report.order_target:g}, monotone={report.monotone}"
        )
    return 0


# ============== sweep ==============

def cmd_sweep(args: argparse.Namespace) -> int:
    """Parameter sweep; cell failures are recorded in sweep.csv, not raised."""
    runner = _runner(args)
    params = runner.config.params
    rows = runner.sweep(
        gammas=args.gamma or [params.gamma],
        lams=args.lam or [params.lam],
        mus=args.mu or [params.mu],
        workers=args.workers,
    )
    failed = [row for row in rows if row.exit_code != 0]
    for row in failed:
        logger.warning(f"cell {row.index}: exit {row.exit_code} ({row.error})")
    return 0


# ============== rates ==============

def cmd_rates(args: argparse.Namespace) -> int:
    """Fit one column of a stored CSV against a power law."""
    fit = _runner(args).rates(
        args.csv,
        args.column,
        window=tuple(args.window) if args.window else None,
        p_theory=args.theory,
        log_correction=True if args.log else None,
    )
    deviation = "" if fit.deviation is None else f", |p - p_theory| = {fit.deviation:.3e}"
    logger.info(f"{fit.quantity}: exponent {fit.exponent:+.6f} (R^2 = {fit.r_squared:.6f}{deviation})")
    return 0


# ============== hardy ==============

def cmd_hardy(args: argparse.Namespace) -> int:
    """Hardy ratios across grids for F = 1 and F = cos(pi x / 2L)."""
    result = _runner(args).hardy(args.n, args.theta)
    for key, variation in sorted(result["variation"].items()):
        logger.info(f"{key}: variation across grids {variation:.2%}")
    return 0


# ============== Setup Function ==============

COMMANDS: Dict[str, Handler] = {
    "barenblatt": cmd_barenblatt,
    "correction": cmd_correction,
    "simulate": cmd_simulate,
    "refine": cmd_refine,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "hardy": cmd_hardy,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="Run configuration file (sectioned key = value)")
    parser.add_argument("--out", metavar="DIR", help=f"Output directory (default: {settings.output_dir})")
    parser.add_argument(
        "--override",
        metavar="SECTION.KEY=VALUE",
        action="append",
        default=[],
        help="Override a config entry; repeatable",
    )


def setup_command_handlers(parser: argparse.ArgumentParser) -> None:
    """
    Register all subcommands on the parser.

    Args:
        parser: Top-level argument parser
    """
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in ("barenblatt", "correction", "simulate"):
        sub = subparsers.add_parser(name, help=COMMANDS[name].__doc__.strip().splitlines()[0])
        _add_common(sub)
        sub.set_defaults(handler=COMMANDS[name])

    refine = subparsers.add_parser("refine", help="Grid refinement study")
    _add_common(refine)
    refine.add_argument("--n", type=int, nargs="+", help="Cell counts (default: [grid] n_list)")
    refine.set_defaults(handler=cmd_refine)

    sweep = subparsers.add_parser("sweep", help="(gamma, lambda, mu) sweep")
    _add_common(sweep)
    sweep.add_argument("--gamma", type=float, nargs="+")
    sweep.add_argument("--lam", type=float, nargs="+")
    sweep.add_argument("--mu", type=float, nargs="+")
    sweep.add_argument("--workers", type=int, default=None, help="Worker processes (default: settings)")
    sweep.set_defaults(handler=cmd_sweep)

    rates = subparsers.add_parser("rates", help="Re-fit a power law from a CSV")
    _add_common(rates)
    rates.add_argument("--csv", required=True, metavar="PATH")
    rates.add_argument("--column", default="x_plus")
    rates.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    rates.add_argument("--theory", type=float, default=None)
    rates.add_argument("--log", action="store_true", help="Fit with the ln(1+t) correction")
    rates.set_defaults(handler=cmd_rates)

    hardy = subparsers.add_parser("hardy", help="Hardy-ratio refinement study")
    _add_common(hardy)
    hardy.add_argument("--n", type=int, nargs="+")
    hardy.add_argument("--theta", type=float, nargs="+")
    hardy.set_defaults(handler=cmd_hardy)

    logger.debug("Command handlers registered")

"""
Vacuum Lab - Main Entry Point

Command-line entry point for the damped physical-vacuum gas dynamics lab.

Features:
- Modified Barenblatt profiles and their closed-form diagnostics
- Correction ODE integration with phase-plane and decay-envelope reports
- Lagrangian free-boundary solver for small perturbations of the Barenblatt flow
- Weighted energies, sup norms and Hardy ratios
- Power-law rate fits, refinement studies and parameter sweeps

Usage:
    python main.py simulate --config run.ini --out runs/demo
    python main.py correction --override params.lambda=1 --override params.mu=3

Exit codes:
    0 success, 1 analysis failure, 2 validation error, 3 map degeneracy, 4 IO error

Environment variables (prefix VACUUM_) are listed in config.py.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from config import settings
from errors import VacuumLabError
from handlers import setup_command_handlers
from utils.logger import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vacuum-lab",
        description="Damped compressible Euler flows with physical vacuum: simulation and verification",
    )
    setup_command_handlers(parser)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the chosen subcommand and map errors to exit codes.

    Args:
        argv: Argument list (defaults to sys.argv[1:])

    Returns:
        int: Process exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging(log_to_file=settings.log_to_file)

    logger.info("=" * 60)
    logger.info(f"Vacuum Lab: {args.command}")
    logger.info("=" * 60)
    logger.info(f"Environment: {settings.app_env}")
    logger.info(f"Log Level: {settings.log_level}")
    logger.info(f"Output Dir: {args.out or settings.output_dir}")
    logger.info(f"ODE tolerances: rtol={settings.ode_rtol:g} atol={settings.ode_atol:g}")
    logger.info("=" * 60)

    try:
        code = args.handler(args)
    except KeyboardInterrupt:
        logger.info("=" * 60)
        logger.info("Stopped by user (Ctrl+C)")
        logger.info("=" * 60)
        return 130
    except VacuumLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return 1

    logger.info(f"Finished {args.command} with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""
Handlers package for the command-line interface.

This package provides:
- One handler per subcommand (barenblatt, correction, simulate, refine, sweep, rates, hardy)
- Parser registration
"""

from handlers.command_handler import (
    cmd_barenblatt,
    cmd_correction,
    cmd_hardy,
    cmd_rates,
    cmd_refine,
    cmd_simulate,
    cmd_sweep,
    setup_command_handlers,
)

__all__ = [
    "cmd_barenblatt",
    "cmd_correction",
    "cmd_hardy",
    "cmd_rates",
    "cmd_refine",
    "cmd_simulate",
    "cmd_sweep",
    "setup_command_handlers",
]

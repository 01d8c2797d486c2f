"""Command-line entry point: mfg-exit {solve,oracle,verify,compare,gradcheck}."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from mfg_exit.commands.common import CommandOptions, parse_resolution
from mfg_exit.commands.compare import cmd_compare
from mfg_exit.commands.gradcheck import cmd_gradcheck
from mfg_exit.commands.oracle import cmd_oracle
from mfg_exit.commands.solve import cmd_solve
from mfg_exit.commands.verify import cmd_verify
from mfg_exit.config import ExitCode, settings
from mfg_exit.errors import ConfigurationError, DomainError, EvaluationError, SolverError
from mfg_exit.models import RunConfig
from mfg_exit.utils.io import load_run_config

logger = logging.getLogger(__name__)

Command = Callable[[RunConfig, CommandOptions], ExitCode]

COMMANDS: dict[str, Command] = {
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfg-exit", description="Stationary first-order MFG with exits")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run config path, or a name under configs/")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        p.add_argument("--n", type=parse_resolution, default=None, help="cells per axis, e.g. 200 or 48,48")
        p.add_argument("--strict", action="store_true", help="exit 3 when diagnostics fail")
        p.add_argument("--force", action="store_true", help="run despite assumption findings")
        p.add_argument("--seed", type=int, default=None)
        if name == "verify":
            p.add_argument("--fields", type=Path, default=None, help="directory holding u.csv and m.csv")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    opts = CommandOptions(
        out=args.out,
        n=args.n,
        strict=args.strict,
        force=args.force,
        seed=args.seed,
        fields=getattr(args, "fields", None),
    )
    try:
        config = load_run_config(args.config)
        return int(COMMANDS[args.command](config, opts))
    except (ConfigurationError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return int(ExitCode.CONFIG)
    except (SolverError, EvaluationError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return int(ExitCode.NOT_CONVERGED)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return int(ExitCode.CONFIG)


def main() -> None:
    logging.basicConfig(level=settings.log_level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    sys.exit(run())

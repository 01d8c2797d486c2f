"""Shared plumbing for the subcommands: overrides, grid, admission, output paths."""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from mfg_exit.grid import Grid, build_grid
from mfg_exit.models import RunConfig
from mfg_exit.problem import validate_spec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommandOptions:
    out: Optional[Path] = None
    n: Optional[list[int]] = None
    strict: bool = False
    force: bool = False
    seed: Optional[int] = None
    fields: Optional[Path] = None


def parse_resolution(text: str) -> list[int]:
    """'200' → [200], '48,48' → [48, 48]."""
    return [int(part) for part in text.split(",") if part.strip()]


def resolve_grid(config: RunConfig, opts: CommandOptions) -> Grid:
    grid = build_grid(config.problem.domain.extents, opts.n or config.n_cells)
    logger.info(f"grid: {grid.dim}D, cells {grid.n_cells}, h = {tuple(round(h, 6) for h in grid.h)}")
    return grid


def admit(config: RunConfig, opts: CommandOptions) -> bool:
    """False when validate_spec has findings and --force is not set."""
    findings = validate_spec(config.problem, seed=opts.seed if opts.seed is not None else config.seed)
    if not findings:
        return True
    for finding in findings:
        print(f"finding: {finding}", file=sys.stderr)
    if opts.force:
        logger.warning(f"running despite {len(findings)} finding(s) (--force)")
        return True
    return False


def output_dir(config: RunConfig, opts: CommandOptions) -> Path:
    out = opts.out or Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def seed_of(config: RunConfig, opts: CommandOptions) -> int:
    return opts.seed if opts.seed is not None else config.seed

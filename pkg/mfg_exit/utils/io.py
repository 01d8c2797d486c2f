"""Run-config loading and field/report emission."""

from __future__ import annotations

import csv
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel, ValidationError

from mfg_exit.errors import ConfigurationError
from mfg_exit.grid import CellField, CellVectorField, Field, Grid
from mfg_exit.models import RunConfig

logger = logging.getLogger(__name__)

CONFIGS_DIR = Path(__file__).parent.parent.parent / "configs"

PathLike = Union[str, Path]


def resolve_config(ref: PathLike) -> Path:
    """A filesystem path, or a name under configs/ (with or without suffix)."""
    path = Path(ref)
    if path.is_file():
        return path
    for candidate in (CONFIGS_DIR / path, CONFIGS_DIR / f"{path}.toml", CONFIGS_DIR / f"{path}.json"):
        if candidate.is_file():
            return candidate
    raise ConfigurationError(f"config '{ref}' not found (looked in {CONFIGS_DIR})")


def load_run_config(ref: PathLike) -> RunConfig:
    """Load a TOML or JSON run config."""
    path = resolve_config(ref)
    try:
        if path.suffix == ".json":
            raw = json.loads(path.read_text(encoding="utf-8"))
        else:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigurationError(f"cannot parse {path}: {e}") from e
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run config {path}:\n{e}") from e


def dump_run_config(config: RunConfig, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return out


def write_json(model: BaseModel, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"wrote {out}")
    return out


def _coordinate_header(dim: int) -> list[str]:
    return ["x", "y"][:dim]


def _write_rows(path: Path, header: list[str], rows: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows.tolist())
    logger.info(f"wrote {path} ({rows.shape[0]} rows)")
    return path


def write_field_csv(field: Union[Field, CellField], path: PathLike) -> Path:
    """x[,y],value per node (Field) or per centroid (CellField)."""
    grid = field.grid
    points = grid.node_coordinates() if isinstance(field, Field) else grid.cell_centroids()
    rows = np.column_stack([points.reshape(-1, grid.dim), field.flat])
    return _write_rows(Path(path), _coordinate_header(grid.dim) + ["value"], rows)


def write_flux_csv(flux: CellVectorField, path: PathLike) -> Path:
    """x[,y],value_x[,value_y] per centroid."""
    grid = flux.grid
    rows = np.column_stack([grid.cell_centroids().reshape(-1, grid.dim), flux.rows])
    header = _coordinate_header(grid.dim) + [f"value_{c}" for c in _coordinate_header(grid.dim)]
    return _write_rows(Path(path), header, rows)


def _read_values(path: Path, expected_points: np.ndarray) -> np.ndarray:
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[-1] != "value":
            raise ConfigurationError(f"{path}: expected a header ending in 'value'")
        table = np.array([[float(v) for v in row] for row in reader if row])
    dim = expected_points.shape[-1]
    if table.shape != (expected_points.reshape(-1, dim).shape[0], dim + 1):
        raise ConfigurationError(f"{path}: {table.shape[0]} rows do not match the grid")
    if not np.allclose(table[:, :dim], expected_points.reshape(-1, dim), atol=1e-9):
        raise ConfigurationError(f"{path}: coordinates do not match the grid")
    return table[:, dim]


def read_field_csv(path: PathLike, grid: Grid) -> Field:
    return Field(grid, _read_values(Path(path), grid.node_coordinates()))


def read_cell_csv(path: PathLike, grid: Grid) -> CellField:
    return CellField(grid, _read_values(Path(path), grid.cell_centroids()))

"""Uniform 1D/2D tensor grids, nodal and cell fields, boundary classification.

Node arrays use ij indexing (axis 0 = x) and are flattened in C order.
The discrete gradient is a sparse matrix D so that its adjoint is exactly D.T.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Any, Sequence, Union

import numpy as np
from scipy import sparse

from mfg_exit.config import FACE_AXES, FACES_BY_DIM
from mfg_exit.errors import ConfigurationError
from mfg_exit.models import BoundarySpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n_cells: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.n_cells)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / n for a, b, n in zip(self.lo, self.hi, self.n_cells))

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return self.n_cells

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def n_cells_total(self) -> int:
        return int(np.prod(self.cell_shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, n + 1) for a, b, n in zip(self.lo, self.hi, self.n_cells)]

    def node_coordinates(self) -> np.ndarray:
        """Shape node_shape + (dim,)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_centroids(self) -> np.ndarray:
        """Shape cell_shape + (dim,)."""
        mids = [0.5 * (x[1:] + x[:-1]) for x in self.axes()]
        return np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)


def build_grid(extents: Union[Sequence[float], Sequence[Sequence[float]]], n_cells: Union[int, Sequence[int]]) -> Grid:
    """Build a grid from (lo, hi) or [(x_lo, x_hi), (y_lo, y_hi)] and cells per axis."""
    ext = np.asarray(extents, dtype=float)
    if ext.ndim == 1:
        ext = ext.reshape(1, -1)
    if ext.ndim != 2 or ext.shape[1] != 2 or ext.shape[0] not in FACES_BY_DIM:
        raise ConfigurationError(f"extents must be one or two (lo, hi) pairs, got {np.asarray(extents).tolist()}")
    counts = [int(n_cells)] * ext.shape[0] if np.ndim(n_cells) == 0 else [int(n) for n in n_cells]
    if len(counts) == 1 and ext.shape[0] == 2:
        counts = counts * 2
    if len(counts) != ext.shape[0]:
        raise ConfigurationError(f"need {ext.shape[0]} cell counts, got {len(counts)}")
    if not np.all(np.isfinite(ext)) or np.any(ext[:, 1] <= ext[:, 0]):
        raise ConfigurationError(f"degenerate or unordered extents {ext.tolist()}")
    if any(n < 2 for n in counts):
        raise ConfigurationError(f"need at least 2 cells per axis, got {counts}")
    return Grid(lo=tuple(ext[:, 0].tolist()), hi=tuple(ext[:, 1].tolist()), n_cells=tuple(counts))


# --- Fields ---


def _check_shape(grid: Grid, values: np.ndarray, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == int(np.prod(shape)) and arr.shape != shape:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise ConfigurationError(f"{what} needs shape {shape}, got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """One scalar per node."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _check_shape(self.grid, self.values, self.grid.node_shape, "Field"))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


@dataclass(frozen=True, eq=False)
class CellField:
    """One scalar per cell."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _check_shape(self.grid, self.values, self.grid.cell_shape, "CellField"))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


@dataclass(frozen=True, eq=False)
class CellVectorField:
    """One dim-vector per cell."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        shape = self.grid.cell_shape + (self.grid.dim,)
        object.__setattr__(self, "values", _check_shape(self.grid, self.values, shape, "CellVectorField"))

    @property
    def rows(self) -> np.ndarray:
        """Shape (n_cells_total, dim)."""
        return self.values.reshape(-1, self.grid.dim)


def sample_nodes(grid: Grid, fn: Any) -> Field:
    """Field from a callable of points (..., dim)."""
    return Field(grid, np.asarray(fn(grid.node_coordinates()), dtype=float))


def sample_cells(grid: Grid, fn: Any) -> CellField:
    """CellField from a callable of points (..., dim) evaluated at centroids."""
    return CellField(grid, np.asarray(fn(grid.cell_centroids()), dtype=float))


# --- Discrete operators ---


@lru_cache(maxsize=32)
def gradient_operator(grid: Grid) -> sparse.csr_matrix:
    """Sparse D: nodal values → cell gradients, rows ordered (cell, component)."""
    if grid.dim == 1:
        n = grid.n_cells[0]
        (h,) = grid.h
        cells = np.arange(n)
        rows = np.concatenate([cells, cells])
        cols = np.concatenate([cells, cells + 1])
        data = np.concatenate([np.full(n, -1.0 / h), np.full(n, 1.0 / h)])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, grid.n_nodes))

    nx, ny = grid.n_cells
    hx, hy = grid.h
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cell = (i * ny + j).ravel()
    node = lambda a, b: (a * (ny + 1) + b).ravel()  # noqa: E731
    sw, se, nw, ne = node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)
    # bilinear interpolant gradient at the centroid: averaged edge differences
    rows_x, rows_y = 2 * cell, 2 * cell + 1
    rows = np.concatenate([rows_x] * 4 + [rows_y] * 4)
    cols = np.concatenate([sw, nw, se, ne, sw, se, nw, ne])
    cx, cy = 0.5 / hx, 0.5 / hy
    data = np.concatenate([np.full(cell.size, v) for v in (-cx, -cx, cx, cx, -cy, -cy, cy, cy)])
    return sparse.csr_matrix((data, (rows, cols)), shape=(2 * nx * ny, grid.n_nodes))


@lru_cache(maxsize=32)
def adjacency_operator(grid: Grid) -> sparse.csr_matrix:
    """Sparse node × cell incidence (1 where the node is a cell corner)."""
    if grid.dim == 1:
        n = grid.n_cells[0]
        cells = np.arange(n)
        rows = np.concatenate([cells, cells + 1])
        cols = np.concatenate([cells, cells])
    else:
        nx, ny = grid.n_cells
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        cell = (i * ny + j).ravel()
        corners = [((i + a) * (ny + 1) + (j + b)).ravel() for a in (0, 1) for b in (0, 1)]
        rows = np.concatenate(corners)
        cols = np.concatenate([cell] * 4)
    return sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(grid.n_nodes, grid.n_cells_total))


def cell_gradient(w: Field) -> CellVectorField:
    g = gradient_operator(w.grid) @ w.flat
    return CellVectorField(w.grid, g.reshape(w.grid.cell_shape + (w.grid.dim,)))


def nodal_average(f: CellField) -> Field:
    """Unweighted mean of the cells adjacent to each node."""
    A = adjacency_operator(f.grid)
    counts = np.asarray(A.sum(axis=1)).ravel()
    return Field(f.grid, (A @ f.flat) / counts)


def cell_average(w: Field) -> CellField:
    """Mean of the cell corners."""
    A = adjacency_operator(w.grid)
    return CellField(w.grid, (A.T @ w.flat) / 2**w.grid.dim)


def interior_integral(f: CellField) -> float:
    """One-point centroid quadrature."""
    return float(np.sum(f.values) * f.grid.cell_volume)


# --- Boundary ---


class NodeLabel(IntEnum):
    INTERIOR = 0
    NEUMANN = 1
    DIRICHLET = 2


@dataclass(frozen=True, eq=False)
class BoundarySegments:
    """Boundary edges (2D) or endpoints (1D), one row each."""
    face: np.ndarray  # face name per segment
    label: np.ndarray  # NodeLabel per segment
    nodes: np.ndarray  # (k, 2) endpoint node indices (repeated in 1D)
    cell: np.ndarray  # adjacent cell index
    normal: np.ndarray  # (k, dim) outward unit normal
    length: np.ndarray  # boundary measure (1 in 1D)


@dataclass(frozen=True, eq=False)
class BoundaryClass:
    grid: Grid
    labels: np.ndarray  # NodeLabel per node (flat)
    normals: np.ndarray  # (n_nodes, dim), zero at interior nodes
    neumann_weights: np.ndarray  # trapezoid weights of the Neumann measure per node
    dirichlet_weights: np.ndarray
    segments: BoundarySegments

    def nodes(self, label: NodeLabel) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    @property
    def neumann_nodes(self) -> np.ndarray:
        return self.nodes(NodeLabel.NEUMANN)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return self.nodes(NodeLabel.DIRICHLET)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes(NodeLabel.INTERIOR)

    def weights(self, label: NodeLabel) -> np.ndarray:
        if label == NodeLabel.NEUMANN:
            return self.neumann_weights
        if label == NodeLabel.DIRICHLET:
            return self.dirichlet_weights
        raise ValueError("interior nodes carry no boundary measure")


def _face_segments(grid: Grid, face: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(nodes (k,2), cells (k,), normal (dim,), length) along one face."""
    axis, side = FACE_AXES[face]
    normal = np.zeros(grid.dim)
    normal[axis] = 1.0 if side else -1.0
    if grid.dim == 1:
        n = grid.n_cells[0]
        node = n if side else 0
        cell = n - 1 if side else 0
        return np.array([[node, node]]), np.array([cell]), normal, 1.0

    nx, ny = grid.n_cells
    hx, hy = grid.h
    if axis == 0:
        i_node = nx if side else 0
        i_cell = nx - 1 if side else 0
        j = np.arange(ny)
        nodes = np.stack([i_node * (ny + 1) + j, i_node * (ny + 1) + j + 1], axis=1)
        cells = i_cell * ny + j
        return nodes, cells, normal, hy
    j_node = ny if side else 0
    j_cell = ny - 1 if side else 0
    i = np.arange(nx)
    nodes = np.stack([i * (ny + 1) + j_node, (i + 1) * (ny + 1) + j_node], axis=1)
    cells = i * ny + j_cell
    return nodes, cells, normal, hx


def classify_boundary(grid: Grid, boundary: BoundarySpec) -> BoundaryClass:
    """Label boundary nodes; junction corners between Γ_D and Γ_N go to Dirichlet."""
    faces = FACES_BY_DIM[grid.dim]
    partition = boundary.partition
    extra = [f for f in partition if f not in faces]
    if extra:
        raise ConfigurationError(f"faces {extra} do not exist in {grid.dim}D")
    missing = [f for f in faces if f not in partition]
    if missing:
        raise ConfigurationError(f"unlabeled faces: {missing}")
    kinds = set(partition.values())
    if "neumann" not in kinds:
        raise ConfigurationError("Γ_N is empty: at least one face must be Neumann")
    if "dirichlet" not in kinds:
        raise ConfigurationError("Γ_D is empty: at least one face must be Dirichlet")

    labels = np.zeros(grid.n_nodes, dtype=np.int8)
    normal_sum = np.zeros((grid.n_nodes, grid.dim))
    weights = {NodeLabel.NEUMANN: np.zeros(grid.n_nodes), NodeLabel.DIRICHLET: np.zeros(grid.n_nodes)}
    seg_face, seg_label, seg_nodes, seg_cell, seg_normal, seg_length = [], [], [], [], [], []

    # Dirichlet faces last so that they win at shared corners
    for face in sorted(faces, key=lambda f: partition[f] == "dirichlet"):
        label = NodeLabel.DIRICHLET if partition[face] == "dirichlet" else NodeLabel.NEUMANN
        nodes, cells, normal, length = _face_segments(grid, face)
        face_nodes = np.unique(nodes)
        labels[face_nodes] = label
        if grid.dim == 1:
            weights[label][face_nodes] += 1.0
        else:
            np.add.at(weights[label], nodes.ravel(), 0.5 * length)
        seg_face.append(np.full(cells.size, face))
        seg_label.append(np.full(cells.size, int(label)))
        seg_nodes.append(nodes)
        seg_cell.append(cells)
        seg_normal.append(np.tile(normal, (cells.size, 1)))
        seg_length.append(np.full(cells.size, length))

    # node normals: sum of normals of the faces carrying the node's own label
    for face in faces:
        label = NodeLabel.DIRICHLET if partition[face] == "dirichlet" else NodeLabel.NEUMANN
        nodes, _, normal, _ = _face_segments(grid, face)
        face_nodes = np.unique(nodes)
        own = face_nodes[labels[face_nodes] == label]
        normal_sum[own] += normal
    norms = np.linalg.norm(normal_sum, axis=1, keepdims=True)
    normals = np.divide(normal_sum, norms, out=np.zeros_like(normal_sum), where=norms > 0)

    segments = BoundarySegments(
        face=np.concatenate(seg_face),
        label=np.concatenate(seg_label),
        nodes=np.concatenate(seg_nodes),
        cell=np.concatenate(seg_cell),
        normal=np.concatenate(seg_normal),
        length=np.concatenate(seg_length),
    )
    logger.debug(
        f"classify_boundary: {int(np.sum(labels == NodeLabel.NEUMANN))} Neumann, "
        f"{int(np.sum(labels == NodeLabel.DIRICHLET))} Dirichlet nodes"
    )
    return BoundaryClass(
        grid=grid,
        labels=labels,
        normals=normals,
        neumann_weights=weights[NodeLabel.NEUMANN],
        dirichlet_weights=weights[NodeLabel.DIRICHLET],
        segments=segments,
    )


def boundary_integral(f: Union[Field, np.ndarray], boundary: BoundaryClass, label: NodeLabel = NodeLabel.NEUMANN) -> float:
    """∫ f ds over the faces with the given label (counting measure in 1D, trapezoid in 2D)."""
    values = f.flat if isinstance(f, Field) else np.asarray(f, dtype=float).ravel()
    return float(np.dot(boundary.weights(label), values))

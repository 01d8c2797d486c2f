import numpy as np
import pytest

from mfg_exit.errors import ConfigurationError
from mfg_exit.grid import (
    CellField,
    Field,
    NodeLabel,
    boundary_integral,
    build_grid,
    cell_average,
    cell_gradient,
    classify_boundary,
    gradient_operator,
    interior_integral,
    nodal_average,
    sample_cells,
    sample_nodes,
)
from mfg_exit.models import BoundarySpec

MIXED_SQUARE = BoundarySpec(partition={"left": "neumann", "top": "neumann", "right": "dirichlet", "bottom": "dirichlet"})
INTERVAL = BoundarySpec(partition={"left": "neumann", "right": "dirichlet"})


def test_build_grid_shapes():
    grid = build_grid([(0.0, 2.0), (-1.0, 1.0)], [4, 8])
    assert grid.dim == 2
    assert grid.h == (0.5, 0.25)
    assert grid.node_shape == (5, 9)
    assert grid.n_nodes == 45
    assert grid.n_cells_total == 32
    assert grid.cell_volume == pytest.approx(0.125)
    assert grid.node_coordinates().shape == (5, 9, 2)
    assert grid.cell_centroids()[0, 0].tolist() == pytest.approx([0.25, -0.875])


def test_scalar_resolution_broadcasts_in_2d():
    assert build_grid([(0.0, 1.0), (0.0, 1.0)], 6).n_cells == (6, 6)


def test_grid_is_hashable():
    assert build_grid((0.0, 1.0), 8) == build_grid((0.0, 1.0), 8)
    assert len({build_grid((0.0, 1.0), 8), build_grid((0.0, 1.0), 8)}) == 1


@pytest.mark.parametrize(
    "extents, n",
    [
        ((1.0, 1.0), 4),
        ((1.0, 0.0), 4),
        ((0.0, 1.0), 1),
        ([(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], 4),
        ([(0.0, 1.0), (0.0, 1.0)], [4, 4, 4]),
    ],
)
def test_build_grid_rejects(extents, n):
    with pytest.raises(ConfigurationError):
        build_grid(extents, n)


def test_field_shape_is_checked(line32):
    Field(line32, np.zeros(33))
    with pytest.raises(ConfigurationError):
        Field(line32, np.zeros(32))
    with pytest.raises(ConfigurationError):
        CellField(line32, np.zeros(33))


def test_gradient_is_exact_on_affine_fields(square16):
    w = sample_nodes(square16, lambda x: 2.0 * x[..., 0] - 3.0 * x[..., 1] + 1.0)
    du = cell_gradient(w)
    np.testing.assert_allclose(du.rows[:, 0], 2.0)
    np.testing.assert_allclose(du.rows[:, 1], -3.0)


def test_gradient_1d_is_the_cell_difference(line32):
    w = sample_nodes(line32, lambda x: x[..., 0] ** 2)
    x = line32.cell_centroids()[..., 0]
    # the centred difference of x² is exact at midpoints
    np.testing.assert_allclose(cell_gradient(w).values[..., 0], 2.0 * x, atol=1e-12)


def test_gradient_operator_is_cached(square16):
    assert gradient_operator(square16) is gradient_operator(build_grid([(0.0, 1.0), (0.0, 1.0)], 16))


def test_averages_preserve_constants(square16):
    ones_cells = CellField(square16, np.ones(square16.cell_shape))
    ones_nodes = Field(square16, np.ones(square16.node_shape))
    np.testing.assert_allclose(nodal_average(ones_cells).values, 1.0)
    np.testing.assert_allclose(cell_average(ones_nodes).values, 1.0)


def test_interior_integral(square16):
    f = sample_cells(square16, lambda x: x[..., 0] + x[..., 1])
    # midpoint rule integrates affine functions exactly
    assert interior_integral(f) == pytest.approx(1.0)


def test_interval_classification(line32):
    bc = classify_boundary(line32, INTERVAL)
    assert bc.neumann_nodes.tolist() == [0]
    assert bc.dirichlet_nodes.tolist() == [32]
    assert bc.interior_nodes.size == 31
    assert bc.neumann_weights[0] == 1.0
    assert bc.normals[0].tolist() == [-1.0]
    assert bc.normals[32].tolist() == [1.0]


def test_corners_go_to_dirichlet(square16):
    bc = classify_boundary(square16, MIXED_SQUARE)
    ny = 16
    corner = {
        "left_bottom": 0,
        "left_top": ny,
        "right_bottom": 16 * (ny + 1),
        "right_top": 16 * (ny + 1) + ny,
    }
    assert bc.labels[corner["left_bottom"]] == NodeLabel.DIRICHLET
    assert bc.labels[corner["right_top"]] == NodeLabel.DIRICHLET
    assert bc.labels[corner["right_bottom"]] == NodeLabel.DIRICHLET
    # left and top are both Neumann
    assert bc.labels[corner["left_top"]] == NodeLabel.NEUMANN
    np.testing.assert_allclose(bc.normals[corner["left_top"]], [-np.sqrt(0.5), np.sqrt(0.5)])


def test_corner_keeps_its_neumann_half_weight(square16):
    bc = classify_boundary(square16, MIXED_SQUARE)
    ones = np.ones(square16.n_nodes)
    # left and top faces have total length 2 even though two of their ends are Dirichlet
    assert boundary_integral(ones, bc, NodeLabel.NEUMANN) == pytest.approx(2.0)
    assert boundary_integral(ones, bc, NodeLabel.DIRICHLET) == pytest.approx(2.0)
    assert bc.neumann_weights[0] == pytest.approx(0.5 / 16)


def test_boundary_integral_of_a_linear_profile(square16):
    bc = classify_boundary(square16, MIXED_SQUARE)
    f = sample_nodes(square16, lambda x: x[..., 1])
    # ∫ y over the left face (1/2) plus ∫ 1 over the top face (1)
    assert boundary_integral(f, bc) == pytest.approx(1.5)


def test_segments_cover_every_face(square16):
    bc = classify_boundary(square16, MIXED_SQUARE)
    seg = bc.segments
    assert seg.cell.size == 4 * 16
    assert set(seg.face.tolist()) == {"left", "right", "bottom", "top"}
    np.testing.assert_allclose(np.linalg.norm(seg.normal, axis=1), 1.0)


@pytest.mark.parametrize(
    "partition",
    [
        {"left": "neumann"},
        {"left": "neumann", "right": "neumann"},
        {"left": "dirichlet", "right": "dirichlet"},
        {"left": "neumann", "right": "dirichlet", "top": "neumann"},
    ],
)
def test_classification_rejects(line32, partition):
    with pytest.raises(ConfigurationError):
        classify_boundary(line32, BoundarySpec(partition=partition))

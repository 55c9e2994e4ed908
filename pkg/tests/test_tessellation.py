"""Equal-area partitions: Lloyd fixed point and regular grids."""

import numpy as np
import numpy.testing as npt
import pytest

from otfluid import (
    ConfigInvalid,
    Domain,
    NotRectangular,
    grid_partition,
    lloyd_partition,
    polygon_area,
    rectangle,
)

UNIT_SQUARE = rectangle(-0.5, 0.5, -0.5, 0.5)


def test_single_cell_lloyd_returns_domain_centroid():
    part = lloyd_partition(UNIT_SQUARE, 1, seed=0)
    assert part.n_cells == 1
    npt.assert_allclose(part.centroids, [[0.0, 0.0]], atol=1e-12)
    assert abs(part.areas[0] - 1.0) < 1e-12


def test_four_fold_symmetric_start_converges_to_quadrants():
    init = np.array([[-0.3, -0.3], [0.3, -0.3], [-0.3, 0.3], [0.3, 0.3]])
    part = lloyd_partition(UNIT_SQUARE, 4, initial_sites=init, move_tol=1e-10)
    npt.assert_allclose(np.sort(np.abs(part.centroids).ravel()), 0.25, atol=1e-9)
    npt.assert_allclose(part.areas, 0.25, atol=1e-9)


def test_lloyd_areas_equal_within_solver_tolerance():
    part = lloyd_partition(UNIT_SQUARE, 37, seed=5)
    target = UNIT_SQUARE.area / 37
    assert np.abs(part.areas - target).max() <= 1e-7 * target
    assert abs(part.areas.sum() - UNIT_SQUARE.area) <= 1e-9 * UNIT_SQUARE.area


def test_lloyd_quantization_energy_non_increasing():
    part = lloyd_partition(UNIT_SQUARE, 25, seed=2)
    energies = part.energy_history
    assert energies.size >= 2
    assert np.all(np.diff(energies) <= 1e-12 * energies[0])


def test_lloyd_same_seed_bit_identical():
    a = lloyd_partition(UNIT_SQUARE, 30, seed=9)
    b = lloyd_partition(UNIT_SQUARE, 30, seed=9)
    npt.assert_array_equal(a.centroids, b.centroids)
    npt.assert_array_equal(a.areas, b.areas)
    assert a.h == b.h
    for ca, cb in zip(a.cells, b.cells):
        assert len(ca) == len(cb)
        for pa, pb in zip(ca, cb):
            npt.assert_array_equal(pa, pb)


def test_lloyd_centroids_are_cell_barycenters():
    part = lloyd_partition(UNIT_SQUARE, 16, seed=3)
    # at the fixed point the generator of each returned cell is its own
    # barycenter up to the move tolerance
    for i, pieces in enumerate(part.cells):
        area = sum(polygon_area(p) for p in pieces)
        first = sum(
            polygon_area(p) * np.asarray(p).mean(axis=0) * 0.0
            + _polygon_first_moment(p)
            for p in pieces
        )
        npt.assert_allclose(
            first / area, part.centroids[i], atol=2e-4 * UNIT_SQUARE.diameter
        )


def _polygon_first_moment(poly):
    v = np.asarray(poly, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = np.sum((x + xn) * cross) / 6.0
    cy = np.sum((y + yn) * cross) / 6.0
    return np.array([cx, cy])


def test_lloyd_on_periodic_strip():
    domain = rectangle(0.0, 2.0, -0.5, 0.5, periodic_x=True)
    part = lloyd_partition(domain, 20, seed=7)
    target = domain.area / 20
    assert np.abs(part.areas - target).max() <= 1e-7 * target
    assert np.all(part.centroids[:, 0] >= 0.0)
    assert np.all(part.centroids[:, 0] < 2.0)


def test_lloyd_validation():
    with pytest.raises(ConfigInvalid):
        lloyd_partition(UNIT_SQUARE, 0, seed=0)
    with pytest.raises(ConfigInvalid):
        lloyd_partition(UNIT_SQUARE, 4, seed=0, max_iters=0)
    with pytest.raises(ConfigInvalid):
        lloyd_partition(UNIT_SQUARE, 4, initial_sites=np.zeros((3, 2)))


def test_grid_single_cell_is_whole_rectangle():
    part = grid_partition(rectangle(0.0, 2.0, 0.0, 1.0), 1, 1)
    assert part.n_cells == 1
    assert abs(part.areas[0] - 2.0) < 1e-12
    npt.assert_allclose(part.centroids, [[1.0, 0.5]], atol=1e-12)


def test_grid_30x30_frozen_h():
    part = grid_partition(UNIT_SQUARE, 30, 30)
    assert part.n_cells == 900
    npt.assert_allclose(part.areas, 1.0 / 900.0, atol=1e-14)
    assert abs(part.h - np.sqrt(2.0) / 30.0) < 1e-12
    assert abs(part.areas.sum() - 1.0) < 1e-9


def test_grid_two_unit_squares():
    part = grid_partition(rectangle(0.0, 2.0, 0.0, 1.0), 2, 1)
    npt.assert_allclose(part.areas, [1.0, 1.0], atol=1e-12)
    npt.assert_allclose(part.centroids, [[0.5, 0.5], [1.5, 0.5]], atol=1e-12)


def test_grid_row_major_from_bottom_left():
    part = grid_partition(UNIT_SQUARE, 2, 2)
    npt.assert_allclose(
        part.centroids,
        [[-0.25, -0.25], [0.25, -0.25], [-0.25, 0.25], [0.25, 0.25]],
        atol=1e-12,
    )


def test_grid_h_scales_like_inverse_sqrt_n():
    for k in (5, 10, 20, 40):
        part = grid_partition(UNIT_SQUARE, k, k)
        n = k * k
        assert part.h <= 2.0 / np.sqrt(n)


def test_grid_requires_rectangle():
    angles = np.linspace(0.0, 2.0 * np.pi, 7)[:-1]
    hexagon = Domain(np.stack([np.cos(angles), np.sin(angles)], axis=-1))
    with pytest.raises(NotRectangular):
        grid_partition(hexagon, 2, 2)


def test_grid_validation():
    with pytest.raises(ConfigInvalid):
        grid_partition(UNIT_SQUARE, 0, 3)

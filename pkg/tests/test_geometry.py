"""Power-diagram geometry: clipping, moments, partitions, periodicity."""

import numpy as np
import numpy.testing as npt
import pytest

from otfluid import (
    Domain,
    DuplicateSites,
    EmptyInput,
    NotPeriodic,
    build_power_diagram,
    clip_halfplane,
    compute_moments,
    polygon_area,
    rectangle,
    replicate_periodic,
)

CENTERED_SQUARE = rectangle(-0.5, 0.5, -0.5, 0.5)


def hexagon_domain(radius=1.0):
    angles = np.linspace(0.0, 2.0 * np.pi, 7)[:-1]
    return Domain(radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1))


def brute_cell(domain, sites, weights, i):
    """Reference Laguerre cell by clipping against every other site."""
    power = (sites * sites).sum(axis=1) + weights
    cell = domain.boundary.copy()
    for j in range(sites.shape[0]):
        if j == i or cell.shape[0] == 0:
            continue
        normal = 2.0 * (sites[j] - sites[i])
        cell = clip_halfplane(cell, normal, power[j] - power[i])
    return cell


def triangle_second_moment(tri, p):
    """Exact integral of |x - p|^2 over a triangle (edge-midpoint rule)."""
    mids = 0.5 * (tri + np.roll(tri, -1, axis=0))
    d = mids - np.asarray(p, dtype=float)
    return polygon_area(tri) * np.mean((d * d).sum(axis=1))


# ---------------------------------------------------------------------------
# clipping


def test_clip_with_containing_halfplane_returns_polygon_unchanged():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    out = clip_halfplane(square, (1.0, 0.0), 2.0)
    assert abs(polygon_area(out) - 1.0) < 1e-15


def test_clip_centered_square_in_half():
    out = clip_halfplane(CENTERED_SQUARE.boundary, (1.0, 0.0), 0.0)
    assert abs(polygon_area(out) - 0.5) < 1e-15
    assert np.all(out[:, 0] <= 1e-15)


def test_clip_triangle_to_quadrilateral():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    out = clip_halfplane(tri, (1.0, 0.0), 0.5)
    assert out.shape[0] == 4
    assert abs(polygon_area(out) - 0.375) < 1e-15


def test_clip_to_nothing_returns_empty_marker():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    out = clip_halfplane(tri, (1.0, 0.0), -1.0)
    assert out.shape == (0, 2)


# ---------------------------------------------------------------------------
# moments


def test_moments_of_centered_unit_square():
    m = compute_moments(CENTERED_SQUARE.boundary)
    assert abs(m.area - 1.0) < 1e-14
    npt.assert_allclose(m.barycenter, [0.0, 0.0], atol=1e-15)
    assert abs(m.second_moment_about((0.0, 0.0)) - 1.0 / 6.0) < 1e-14


def test_moments_translation_invariance():
    shift = np.array([3.7, -1.2])
    base = compute_moments(CENTERED_SQUARE.boundary)
    moved = compute_moments(CENTERED_SQUARE.boundary + shift)
    assert abs(moved.area - base.area) < 1e-14
    npt.assert_allclose(moved.barycenter, base.barycenter + shift, atol=1e-12)
    assert abs(moved.second_moment_barycenter - base.second_moment_barycenter) < 1e-12


def test_second_moment_matches_triangulation_quadrature():
    rng = np.random.default_rng(7)
    # random convex polygon: jittered radii on sorted angles
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=8))
    radii = rng.uniform(0.5, 1.5, size=8)
    poly = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
    poly = poly[::-1] if polygon_area(poly) < 0 else poly
    m = compute_moments(poly)
    for p in ([0.0, 0.0], [0.4, -0.3], m.barycenter):
        # |x - p|^2 is quadratic, so the edge-midpoint rule is exact per fan
        # triangle; summing them is an independent oracle for the closed form.
        apex = poly.mean(axis=0)
        exact = sum(
            triangle_second_moment(
                np.array([apex, poly[k], poly[(k + 1) % len(poly)]]), p
            )
            for k in range(len(poly))
        )
        assert abs(m.second_moment_about(p) - exact) < 1e-12 * max(1.0, exact)


def test_parallel_axis_identity():
    rng = np.random.default_rng(3)
    m = compute_moments(CENTERED_SQUARE.boundary + rng.normal(size=2))
    for p in rng.normal(size=(5, 2)):
        expected = m.second_moment_barycenter + m.area * float(
            (p - m.barycenter) @ (p - m.barycenter)
        )
        assert abs(m.second_moment_about(p) - expected) < 1e-10 * max(1.0, expected)


def test_site_barycenter_minimizes_second_moment():
    m = compute_moments(CENTERED_SQUARE.boundary)
    rng = np.random.default_rng(11)
    for p in rng.uniform(-0.4, 0.4, size=(10, 2)):
        assert m.second_moment_about(p) >= m.second_moment_about(m.barycenter)


# ---------------------------------------------------------------------------
# diagram construction


def test_single_site_owns_whole_domain():
    diagram = build_power_diagram([[0.2, -0.1]], [5.0], CENTERED_SQUARE)
    assert diagram.n_sites == 1
    assert abs(diagram.areas[0] - 1.0) < 1e-14
    assert not diagram.empty[0]


def test_mirror_sites_with_equal_weights_split_the_square():
    sites = np.array([[-0.25, 0.0], [0.25, 0.0]])
    diagram = build_power_diagram(sites, [0.3, 0.3], CENTERED_SQUARE)
    npt.assert_allclose(diagram.areas, [0.5, 0.5], atol=1e-14)
    npt.assert_allclose(diagram.barycenters, [[-0.25, 0.0], [0.25, 0.0]], atol=1e-14)


def test_two_site_weighted_boundary_sits_at_frozen_offset():
    # |x - M1|^2 = |x - M2|^2 + 0.1 solves to x = 0.1 for M = (-+1/4, 0),
    # so the cells have widths 0.6 and 0.4.
    sites = np.array([[-0.25, 0.0], [0.25, 0.0]])
    diagram = build_power_diagram(sites, [0.0, 0.1], CENTERED_SQUARE)
    npt.assert_allclose(diagram.areas, [0.6, 0.4], atol=1e-12)
    pieces = diagram.cell_polygons(0)
    assert len(pieces) == 1
    xmax = pieces[0][:, 0].max()
    assert abs(xmax - 0.1) < 1e-12


def test_partition_property_on_random_weighted_instances():
    rng = np.random.default_rng(20)
    for domain in (CENTERED_SQUARE, rectangle(0.0, 2.0, 0.0, 1.0), hexagon_domain()):
        xmin, xmax, ymin, ymax = domain.bounds
        for _ in range(3):
            n = int(rng.integers(2, 120))
            sites = rng.uniform((xmin, ymin), (xmax, ymax), size=(n, 2))
            sites = sites[domain.contains(sites, pad=1e-9 * domain.diameter)]
            if sites.shape[0] < 2:
                continue
            weights = rng.uniform(0.0, (0.05 * domain.diameter) ** 2, size=len(sites))
            diagram = build_power_diagram(sites, weights, domain)
            assert abs(diagram.areas.sum() - domain.area) <= 1e-9 * domain.area


def test_candidate_pruning_matches_halfplane_reference():
    # Above the brute-force size cutoff the builder prunes neighbors via a
    # lifted hull; every cell must still match the clip-everything oracle.
    rng = np.random.default_rng(4)
    n = 40
    sites = rng.uniform(-0.5, 0.5, size=(n, 2))
    weights = rng.uniform(0.0, 0.01, size=n)
    diagram = build_power_diagram(sites, weights, CENTERED_SQUARE)
    for i in range(n):
        cell = brute_cell(CENTERED_SQUARE, sites, weights, i)
        expected = polygon_area(cell) if cell.shape[0] else 0.0
        assert abs(diagram.areas[i] - expected) < 1e-10


def test_voronoi_reduction_with_equal_weights():
    rng = np.random.default_rng(30)
    sites = rng.uniform(-0.5, 0.5, size=(30, 2))
    diagram = build_power_diagram(sites, np.full(30, 0.7), CENTERED_SQUARE)
    queries = rng.uniform(-0.5, 0.5, size=(10_000, 2))
    d2 = ((queries[:, None, :] - sites[None, :, :]) ** 2).sum(axis=-1)
    winner = np.argmin(d2, axis=1)
    cells = diagram.cells
    pad = 1e-9
    for i in range(30):
        pts = queries[winner == i]
        if pts.shape[0] == 0:
            continue
        inside = np.zeros(pts.shape[0], dtype=bool)
        for piece in cells[i]:
            nxt = np.roll(piece, -1, axis=0)
            edge = nxt - piece
            rel = pts[:, None, :] - piece[None, :, :]
            cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
            inside |= np.all(cross >= -pad, axis=1)
        assert inside.all()


def test_adding_constant_to_all_weights_changes_nothing():
    rng = np.random.default_rng(5)
    sites = rng.uniform(-0.5, 0.5, size=(25, 2))
    weights = rng.uniform(0.0, 0.02, size=25)
    a = build_power_diagram(sites, weights, CENTERED_SQUARE)
    b = build_power_diagram(sites, weights + 3.25, CENTERED_SQUARE)
    npt.assert_array_equal(a.piece_site, b.piece_site)
    npt.assert_array_equal(a.piece_lens, b.piece_lens)
    npt.assert_allclose(a.piece_verts, b.piece_verts, atol=1e-12)


def test_increasing_one_weight_never_grows_its_cell():
    rng = np.random.default_rng(6)
    sites = rng.uniform(-0.5, 0.5, size=(12, 2))
    weights = rng.uniform(0.0, 0.02, size=12)
    base = build_power_diagram(sites, weights, CENTERED_SQUARE)
    for i in (0, 5, 11):
        bumped = weights.copy()
        bumped[i] += 0.05
        after = build_power_diagram(sites, bumped, CENTERED_SQUARE)
        assert after.areas[i] <= base.areas[i] + 1e-12


def test_buried_site_gets_empty_cell_and_partition_still_holds():
    sites = np.array([[-0.25, 0.0], [0.25, 0.0], [0.0, 0.0]])
    weights = np.array([0.0, 0.0, 10.0])
    diagram = build_power_diagram(sites, weights, CENTERED_SQUARE)
    assert diagram.empty[2]
    assert diagram.areas[2] == 0.0
    assert abs(diagram.areas.sum() - 1.0) < 1e-12
    assert diagram.cells[2] == []


def test_duplicate_sites_raise():
    sites = np.array([[0.1, 0.1], [0.1, 0.1], [0.3, 0.0]])
    with pytest.raises(DuplicateSites):
        build_power_diagram(sites, np.zeros(3), CENTERED_SQUARE)


def test_empty_input_raises():
    with pytest.raises(EmptyInput):
        build_power_diagram(np.empty((0, 2)), np.empty(0), CENTERED_SQUARE)


def test_cells_property_agrees_with_cell_polygons():
    rng = np.random.default_rng(8)
    sites = rng.uniform(-0.5, 0.5, size=(9, 2))
    diagram = build_power_diagram(sites, np.zeros(9), CENTERED_SQUARE)
    cells = diagram.cells
    for i in range(9):
        pieces = diagram.cell_polygons(i)
        assert len(pieces) == len(cells[i])
        for a, b in zip(pieces, cells[i]):
            npt.assert_array_equal(a, b)


def test_max_cell_diameter_bounded_by_domain_diameter():
    rng = np.random.default_rng(9)
    sites = rng.uniform(-0.5, 0.5, size=(50, 2))
    diagram = build_power_diagram(sites, np.zeros(50), CENTERED_SQUARE)
    assert 0.0 < diagram.max_cell_diameter() <= CENTERED_SQUARE.diameter + 1e-12


# ---------------------------------------------------------------------------
# periodic strips


def test_replicate_periodic_frozen_positions():
    domain = rectangle(0.0, 2.0, 0.0, 1.0, periodic_x=True)
    replicas, owner = replicate_periodic(np.array([[0.1, 0.0]]), domain)
    npt.assert_allclose(
        replicas, [[-1.9, 0.0], [0.1, 0.0], [2.1, 0.0]], atol=1e-15
    )
    npt.assert_array_equal(owner, [0, 0, 0])


def test_replicate_requires_periodic_domain():
    with pytest.raises(NotPeriodic):
        replicate_periodic(np.array([[0.1, 0.0]]), rectangle(0.0, 2.0, 0.0, 1.0))


def test_periodic_partition_one_cell_per_site():
    rng = np.random.default_rng(12)
    domain = rectangle(0.0, 2.0, -0.5, 0.5, periodic_x=True)
    sites = rng.uniform((0.0, -0.5), (2.0, 0.5), size=(20, 2))
    diagram = build_power_diagram(sites, np.zeros(20), domain)
    assert abs(diagram.areas.sum() - domain.area) <= 1e-9 * domain.area
    assert not diagram.empty.any()
    for i in range(20):
        assert 1 <= len(diagram.cell_polygons(i)) <= 3


def test_periodic_seam_cells_match_shifted_configuration():
    # Shifting every site by half a period permutes nothing and must leave
    # each site's total area unchanged -- the seam-wrapping oracle.
    domain = rectangle(0.0, 2.0, -0.5, 0.5, periodic_x=True)
    sites = np.array(
        [[0.02, 0.1], [1.97, -0.2], [0.6, 0.3], [1.2, -0.4], [0.35, -0.05]]
    )
    weights = np.array([0.0, 0.01, 0.004, 0.0, 0.002])
    base = build_power_diagram(sites, weights, domain)
    shifted_sites = sites.copy()
    shifted_sites[:, 0] = domain.wrap_x(sites[:, 0] + 1.0)
    shifted = build_power_diagram(shifted_sites, weights, domain)
    npt.assert_allclose(base.areas, shifted.areas, rtol=0.0, atol=1e-9)
    npt.assert_allclose(
        base.barycenters[:, 1], shifted.barycenters[:, 1], atol=1e-9
    )

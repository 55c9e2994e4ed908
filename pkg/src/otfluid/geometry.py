"""Power (Laguerre) diagrams clipped to a convex polygonal domain.

Cells, exact polygon moments, and shared-edge adjacency for N weighted
sites.  The cell of site i collects the points x with

    |x - M_i|^2 + psi_i  <=  |x - M_j|^2 + psi_j   for all j;

equal weights reduce it to the Voronoi diagram.  Candidate neighbors are
pruned through the classical lifting of the sites to a 3D convex hull
(z = |M|^2 - psi); a brute-force all-pairs pass covers inputs too small
or too degenerate for a 3D hull.  Domains may be periodic in x, in which
case sites are replicated one period to each side and the cells of the
fundamental strip are kept.

Points are float64 arrays of shape (2,), polygons float64 arrays of
shape (k, 2) in counterclockwise order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import _clip
from .errors import (
    DegenerateCell,
    DuplicateSites,
    EmptyInput,
    NotPeriodic,
    NotRectangular,
)

# sites closer than this fraction of the domain diameter are an error
COINCIDENCE_REL_TOL = 1e-12
# shared edges shorter than this fraction of the domain diameter are dropped
EDGE_DROP_REL_TOL = 1e-12
# relative agreement demanded between cell areas and the domain area
PARTITION_REL_TOL = 1e-9

_BRUTE_FORCE_MAX = 16


# ---------------------------------------------------------------------------
# polygon primitives


def polygon_area(vertices: np.ndarray) -> float:
    """Signed area, positive for counterclockwise order."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def validate_polygon(vertices, rel_tol: float = 1e-12) -> np.ndarray:
    """Canonicalize a convex polygon: dedup coincident vertices, check order.

    Returns the vertices as a contiguous (k, 2) float array.  Raises
    DegenerateCell when fewer than 3 distinct vertices remain, the signed
    area is not positive, or the polygon is not convex.
    """
    v = np.ascontiguousarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or not np.all(np.isfinite(v)):
        raise DegenerateCell("polygon must be a finite (k, 2) vertex array")
    scale = max(float(np.max(np.abs(v))), 1e-300)
    keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > rel_tol * scale
    v = v[keep]
    if v.shape[0] < 3:
        raise DegenerateCell("fewer than 3 distinct vertices")
    area = polygon_area(v)
    if area <= 0.0:
        raise DegenerateCell("vertices must be counterclockwise with area > 0")
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    if np.any(cross < -rel_tol * scale * scale):
        raise DegenerateCell("polygon is not convex")
    return v


def polygon_diameter(vertices: np.ndarray) -> float:
    """Largest pairwise vertex distance."""
    v = np.asarray(vertices, dtype=float)
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d * d).sum(-1).max()))


def clip_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Intersect a convex polygon with the halfplane <normal, x> <= offset.

    Returns the clipped polygon, or an empty (0, 2) array when the
    intersection has no interior.
    """
    v = np.asarray(poly, dtype=float)
    nx, ny = float(normal[0]), float(normal[1])
    d = v[:, 0] * nx + v[:, 1] * ny - float(offset)
    out = []
    nv = v.shape[0]
    for k in range(nv):
        kn = (k + 1) % nv
        da, db = d[k], d[kn]
        if da <= 0.0:
            out.append(v[k])
            if db > 0.0:
                t = da / (da - db)
                out.append(v[k] + t * (v[kn] - v[k]))
        elif db <= 0.0:
            t = da / (da - db)
            out.append(v[k] + t * (v[kn] - v[k]))
    if len(out) < 3:
        return np.empty((0, 2))
    res = np.array(out)
    scale = max(float(np.max(np.abs(res))), 1e-300)
    keep = np.linalg.norm(res - np.roll(res, 1, axis=0), axis=1) > 1e-15 * scale
    res = res[keep]
    if res.shape[0] < 3 or polygon_area(res) <= 0.0:
        return np.empty((0, 2))
    return res


def _local_moment_sums(local: np.ndarray):
    """Shoelace accumulators of a polygon given in translated coordinates."""
    x, y = local[:, 0], local[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(cross.sum())
    mx = float(((x + xn) * cross).sum()) / 6.0
    my = float(((y + yn) * cross).sum()) / 6.0
    q = (x * x + y * y) + (x * xn + y * yn) + (xn * xn + yn * yn)
    second = float((q * cross).sum()) / 12.0
    return area, mx, my, second


@dataclass(frozen=True)
class CellMoments:
    """Exact area, barycenter, and centered second moment of a convex cell."""

    area: float
    barycenter: np.ndarray
    second_moment_barycenter: float

    def second_moment_about(self, p) -> float:
        """Integral of |x - p|^2 over the cell (parallel-axis identity)."""
        d = self.barycenter - np.asarray(p, dtype=float)
        return self.second_moment_barycenter + self.area * float(d @ d)


def compute_moments(cell: np.ndarray, site=None) -> CellMoments:
    """Moments of a convex polygon by closed-form signed-triangle integration.

    `site` is accepted for call-site symmetry with the diagram builder; the
    returned object evaluates the second moment about any point.
    """
    v = np.ascontiguousarray(cell, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise DegenerateCell("cell needs at least 3 vertices")
    scale = max(polygon_diameter(v), 1e-300)
    origin = v[0].copy()
    area, mx, my, _ = _local_moment_sums(v - origin)
    if area <= np.finfo(float).eps * scale * scale:
        raise DegenerateCell(f"cell area {area:g} below machine scale")
    bary = origin + np.array([mx, my]) / area
    _, _, _, second_b = _local_moment_sums(v - bary)
    return CellMoments(area=area, barycenter=bary, second_moment_barycenter=second_b)


# ---------------------------------------------------------------------------
# domain


@dataclass(frozen=True, eq=False)
class Domain:
    """Bounded convex polygonal domain, optionally periodic in x."""

    boundary: np.ndarray
    periodic_x: bool = False
    period_length: float | None = None
    area: float = field(init=False)
    centroid: np.ndarray = field(init=False)
    diameter: float = field(init=False)

    def __post_init__(self):
        b = validate_polygon(self.boundary)
        object.__setattr__(self, "boundary", b)
        m = compute_moments(b)
        object.__setattr__(self, "area", m.area)
        object.__setattr__(self, "centroid", m.barycenter)
        object.__setattr__(self, "diameter", polygon_diameter(b))
        if self.periodic_x:
            if self.period_length is None or self.period_length <= 0:
                raise NotRectangular("periodic domain needs a positive period_length")
            self._require_rectangle()
            w = self.bounds[1] - self.bounds[0]
            if abs(w - self.period_length) > 1e-12 * self.diameter:
                raise NotRectangular(
                    f"periodic rectangle width {w:g} != period_length {self.period_length:g}"
                )
        elif self.period_length is not None:
            raise NotPeriodic("period_length given but periodic_x is false")

    def _require_rectangle(self):
        b = self.boundary
        if b.shape[0] != 4:
            raise NotRectangular("boundary must be an axis-aligned rectangle")
        e = np.roll(b, -1, axis=0) - b
        axis_aligned = (np.abs(e[:, 0]) < 1e-12 * self.diameter) | (
            np.abs(e[:, 1]) < 1e-12 * self.diameter
        )
        if not np.all(axis_aligned):
            raise NotRectangular("boundary must be an axis-aligned rectangle")

    @property
    def bounds(self):
        """(xmin, xmax, ymin, ymax) of the boundary."""
        b = self.boundary
        return (
            float(b[:, 0].min()),
            float(b[:, 0].max()),
            float(b[:, 1].min()),
            float(b[:, 1].max()),
        )

    @property
    def is_rectangle(self) -> bool:
        try:
            self._require_rectangle()
        except NotRectangular:
            return False
        return True

    def contains(self, points: np.ndarray, pad: float = 0.0) -> np.ndarray:
        """Boolean mask of points inside the boundary (shrunk by pad)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        b = self.boundary
        e = np.roll(b, -1, axis=0) - b
        rel = p[:, None, :] - b[None, :, :]
        cross = e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]
        return np.all(cross >= pad * np.linalg.norm(e, axis=1)[None, :], axis=1)

    def wrap_x(self, x: np.ndarray) -> np.ndarray:
        """Map x coordinates into the fundamental strip [xmin, xmin + L)."""
        if not self.periodic_x:
            raise NotPeriodic("wrap_x on a non-periodic domain")
        x0 = self.bounds[0]
        return x0 + np.mod(np.asarray(x, dtype=float) - x0, self.period_length)


def rectangle(xmin, xmax, ymin, ymax, periodic_x=False) -> Domain:
    """Axis-aligned rectangular domain."""
    boundary = np.array(
        [[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float
    )
    return Domain(
        boundary,
        periodic_x=periodic_x,
        period_length=float(xmax - xmin) if periodic_x else None,
    )


def replicate_periodic(sites: np.ndarray, domain: Domain):
    """Three-copy replication (x - L, x, x + L) of sites in a periodic strip.

    Returns (replicas, owner) where replicas has shape (3n, 2) with each
    site's copies consecutive in shift order (-L, 0, +L) and owner maps the
    replica row back to the original site index.
    """
    if not domain.periodic_x:
        raise NotPeriodic("replicate_periodic needs a periodic domain")
    s = np.atleast_2d(np.asarray(sites, dtype=float))
    n = s.shape[0]
    if n == 0:
        raise EmptyInput("no sites")
    L = float(domain.period_length)
    wrapped = s.copy()
    wrapped[:, 0] = domain.wrap_x(s[:, 0])
    replicas = np.repeat(wrapped, 3, axis=0)
    replicas[:, 0] += np.tile(np.array([-L, 0.0, L]), n)
    owner = np.repeat(np.arange(n, dtype=np.int64), 3)
    return replicas, owner


# ---------------------------------------------------------------------------
# power diagram


@dataclass(eq=False)
class PowerDiagram:
    """Laguerre cells of weighted sites clipped to the domain.

    Cells are stored as flat vertex slabs; a cell in a periodic strip may
    consist of up to three convex pieces (one per replica crossing the
    seam).  `areas`, `barycenters`, and `second_moments` merge the pieces
    of each site, with positions unwrapped around the site so barycenters
    stay meaningful across the seam.  `adjacency[i, j]` is the total
    shared-edge length between cells i and j; `hessian_weights[i, j]`
    accumulates (edge length) / (2 |M_i - M_j|) over replica pairs, which
    is the area derivative d area_i / d psi_j.
    """

    sites: np.ndarray
    weights: np.ndarray
    domain: Domain
    areas: np.ndarray
    barycenters: np.ndarray
    second_moments: np.ndarray
    empty: np.ndarray
    adjacency: sp.csr_matrix
    hessian_weights: sp.csr_matrix
    piece_verts: np.ndarray
    piece_lens: np.ndarray
    piece_site: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    @property
    def piece_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.piece_lens)]).astype(np.int64)

    def cell_polygons(self, i: int) -> list[np.ndarray]:
        """Convex pieces of cell i in strip coordinates (possibly none)."""
        starts = self.piece_starts
        out = []
        for p in np.flatnonzero(self.piece_site == i):
            v = self.piece_verts[starts[p] : starts[p + 1]]
            scale = max(float(np.max(np.abs(v))), 1e-300)
            keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > 1e-14 * scale
            vv = v[keep]
            if vv.shape[0] >= 3:
                out.append(vv)
        return out

    @property
    def cells(self) -> list[list[np.ndarray]]:
        """Per-site list of convex pieces (empty list for an empty cell)."""
        starts = self.piece_starts
        out: list[list[np.ndarray]] = [[] for _ in range(self.n_sites)]
        order = np.argsort(self.piece_site, kind="stable")
        for p in order:
            v = self.piece_verts[starts[p] : starts[p + 1]]
            scale = max(float(np.max(np.abs(v))), 1e-300)
            keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > 1e-14 * scale
            vv = v[keep]
            if vv.shape[0] >= 3:
                out[self.piece_site[p]].append(vv)
        return out

    def max_cell_diameter(self) -> float:
        """Largest per-piece diameter over all non-empty cells."""
        starts = self.piece_starts
        best = 0.0
        for p in range(self.piece_lens.shape[0]):
            v = self.piece_verts[starts[p] : starts[p + 1]]
            d = polygon_diameter(v)
            if d > best:
                best = d
        return best


def _lift_candidates(sites: np.ndarray, weights: np.ndarray):
    """Neighbor candidates and visibility from the lifted 3D convex hull.

    A site's power cell is non-empty in the plane exactly when its lift
    (x, y, |M|^2 + psi) appears on the lower hull, and its cell facets can
    only come from sites sharing a lower-hull edge with it.
    """
    n = sites.shape[0]
    lift = np.column_stack([sites, (sites * sites).sum(1) + weights])
    hull = ConvexHull(lift)
    lower = hull.equations[:, 2] < 0.0
    simp = hull.simplices[lower]
    if simp.size == 0:
        raise QhullError("no lower facets")
    active = np.zeros(n, dtype=bool)
    active[np.unique(simp)] = True
    a = np.concatenate([simp[:, 0], simp[:, 1], simp[:, 2]])
    b = np.concatenate([simp[:, 1], simp[:, 2], simp[:, 0]])
    pat = sp.coo_matrix(
        (
            np.ones(2 * a.size, dtype=np.int8),
            (np.concatenate([a, b]), np.concatenate([b, a])),
        ),
        shape=(n, n),
    ).tocsr()
    pat.setdiag(0)
    pat.eliminate_zeros()
    return pat.indptr.astype(np.int64), pat.indices.astype(np.int64), active


def _brute_candidates(n: int):
    """All-pairs candidates: every other site clips every cell."""
    if n == 1:
        return np.zeros(2, np.int64), np.zeros(0, np.int64), np.ones(1, bool)
    idx = np.arange(n)
    indices = np.concatenate([np.delete(idx, i) for i in range(n)]).astype(np.int64)
    indptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
    return indptr, indices, np.ones(n, bool)


def _run_kernel(rep_sites, rep_power, dom_verts, indptr, indices, active):
    nd = dom_verts.shape[0]
    n = rep_sites.shape[0]
    caps = nd + np.diff(indptr) + 2
    out_offsets = np.concatenate([[0], np.cumsum(caps)]).astype(np.int64)
    out_verts = np.empty((out_offsets[-1], 2))
    out_srcs = np.empty(out_offsets[-1], dtype=np.int64)
    out_counts = np.empty(n, dtype=np.int64)
    _clip.clip_cells(
        rep_sites,
        rep_power,
        dom_verts,
        indptr,
        indices,
        active,
        out_offsets,
        out_verts,
        out_srcs,
        out_counts,
    )
    return out_offsets, out_verts, out_srcs, out_counts


def _flat_ranges(starts, lens):
    """Indices covering arange(start, start + len) for every slab."""
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(lens)
    first = np.concatenate([[0], ends[:-1]])
    rel = np.arange(total, dtype=np.int64) - np.repeat(first, lens)
    return np.repeat(starts, lens) + rel


def _check_duplicates(central: np.ndarray, pool: np.ndarray, tol: float):
    if pool.shape[0] < 2:
        return
    tree = cKDTree(pool)
    d, _ = tree.query(central, k=2)
    nearest_other = float(np.min(d[:, 1]))
    if nearest_other < tol:
        raise DuplicateSites(
            f"minimum site separation {nearest_other:g} below tolerance {tol:g}"
        )


def build_power_diagram(
    sites,
    weights,
    domain: Domain,
    *,
    check_duplicates: bool = True,
) -> PowerDiagram:
    """Construct the power diagram of weighted sites clipped to the domain.

    Candidate neighbors come from the lifted convex hull (brute force for
    tiny or lift-degenerate inputs).  The construction is validated by the
    partition property and redone by brute force if pruning ever misses a
    neighbor.
    """
    s = np.atleast_2d(np.ascontiguousarray(sites, dtype=float))
    w = np.atleast_1d(np.ascontiguousarray(weights, dtype=float))
    if s.shape[0] == 0 or s.size == 0:
        raise EmptyInput("no sites")
    if s.ndim != 2 or s.shape[1] != 2:
        raise EmptyInput("sites must have shape (n, 2)")
    if w.shape[0] != s.shape[0]:
        raise EmptyInput("weights length must match sites")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
        raise ValueError("sites and weights must be finite")
    n = s.shape[0]

    if domain.periodic_x:
        rep_sites, owner = replicate_periodic(s, domain)
        rep_w = np.repeat(w, 3)
        central = rep_sites[1::3]
    else:
        rep_sites, owner = s, np.arange(n, dtype=np.int64)
        rep_w = w
        central = s

    if check_duplicates and n > 1:
        _check_duplicates(central, rep_sites, COINCIDENCE_REL_TOL * domain.diameter)

    rep_power = (rep_sites * rep_sites).sum(1) + rep_w
    nrep = rep_sites.shape[0]

    def construct(force_brute: bool):
        if force_brute or nrep <= _BRUTE_FORCE_MAX:
            cand = _brute_candidates(nrep)
        else:
            try:
                cand = _lift_candidates(rep_sites, rep_w)
            except QhullError:
                cand = _brute_candidates(nrep)
        return _run_kernel(rep_sites, rep_power, domain.boundary, *cand)

    diagram = _assemble(s, w, domain, rep_sites, owner, *construct(False))
    if abs(diagram.areas.sum() - domain.area) > PARTITION_REL_TOL * domain.area:
        diagram = _assemble(s, w, domain, rep_sites, owner, *construct(True))
        if abs(diagram.areas.sum() - domain.area) > PARTITION_REL_TOL * domain.area:
            raise DegenerateCell(
                "cells do not partition the domain: "
                f"sum {diagram.areas.sum():.17g} vs {domain.area:.17g}"
            )
    return diagram


def _assemble(
    sites, weights, domain, rep_sites, owner, out_offsets, out_verts, out_srcs, out_counts
):
    """Merge kernel output into per-site moments, adjacency, and pieces."""
    n = sites.shape[0]

    # first pass: areas of all >=3-vertex pieces, to drop zero-area slivers
    cand_rep = np.flatnonzero(out_counts >= 3).astype(np.int64)
    cand_lens = out_counts[cand_rep]
    flat = _flat_ranges(out_offsets[cand_rep], cand_lens)
    v = out_verts[flat]
    total = v.shape[0]
    ends = np.cumsum(cand_lens)
    starts = np.concatenate([[0], ends[:-1]]).astype(np.int64)
    nxt = np.arange(1, total + 1, dtype=np.int64)
    if ends.size:
        nxt[ends - 1] = starts
    cross = v[:, 0] * v[nxt, 1] - v[nxt, 0] * v[:, 1]
    cand_area = 0.5 * np.add.reduceat(cross, starts) if ends.size else np.zeros(0)

    good = cand_area > 0.0
    piece_rep = cand_rep[good]
    lens = cand_lens[good]

    # second pass: moments and edges of the surviving pieces
    flat = _flat_ranges(out_offsets[piece_rep], lens)
    verts = out_verts[flat]
    srcs = out_srcs[flat]
    total = verts.shape[0]
    ends = np.cumsum(lens)
    starts = np.concatenate([[0], ends[:-1]]).astype(np.int64)
    nxt = np.arange(1, total + 1, dtype=np.int64)
    if ends.size:
        nxt[ends - 1] = starts
    piece_site = owner[piece_rep]
    rep_of_vert = np.repeat(piece_rep, lens)

    anchors = rep_sites[rep_of_vert]
    local = verts - anchors
    x, y = local[:, 0], local[:, 1]
    xn, yn = local[nxt, 0], local[nxt, 1]
    cross = x * yn - xn * y
    if ends.size:
        piece_area = 0.5 * np.add.reduceat(cross, starts)
        piece_mx = np.add.reduceat((x + xn) * cross, starts) / 6.0
        piece_my = np.add.reduceat((y + yn) * cross, starts) / 6.0
        q = (x * x + y * y) + (x * xn + y * yn) + (xn * xn + yn * yn)
        piece_sec = np.add.reduceat(q * cross, starts) / 12.0
    else:
        piece_area = piece_mx = piece_my = piece_sec = np.zeros(0)

    areas = np.bincount(piece_site, weights=piece_area, minlength=n)
    mx = np.bincount(piece_site, weights=piece_mx, minlength=n)
    my = np.bincount(piece_site, weights=piece_my, minlength=n)
    second = np.bincount(piece_site, weights=piece_sec, minlength=n)
    empty = areas <= 0.0
    bary = sites.astype(float).copy()
    nz = ~empty
    bary[nz, 0] += mx[nz] / areas[nz]
    bary[nz, 1] += my[nz] / areas[nz]

    mask = srcs >= 0
    if np.any(mask):
        row_rep = rep_of_vert[mask]
        col_rep = srcs[mask]
        edge = local[nxt[mask]] - local[mask]
        elen = np.linalg.norm(edge, axis=1)
        row = owner[row_rep]
        col = owner[col_rep]
        pair = row != col
        row, col, elen = row[pair], col[pair], elen[pair]
        dist = np.linalg.norm(
            rep_sites[row_rep[pair]] - rep_sites[col_rep[pair]], axis=1
        )
        adj = sp.coo_matrix((elen, (row, col)), shape=(n, n)).tocsr()
        hw = sp.coo_matrix((elen / (2.0 * dist), (row, col)), shape=(n, n)).tocsr()
    else:
        adj = sp.csr_matrix((n, n))
        hw = sp.csr_matrix((n, n))
    adj = ((adj + adj.T) * 0.5).tocsr()
    hw = ((hw + hw.T) * 0.5).tocsr()
    adj.sort_indices()
    hw.sort_indices()
    drop = adj.data < EDGE_DROP_REL_TOL * domain.diameter
    adj.data[drop] = 0.0
    hw.data[drop] = 0.0
    adj.eliminate_zeros()
    hw.eliminate_zeros()

    return PowerDiagram(
        sites=np.asarray(sites, dtype=float),
        weights=np.asarray(weights, dtype=float),
        domain=domain,
        areas=areas,
        barycenters=bary,
        second_moments=second,
        empty=empty,
        adjacency=adj,
        hessian_weights=hw,
        piece_verts=verts,
        piece_lens=lens.astype(np.int64),
        piece_site=piece_site.astype(np.int64),
    )

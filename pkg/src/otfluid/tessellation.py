"""Equal-area partitions of a domain: Lloyd fixed point or regular grid.

The Lloyd variant alternates an equal-area optimal transport solve at the
current centers with moving every center to its cell barycenter, which is
the classical fixed-point construction of a well-spread equal-area
tessellation.  Both constructions record the maximum cell diameter h,
the mesh size of the partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ot
from .errors import ConfigInvalid, NotRectangular
from .geometry import Domain

LLOYD_DEFAULT_MAX_ITERS = 100
LLOYD_DEFAULT_MOVE_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class Partition:
    """Equal-area cells, their centroids, and the mesh size h.

    cells[i] is the list of convex pieces making up cell i (one piece for
    every cell except those wrapping a periodic seam).  energy_history
    holds the quantization energy sum_i int_{cell_i} |x - C_i|^2 dx per
    Lloyd iteration (empty for grid partitions).
    """

    cells: list
    centroids: np.ndarray
    areas: np.ndarray
    h: float
    domain: Domain
    energy_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def n_cells(self) -> int:
        return self.centroids.shape[0]


def _sample_uniform(domain: Domain, n: int, seed: int) -> np.ndarray:
    """Uniform rejection sampling of n points inside the domain."""
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = domain.bounds
    points = np.zeros((0, 2))
    while points.shape[0] < n:
        batch = rng.random((2 * n + 16, 2))
        batch[:, 0] = xmin + (xmax - xmin) * batch[:, 0]
        batch[:, 1] = ymin + (ymax - ymin) * batch[:, 1]
        batch = batch[domain.contains(batch)]
        points = np.vstack([points, batch])
    return np.ascontiguousarray(points[:n])


def lloyd_partition(
    domain: Domain,
    n: int,
    seed: int = 0,
    max_iters: int = LLOYD_DEFAULT_MAX_ITERS,
    move_tol: float = LLOYD_DEFAULT_MOVE_TOL,
    initial_sites=None,
) -> Partition:
    """Equal-area partition by the Lloyd-type fixed point.

    Iterates (a) solve optimal transport for equal areas at the current
    centers, (b) move each center to its cell barycenter, until the
    largest center displacement drops below move_tol * diam(domain) or
    max_iters is reached.  A final transport solve makes the returned
    cells exactly equal-area at the final centers.

    initial_sites overrides the seeded uniform sampling of the starting
    centers (useful for symmetric starts); its length must be n.
    """
    if n < 1:
        raise ConfigInvalid("n must be at least 1")
    if max_iters < 1:
        raise ConfigInvalid("max_iters must be at least 1")
    if initial_sites is not None:
        sites = np.atleast_2d(np.ascontiguousarray(initial_sites, dtype=float))
        if sites.shape != (n, 2):
            raise ConfigInvalid("initial_sites must have shape (n, 2)")
    else:
        sites = _sample_uniform(domain, n, seed)

    targets = ot.uniform_targets(domain, n)
    psi = None
    energies = []
    iterations = 0
    for _ in range(max_iters):
        solution = ot.solve(ot.OTProblem(sites, targets, domain), psi)
        psi = solution.weights
        energies.append(float(solution.diagram.second_moments.sum()))
        displacement = solution.barycenters - sites
        sites = solution.barycenters.copy()
        if domain.periodic_x:
            sites[:, 0] = domain.wrap_x(sites[:, 0])
        iterations += 1
        max_move = float(np.sqrt((displacement * displacement).sum(1).max()))
        if max_move <= move_tol * domain.diameter:
            break

    final = ot.solve(ot.OTProblem(sites, targets, domain), psi)
    energies.append(float(final.diagram.second_moments.sum()))
    return Partition(
        cells=final.diagram.cells,
        centroids=final.barycenters,
        areas=final.areas,
        h=final.diagram.max_cell_diameter(),
        domain=domain,
        energy_history=np.array(energies),
        iterations=iterations,
    )


def grid_partition(domain: Domain, nx: int, ny: int) -> Partition:
    """Partition an axis-aligned rectangle into nx-by-ny congruent cells.

    Cells are ordered row-major from the bottom-left corner (x fastest);
    h is the diagonal of one cell.
    """
    if not domain.is_rectangle:
        raise NotRectangular("grid partitions require an axis-aligned rectangle")
    if nx < 1 or ny < 1:
        raise ConfigInvalid("grid dimensions must be at least 1")
    xmin, xmax, ymin, ymax = domain.bounds
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    cells = []
    centroids = np.zeros((nx * ny, 2))
    for iy in range(ny):
        for ix in range(nx):
            x0, x1 = xs[ix], xs[ix + 1]
            y0, y1 = ys[iy], ys[iy + 1]
            cells.append([np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])])
            centroids[iy * nx + ix] = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny
    return Partition(
        cells=cells,
        centroids=centroids,
        areas=np.full(nx * ny, domain.area / (nx * ny)),
        h=float(np.hypot(dx, dy)),
        domain=domain,
    )

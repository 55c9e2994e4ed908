"""Semi-discrete optimal transport on power diagrams.

Finds weights psi so that every Laguerre cell of the given sites has a
prescribed area, by damped Newton iteration on the area residuals.  The
Jacobian of the areas with respect to the weights is a weighted graph
Laplacian (up to sign) over the cell adjacency, so each Newton step is
one sparse SPD solve with the first weight pinned to zero (weights are
determined up to an additive constant).  Damping follows the classical
safeguard: a step is accepted only while every cell keeps at least half
of the smaller of the initial minimum area and the minimum target, and
the residual norm decreases by the (1 - t/2) factor.

Also exposes the projection quantities of the solved diagram: the
squared transport distance dist_sq = sum_i int_{L_i} |x - M_i|^2 dx and
the cell barycenters B_i, whose gradient relation is
d(dist_sq)/d(M_i) = 2 area_i (M_i - B_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import (
    DegenerateProblem,
    DuplicateSites,
    MaxIterationsExceeded,
    NewtonStalled,
    SingularSystem,
)
from .geometry import Domain, PowerDiagram, build_power_diagram

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITERATIONS = 100
DAMPING_FLOOR = 2.0**-30


@dataclass(frozen=True, eq=False)
class OTProblem:
    """Prescribed cell areas for a set of sites in a domain."""

    sites: np.ndarray
    target_areas: np.ndarray
    domain: Domain

    def __post_init__(self):
        s = np.atleast_2d(np.ascontiguousarray(self.sites, dtype=float))
        t = np.atleast_1d(np.ascontiguousarray(self.target_areas, dtype=float))
        object.__setattr__(self, "sites", s)
        object.__setattr__(self, "target_areas", t)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] == 0:
            raise DegenerateProblem("sites must have shape (n, 2) with n >= 1")
        if t.shape[0] != s.shape[0]:
            raise DegenerateProblem("one target area per site required")
        if not np.all(np.isfinite(s)):
            raise DegenerateProblem("sites must be finite")
        if np.any(t <= 0.0):
            raise DegenerateProblem("every target area must be positive")
        total = float(t.sum())
        if abs(total - self.domain.area) > 1e-10 * self.domain.area:
            raise DegenerateProblem(
                f"target areas sum to {total:.17g}, domain area is {self.domain.area:.17g}"
            )

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]


def uniform_targets(domain: Domain, n: int) -> np.ndarray:
    return np.full(n, domain.area / n)


@dataclass(frozen=True, eq=False)
class OTSolution:
    """Weights achieving the target areas, with the solved diagram."""

    weights: np.ndarray
    diagram: PowerDiagram
    areas: np.ndarray
    barycenters: np.ndarray
    dist_sq: float
    newton_iterations: int
    min_accepted_area: float


def residual(diagram: PowerDiagram, targets) -> np.ndarray:
    """Per-cell area error (area_i - target_i)."""
    t = np.asarray(targets, dtype=float)
    return diagram.areas - t


def assemble_hessian(diagram: PowerDiagram) -> sp.csr_matrix:
    """Jacobian of cell areas w.r.t. weights: a signed graph Laplacian.

    Off-diagonal (i, j) is (shared edge length) / (2 |M_i - M_j|) >= 0,
    diagonal entries make every row sum to zero.
    """
    w = diagram.hessian_weights
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    return (w - sp.diags(row_sums)).tocsr()


def linear_solve(hessian, rhs) -> np.ndarray:
    """Solve hessian @ step = rhs with step[0] pinned to zero.

    The reduced system (row and column 0 removed) is SPD when the cell
    adjacency graph is connected; it is solved by sparse LU.
    """
    H = sp.csr_matrix(hessian)
    b = np.asarray(rhs, dtype=float)
    n = H.shape[0]
    if n == 1:
        return np.zeros(1)
    off = H.copy()
    off.setdiag(0)
    off.eliminate_zeros()
    ncomp, _ = connected_components(off, directed=False)
    if ncomp > 1:
        raise SingularSystem(f"adjacency graph has {ncomp} components")
    A = (-H[1:, 1:]).tocsc()
    step = np.zeros(n)
    step[1:] = splu(A).solve(-b[1:])
    if not np.all(np.isfinite(step)):
        raise SingularSystem("factorization produced non-finite step")
    # row 0 is only as consistent as the input partition sum, so verify the
    # reduced system
    res = float(np.linalg.norm((H @ step - b)[1:]))
    scale = max(float(np.linalg.norm(b[1:])), 1e-300)
    if res > 1e-8 * scale:
        raise SingularSystem("pinned solve did not reach requested accuracy")
    return step


def _rescaled_start(sites: np.ndarray, domain: Domain) -> np.ndarray:
    """Weights that make every cell non-empty even for escaped sites.

    psi_i = -lam |M_i - c|^2 turns the diagram into the Voronoi diagram of
    the sites contracted toward the domain centroid by (1 - lam); lam is
    the smallest factor putting every contracted site strictly inside.
    """
    c = domain.centroid
    rel = sites - c
    pad = 1e-12 * domain.diameter
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if bool(domain.contains(c + (1.0 - mid) * rel, pad=pad).all()):
            hi = mid
        else:
            lo = mid
    return -hi * (rel * rel).sum(1)


def solve(
    problem: OTProblem,
    initial_weights=None,
    tol: float = DEFAULT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> OTSolution:
    """Damped Newton solve of the prescribed-areas problem.

    Warm-started from initial_weights when given, else from zero weights
    (the Voronoi diagram).  Returns a solution whose maximum area error
    is at most tol * min(target_areas), with every cell non-empty and
    weights gauge-fixed to psi_0 = 0.
    """
    if tol <= 0.0:
        raise DegenerateProblem("tol must be positive")
    sites = problem.sites
    targets = problem.target_areas
    domain = problem.domain
    n = problem.n_sites
    if initial_weights is not None:
        psi0 = np.ascontiguousarray(initial_weights, dtype=float).copy()
        if psi0.shape != (n,):
            raise DegenerateProblem("initial_weights length must match sites")
        if not np.all(np.isfinite(psi0)):
            raise DegenerateProblem("initial_weights must be finite")
    else:
        psi0 = np.zeros(n)
    psi0 = psi0 - psi0[0]

    def build(psi, check):
        try:
            return build_power_diagram(
                sites, psi, domain, check_duplicates=check
            )
        except DuplicateSites as exc:
            raise DegenerateProblem(str(exc)) from exc

    def attempt(psi, floor, check_dup):
        diagram = build(psi, check_dup)
        if diagram.empty.any():
            psi = np.zeros(n)
            diagram = build(psi, False)
        if diagram.empty.any():
            psi = _rescaled_start(sites, domain)
            psi = psi - psi[0]
            diagram = build(psi, False)
        if diagram.empty.any():
            raise DegenerateProblem("could not find a start with non-empty cells")
        eps0 = 0.5 * min(float(diagram.areas.min()), float(targets.min()))
        abs_tol = tol * float(targets.min())
        f = diagram.areas - targets
        fnorm = float(np.linalg.norm(f))
        min_accepted = float(diagram.areas.min())
        iterations = 0
        while True:
            if float(np.max(np.abs(f))) <= abs_tol:
                return psi, diagram, iterations, min_accepted
            if iterations >= max_iterations:
                raise MaxIterationsExceeded(
                    f"no convergence in {max_iterations} Newton iterations "
                    f"(residual {np.max(np.abs(f)):g}, tol {abs_tol:g})"
                )
            direction = linear_solve(assemble_hessian(diagram), -f)
            t = 1.0
            while True:
                trial = psi + t * direction
                diagram_t = build(trial, False)
                f_t = diagram_t.areas - targets
                fnorm_t = float(np.linalg.norm(f_t))
                if (
                    float(diagram_t.areas.min()) >= eps0
                    and fnorm_t <= (1.0 - 0.5 * t) * fnorm
                ):
                    break
                t *= 0.5
                if t < floor:
                    raise NewtonStalled(
                        f"damping fell below {floor:g} at residual {fnorm:g}"
                    )
            psi, diagram, f, fnorm = trial, diagram_t, f_t, fnorm_t
            min_accepted = min(min_accepted, float(diagram.areas.min()))
            iterations += 1

    try:
        psi, diagram, iterations, min_accepted = attempt(psi0, DAMPING_FLOOR, True)
    except NewtonStalled:
        psi, diagram, iterations, min_accepted = attempt(
            np.zeros(n), DAMPING_FLOOR / 10.0, False
        )

    return OTSolution(
        weights=psi,
        diagram=diagram,
        areas=diagram.areas,
        barycenters=diagram.barycenters,
        dist_sq=float(diagram.second_moments.sum()),
        newton_iterations=iterations,
        min_accepted_area=min_accepted,
    )


def projection_quantities(solution: OTSolution, sites=None):
    """Transport cost and barycenters of the solved cell configuration.

    With `sites` omitted this is (dist_sq, B) of the solution itself.
    Passing other positions evaluates sum_i int_{L_i} |x - p_i|^2 dx over
    the frozen solved cells by the parallel-axis identity, the quadratic
    envelope touched at the solution's own sites.
    """
    diagram = solution.diagram
    if sites is None:
        return solution.dist_sq, solution.barycenters
    p = np.atleast_2d(np.asarray(sites, dtype=float))
    ds = diagram.sites - diagram.barycenters
    sec_bary = diagram.second_moments - diagram.areas * (ds * ds).sum(1)
    dp = p - diagram.barycenters
    dist = float(np.sum(sec_bary + diagram.areas * (dp * dp).sum(1)))
    return dist, diagram.barycenters


def projection_gradient(solution: OTSolution) -> np.ndarray:
    """Gradient 2 (M_i - B_i) of dist_sq in the area-weighted metric.

    The plain Euclidean derivative w.r.t. site i is area_i times this.
    """
    d = solution.diagram
    return 2.0 * (d.sites - d.barycenters)

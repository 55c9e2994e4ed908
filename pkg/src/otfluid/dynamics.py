"""Particle dynamics: symplectic Euler with a transport-projection spring.

Each step solves the equal-area optimal transport problem at the current
particle positions; the cell barycenters act as anchor points pulling the
particles back toward an area-preserving configuration with stiffness
1/epsilon^2.  The kick-drift update (velocity first, from the old
positions; then positions, from the new velocity) is the symplectic Euler
discretization of the penalized Hamiltonian system, with an optional
per-particle gravity term rho_i * G.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ot
from .errors import DuplicateSites, OTFluidError, PositionCollision
from .geometry import (
    COINCIDENCE_REL_TOL,
    Domain,
    _check_duplicates,
    replicate_periodic,
)


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Immutable snapshot of the particle system at one step."""

    step: int
    time: float
    positions: np.ndarray
    velocities: np.ndarray
    densities: np.ndarray
    weights_warm: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.ascontiguousarray(self.positions, dtype=float)).copy()
        vel = np.atleast_2d(np.ascontiguousarray(self.velocities, dtype=float)).copy()
        rho = np.atleast_1d(np.ascontiguousarray(self.densities, dtype=float)).copy()
        psi = np.atleast_1d(np.ascontiguousarray(self.weights_warm, dtype=float)).copy()
        n = pos.shape[0]
        if pos.ndim != 2 or pos.shape[1] != 2 or n == 0:
            raise ValueError("positions must have shape (n, 2) with n >= 1")
        if vel.shape != pos.shape:
            raise ValueError("velocities must match positions in shape")
        if rho.shape != (n,) or psi.shape != (n,):
            raise ValueError("densities and weights_warm must have length n")
        if not (
            np.all(np.isfinite(pos))
            and np.all(np.isfinite(vel))
            and np.all(np.isfinite(rho))
            and np.all(np.isfinite(psi))
        ):
            raise ValueError("state arrays must be finite")
        if np.any(rho <= 0.0):
            raise ValueError("densities must be positive")
        for a in (pos, vel, rho, psi):
            a.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "densities", rho)
        object.__setattr__(self, "weights_warm", psi)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class SchemeParams:
    """Timestep tau, spring scale epsilon, gravity, and the horizon T."""

    tau: float
    epsilon: float
    gravity: tuple = (0.0, 0.0)
    horizon: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.gravity, dtype=float).reshape(2)
        g.setflags(write=False)
        object.__setattr__(self, "gravity", g)
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be finite and positive")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be finite and positive")
        if not np.all(np.isfinite(g)):
            raise ValueError("gravity must be finite")
        if not (np.isfinite(self.horizon) and self.horizon >= 0.0):
            raise ValueError("horizon must be finite and non-negative")

    @property
    def stability_ratio(self) -> float:
        """tau / epsilon^2, the stiffness number of the explicit scheme."""
        return self.tau / self.epsilon**2


def kick_drift(positions, velocities, anchors, tau, epsilon, gravity=None, densities=None):
    """One symplectic Euler update toward the given anchor points.

    Velocity is kicked from the pre-move positions, then positions drift
    with the post-kick velocity:
        V' = V + tau * ((anchor - position) / epsilon^2 + rho * g)
        P' = P + tau * V'
    """
    force = (anchors - positions) / epsilon**2
    if gravity is not None:
        g = np.asarray(gravity, dtype=float)
        rho = np.ones(positions.shape[0]) if densities is None else np.asarray(densities)
        force = force + rho[:, None] * g[None, :]
    new_velocities = velocities + tau * force
    new_positions = positions + tau * new_velocities
    return new_positions, new_velocities


def init_state(partition, v0, density_fn=None, projection_init=False) -> ParticleState:
    """Initial particles at the cell centroids of an equal-area partition.

    Velocities are v0 evaluated at the centroids, or the cell averages of
    v0 (16-point quadrature per cell) when projection_init is set.
    Densities come from density_fn(positions) and default to 1.
    """
    centers = np.ascontiguousarray(partition.centroids, dtype=float)
    n = centers.shape[0]
    if projection_init:
        velocities = _cell_averages(v0, partition)
    else:
        velocities = np.ascontiguousarray(v0(0.0, centers), dtype=float)
    densities = (
        np.ones(n)
        if density_fn is None
        else np.atleast_1d(np.ascontiguousarray(density_fn(centers), dtype=float))
    )
    return ParticleState(
        step=0,
        time=0.0,
        positions=centers,
        velocities=velocities,
        densities=densities,
        weights_warm=np.zeros(n),
    )


def _quadrature_points(pieces, n_points):
    """Equal-area-ish quadrature nodes and weights on a list of convex pieces.

    Fan-triangulates every piece about its vertex average, apportions
    n_points among the triangles by largest remainder on their areas, and
    splits each triangle into that many equal-area slivers sampled at
    their centroids.  Weights are exact sub-areas, so constants integrate
    exactly.
    """
    tris = []
    for verts in pieces:
        c = verts.mean(axis=0)
        m = verts.shape[0]
        for k in range(m):
            a, b = verts[k], verts[(k + 1) % m]
            area = 0.5 * abs((a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0]))
            if area > 0.0:
                tris.append((c, a, b, area))
    areas = np.array([t[3] for t in tris])
    total = areas.sum()
    share = n_points * areas / total
    counts = np.floor(share).astype(int)
    remainder = n_points - counts.sum()
    if remainder > 0:
        order = np.argsort(-(share - counts), kind="stable")
        counts[order[:remainder]] += 1
    points, weights = [], []
    for (c, a, b, area), m in zip(tris, counts):
        if m == 0:
            continue
        cuts = np.linspace(0.0, 1.0, m + 1)[:, None]
        edge = a[None, :] + cuts * (b - a)[None, :]
        centroids = (c[None, :] + edge[:-1] + edge[1:]) / 3.0
        points.append(centroids)
        weights.append(np.full(m, area / m))
    return np.vstack(points), np.concatenate(weights), total


def _cell_averages(v0, partition, n_points: int = 16) -> np.ndarray:
    """Cell averages of a velocity field by fixed per-cell quadrature."""
    all_points, all_weights, owners = [], [], []
    for i, pieces in enumerate(partition.cells):
        pts, wts, _ = _quadrature_points(pieces, n_points)
        all_points.append(pts)
        all_weights.append(wts)
        owners.append(np.full(pts.shape[0], i))
    pts = np.vstack(all_points)
    wts = np.concatenate(all_weights)
    own = np.concatenate(owners)
    vals = np.ascontiguousarray(v0(0.0, pts), dtype=float)
    n = partition.n_cells
    sums = np.zeros((n, 2))
    sums[:, 0] = np.bincount(own, weights=wts * vals[:, 0], minlength=n)
    sums[:, 1] = np.bincount(own, weights=wts * vals[:, 1], minlength=n)
    cell_areas = np.bincount(own, weights=wts, minlength=n)
    return sums / cell_areas[:, None]


def step(state: ParticleState, params: SchemeParams, domain: Domain):
    """Advance one timestep; returns (new_state, transport solution).

    The transport solution is the one computed at the pre-move positions
    (its barycenters define this step's spring anchors).
    """
    n = state.n_particles
    problem = ot.OTProblem(state.positions, ot.uniform_targets(domain, n), domain)
    solution = ot.solve(problem, state.weights_warm)
    new_positions, new_velocities = kick_drift(
        state.positions,
        state.velocities,
        solution.barycenters,
        params.tau,
        params.epsilon,
        params.gravity,
        state.densities,
    )
    if domain.periodic_x:
        new_positions = new_positions.copy()
        new_positions[:, 0] = domain.wrap_x(new_positions[:, 0])
    _check_collision(new_positions, domain)
    new_state = ParticleState(
        step=state.step + 1,
        time=state.time + params.tau,
        positions=new_positions,
        velocities=new_velocities,
        densities=state.densities,
        weights_warm=solution.weights,
    )
    return new_state, solution


def _check_collision(positions: np.ndarray, domain: Domain):
    if positions.shape[0] < 2:
        return
    pool = (
        replicate_periodic(positions, domain)[0] if domain.periodic_x else positions
    )
    central = pool[1::3] if domain.periodic_x else positions
    try:
        _check_duplicates(central, pool, COINCIDENCE_REL_TOL * domain.diameter)
    except DuplicateSites as exc:
        raise PositionCollision(str(exc)) from exc


def run(state: ParticleState, params: SchemeParams, domain: Domain, observers=()):
    """Run floor(horizon / tau) steps, notifying observers after each.

    Observers are called as observer(step_index, time, new_state,
    transport_solution) with immutable arguments.  Errors from a step are
    re-raised with the failing step index prepended.
    """
    num_steps = int(np.floor(params.horizon / params.tau + 1e-9))
    for _ in range(num_steps):
        try:
            state, solution = step(state, params, domain)
        except OTFluidError as exc:
            raise type(exc)(f"step {state.step + 1}: {exc}") from exc
        for observer in observers:
            observer(state.step, state.time, state, solution)
    return state


def toy_geodesic_reference(h0: float, h1: float, epsilon: float, t):
    """Closed-form penalized-geodesic trajectory near the horizontal axis.

    z(t) = (t, h0 cos(t/epsilon) + epsilon h1 sin(t/epsilon)), the exact
    solution with z(0) = (0, h0) and z'(0) = (1, h1).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    tt = np.asarray(t, dtype=float)
    second = h0 * np.cos(tt / epsilon) + epsilon * h1 * np.sin(tt / epsilon)
    return np.stack([tt, second], axis=-1)

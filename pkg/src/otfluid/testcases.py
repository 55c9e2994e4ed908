"""Built-in simulation setups and their configuration record.

Three named setups are provided: a stationary vortex array on a square
(an explicit steady solution used for error measurement), a shear layer
on a horizontally periodic strip, and a heavy-over-light gravity
inversion on a tall rectangle.  Each preset stores its published
parameter set; the `scale` helper shrinks a preset for desk-size runs
while keeping the mesh-to-spring ratio h/epsilon and the per-step
particle displacement balanced.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import dynamics, tessellation
from .errors import ConfigInvalid
from .geometry import Domain, rectangle

TESTCASES = ("beltrami", "kelvin_helmholtz", "rayleigh_taylor", "custom")
PARTITIONS = ("lloyd", "grid")


def beltrami_velocity(t, points):
    """Stationary vortex-array velocity field on the centered unit square."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.pi * p[:, 0]
    y = np.pi * p[:, 1]
    return np.column_stack([-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)])


def shear_velocity(t, points):
    """Unit speed below the midline, rest above (shear-layer initial data)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    vx = np.where(p[:, 1] < 0.0, 1.0, 0.0)
    return np.column_stack([vx, np.zeros(p.shape[0])])


def zero_velocity(t, points):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.zeros_like(p)


def make_interface_density(eta: float, heavy: float = 3.0, light: float = 1.0):
    """Density profile: `heavy` above the cosine interface, `light` below."""

    def density(points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        above = p[:, 1] > eta * np.cos(np.pi * p[:, 0])
        return np.where(above, heavy, light)

    return density


@dataclass(frozen=True)
class SimConfig:
    """Validated run configuration; mirrors the CLI and JSON field names."""

    testcase: str = "beltrami"
    n_particles: int = 900
    epsilon: float = 0.1
    tau: float = 1.0 / 50.0
    horizon: float = 1.0
    seed: int = 0
    partition: str = "grid"
    snapshot_every: int = 10
    output_dir: str = "out"
    rt_eta: float = 0.2
    gravity: tuple = (0.0, 0.0)
    allow_unstable: bool = False
    projection_init: bool = False

    def __post_init__(self):
        if self.testcase not in TESTCASES:
            raise ConfigInvalid(
                f"testcase: {self.testcase!r} is not one of {TESTCASES}"
            )
        if self.n_particles < 1:
            raise ConfigInvalid("n_particles: must be at least 1")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ConfigInvalid("epsilon: must be finite and positive")
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise ConfigInvalid("tau: must be finite and positive")
        if not (np.isfinite(self.horizon) and self.horizon >= 0.0):
            raise ConfigInvalid("horizon: must be finite and non-negative")
        if self.partition not in PARTITIONS:
            raise ConfigInvalid(
                f"partition: {self.partition!r} is not one of {PARTITIONS}"
            )
        if self.snapshot_every < 1:
            raise ConfigInvalid("snapshot_every: must be at least 1")
        g = tuple(float(v) for v in self.gravity)
        if len(g) != 2 or not all(math.isfinite(v) for v in g):
            raise ConfigInvalid("gravity: must be a finite 2-vector")
        object.__setattr__(self, "gravity", g)
        limit = 0.5 * self.epsilon**2
        if self.tau > limit * (1.0 + 1e-12):
            ratio = self.tau / self.epsilon**2
            message = (
                f"tau: {self.tau:g} exceeds the stability bound epsilon^2/2 = "
                f"{limit:g} (tau/epsilon^2 = {ratio:g})"
            )
            if not self.allow_unstable:
                raise ConfigInvalid(message)
            warnings.warn(message, stacklevel=2)

    def to_dict(self) -> dict:
        return {
            "testcase": self.testcase,
            "n_particles": self.n_particles,
            "epsilon": self.epsilon,
            "tau": self.tau,
            "horizon": self.horizon,
            "seed": self.seed,
            "partition": self.partition,
            "snapshot_every": self.snapshot_every,
            "output_dir": self.output_dir,
            "rt_eta": self.rt_eta,
            "gravity": list(self.gravity),
            "allow_unstable": self.allow_unstable,
            "projection_init": self.projection_init,
        }


PRESETS = {
    "beltrami": dict(
        testcase="beltrami",
        n_particles=900,
        epsilon=0.1,
        tau=1.0 / 50.0,
        horizon=1.0,
        partition="grid",
        allow_unstable=True,
    ),
    "kelvin_helmholtz": dict(
        testcase="kelvin_helmholtz",
        n_particles=300_000,
        epsilon=0.0025,
        tau=0.005,
        horizon=1.0,
        partition="grid",
        allow_unstable=True,
    ),
    "rayleigh_taylor": dict(
        testcase="rayleigh_taylor",
        n_particles=50_000,
        epsilon=0.002,
        tau=0.001,
        horizon=2.0,
        partition="grid",
        gravity=(0.0, -10.0),
        allow_unstable=True,
    ),
    # The custom setup has no published parameter set; default to the
    # largest stable timestep for its epsilon instead of waiving the bound.
    "custom": dict(testcase="custom", epsilon=0.1, tau=0.005),
}


def preset(name: str, **overrides) -> SimConfig:
    """Named parameter set, with keyword overrides applied on top."""
    if name not in PRESETS:
        raise ConfigInvalid(f"testcase: unknown preset {name!r}")
    merged = dict(PRESETS[name])
    merged.update(overrides)
    return SimConfig(**merged)


def scale_config(config: SimConfig, scale: float) -> SimConfig:
    """Shrink a run by `scale`: N / s particles, epsilon and tau times sqrt(s).

    This keeps h / epsilon and the per-step displacement relative to the
    cell size roughly constant, so a scaled run exercises the same
    regimes as the full one at a fraction of the cost.
    """
    if not (math.isfinite(scale) and scale > 0.0):
        raise ConfigInvalid("scale: must be finite and positive")
    if scale == 1.0:
        return config
    root = math.sqrt(scale)
    return replace(
        config,
        n_particles=max(1, round(config.n_particles / scale)),
        epsilon=config.epsilon * root,
        tau=config.tau * root,
    )


def testcase_domain(name: str) -> Domain:
    if name == "beltrami":
        return rectangle(-0.5, 0.5, -0.5, 0.5)
    if name == "kelvin_helmholtz":
        return rectangle(0.0, 2.0, -0.5, 0.5, periodic_x=True)
    if name == "rayleigh_taylor":
        return rectangle(-1.0, 1.0, -3.0, 3.0)
    if name == "custom":
        return rectangle(0.0, 1.0, 0.0, 1.0)
    raise ConfigInvalid(f"testcase: unknown testcase {name!r}")


def grid_dimensions(n: int, aspect: float) -> tuple[int, int]:
    """Factor n = nx * ny with nx / ny as close as possible to `aspect`."""
    best = None
    for ny in range(1, int(math.isqrt(n)) + 1):
        if n % ny:
            continue
        for a, b in ((n // ny, ny), (ny, n // ny)):
            score = abs(math.log((a / b) / aspect))
            if best is None or score < best[0]:
                best = (score, a, b)
    return best[1], best[2]


def build_testcase(config: SimConfig):
    """Materialize a configuration into ready-to-run simulation objects.

    Returns (domain, partition, initial state, scheme parameters,
    reference velocity field or None).  The reference is only available
    for the stationary vortex-array case, where the initial field is an
    exact steady solution.
    """
    domain = testcase_domain(config.testcase)
    if config.partition == "grid":
        xmin, xmax, ymin, ymax = domain.bounds
        nx, ny = grid_dimensions(
            config.n_particles, (xmax - xmin) / (ymax - ymin)
        )
        part = tessellation.grid_partition(domain, nx, ny)
    else:
        part = tessellation.lloyd_partition(domain, config.n_particles, config.seed)

    if config.testcase == "beltrami":
        v0, density_fn, reference = beltrami_velocity, None, beltrami_velocity
    elif config.testcase == "kelvin_helmholtz":
        v0, density_fn, reference = shear_velocity, None, None
    elif config.testcase == "rayleigh_taylor":
        v0 = zero_velocity
        density_fn = make_interface_density(config.rt_eta)
        reference = None
    else:
        v0, density_fn, reference = zero_velocity, None, None

    state = dynamics.init_state(
        part, v0, density_fn, projection_init=config.projection_init
    )
    params = dynamics.SchemeParams(
        tau=config.tau,
        epsilon=config.epsilon,
        gravity=config.gravity,
        horizon=config.horizon,
    )
    return domain, part, state, params, reference

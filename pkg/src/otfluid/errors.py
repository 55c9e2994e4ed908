"""Exception types shared across the package."""


class OTFluidError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(OTFluidError):
    """No sites were supplied."""


class DuplicateSites(OTFluidError):
    """Two sites coincide within the coincidence tolerance."""


class DegenerateCell(OTFluidError):
    """Polygon area is below the machine-scale threshold."""


class NotPeriodic(OTFluidError):
    """Operation requires a periodic domain."""


class NotRectangular(OTFluidError):
    """Operation requires an axis-aligned rectangular domain."""


class DegenerateProblem(OTFluidError):
    """Transport problem is ill-posed (duplicate sites, bad targets)."""


class NewtonStalled(OTFluidError):
    """Damped Newton step size fell below the damping floor."""


class MaxIterationsExceeded(OTFluidError):
    """Newton iteration cap reached before convergence."""


class SingularSystem(OTFluidError):
    """Linear system is singular (adjacency graph disconnected)."""


class PositionCollision(OTFluidError):
    """Two particles collided within the site-coincidence tolerance."""


class ConfigInvalid(OTFluidError):
    """Simulation configuration failed validation."""


class IoFailure(OTFluidError):
    """Snapshot or table could not be written or read."""

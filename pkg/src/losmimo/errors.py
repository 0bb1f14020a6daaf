"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulationError):
    """Invalid or inconsistent configuration (bad key, range, or layout)."""


class GeometryError(SimulationError):
    """Degenerate geometry, e.g. coincident points or a broken antenna frame."""


class DesignError(SimulationError):
    """Patch design parameters produce a non-physical antenna."""


class QuadratureError(SimulationError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class SingularMatrixError(SimulationError):
    """Gram matrix is rank deficient or too ill-conditioned to invert."""

    def __init__(self, message: str, cond_estimate: float = float("inf")):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class InfeasibleRegionError(SimulationError):
    """User drop region is empty or rejection sampling cannot make progress."""


class StatisticalValidityError(SimulationError):
    """Too many Monte Carlo draws were discarded for the estimate to be trusted."""


class CampaignError(SimulationError):
    """Too many drops failed for the campaign aggregate to be meaningful."""

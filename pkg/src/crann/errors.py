"""Exception types shared across the toolkit.

Each failure mode gets its own class so callers (and the CLI exit-code
mapping) can tell usage mistakes, bad data and numeric breakdowns apart.
"""


class CrannError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CrannError):
    """Operand shapes are incompatible."""


class ContractError(CrannError):
    """An operation was invoked outside its documented contract."""


class ConstructionError(CrannError):
    """A component was configured with invalid structural arguments."""


class IngestionError(CrannError):
    """Raw input files are malformed or inconsistent."""


class NormalizationError(CrannError):
    """Min-max constants cannot be fitted or applied."""


class WindowingError(CrannError):
    """The series is too short for the requested sample windows."""


class PlanningError(CrannError):
    """A cross-validation plan cannot be built from the given sizes."""


class TrainingError(CrannError):
    """Optimization failed (divergence, non-finite gradients)."""


class NumericError(CrannError):
    """A forward evaluation produced non-finite values."""


class MetricError(CrannError):
    """A metric is undefined for the given inputs."""


class ConfigError(CrannError):
    """A run configuration document is invalid."""

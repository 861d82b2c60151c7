"""Exception types shared across the toolkit."""


class CimpccError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CimpccError):
    """A track or telemetry file could not be parsed."""


class DegenerateTrack(CimpccError):
    """The centerline is unusable (too few points, duplicates, zero width)."""


class NumericalDegeneracy(CimpccError):
    """A curvature denominator collapsed, signalling near-duplicate points."""


class InvalidWindow(CimpccError):
    """Moving-average window is even, nonpositive, or longer than the track."""


class DomainError(CimpccError):
    """An input left its documented domain."""


class InvalidFactor(CimpccError):
    """A velocity-bound scaling factor is out of range."""


class SteeringSingularity(CimpccError):
    """|steering angle| >= pi/2, where tan() blows up."""


class DimensionMismatch(CimpccError):
    """Arrays handed to an evaluator have inconsistent shapes."""


class ConfigurationError(CimpccError):
    """Planner or run configuration is internally inconsistent."""


class SolverFailure(CimpccError):
    """The NLP solve produced no usable iterate for this control cycle."""


class OffTrack(CimpccError):
    """The vehicle left the track corridor beyond the recovery margin."""


class NoCompletedLaps(CimpccError):
    """Lap statistics were requested before any lap was completed."""


class RaceAborted(CimpccError):
    """A closed-loop race ended early; partial telemetry is attached.

    Attributes
    ----------
    records : list
        Telemetry collected up to the abort.
    stats : LapStats or None
        Statistics over any laps completed before the abort.
    method : str or None
        Which planner mode aborted (set by comparison runs).
    """

    def __init__(self, reason, records=None, stats=None, method=None):
        super().__init__(reason)
        self.reason = reason
        self.records = records if records is not None else []
        self.stats = stats
        self.method = method

"""Exception hierarchy for the toolkit.

Every error raised across module boundaries derives from WxError so callers
(and the CLI exit-code mapping) can distinguish validation problems, file
format problems, and backend failures without string matching.
"""

from __future__ import annotations


class WxError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(WxError):
    """Invalid configuration or parameter value."""


class IncompatibleFieldsError(WxError):
    """Two fieldsets do not share grid, catalog, or valid time."""


class UnknownVariableError(WxError):
    """Variable name not present in the catalog."""


class EmptyRegionError(WxError):
    """Region does not intersect the grid."""


class NonFiniteStateError(WxError):
    """A field contains NaN or Inf values."""


class StateFormatError(WxError):
    """Base class for state-file format violations."""


class BadMagicError(StateFormatError):
    """State file does not start with the expected magic bytes."""


class BadVersionError(StateFormatError):
    """State file declares an unsupported format version."""


class DimMismatchError(StateFormatError):
    """Declared dimensions disagree with the payload or the catalog."""


class TruncatedPayloadError(StateFormatError):
    """State file ends before the declared payload is complete."""


class CatalogMismatchError(StateFormatError):
    """State-file variable table disagrees with the fixed catalog."""


class StatsError(WxError):
    """Base class for per-variable statistics problems."""


class IncompleteStatsError(StatsError):
    """Stats file is missing variables, has extras, or is malformed."""


class DegenerateStdError(StatsError):
    """A variable has zero (or negative) standard deviation."""


class MissingStatsError(StatsError):
    """Stats object does not cover every catalog variable."""


class DistributionSpecError(WxError):
    """Random-IC distribution parameters are invalid."""


class BackendError(WxError):
    """Base class for forecast-backend failures."""


class BackendProcessError(BackendError):
    """External backend process exited nonzero."""

    def __init__(self, message: str, exit_code: int | None = None):
        super().__init__(message)
        self.exit_code = exit_code


class BackendTimeoutError(BackendError):
    """External backend did not finish within the configured timeout."""


class BadBackendOutputError(BackendError):
    """External backend wrote a missing or invalid output state."""


class RolloutError(WxError):
    """Forecast rollout failed at a specific step."""

    def __init__(self, message: str, step_index: int, partial_states: tuple = ()):
        super().__init__(message)
        self.step_index = step_index
        self.partial_states = partial_states


class RolloutDivergedError(RolloutError):
    """Backend produced a non-finite state (divergent forecast)."""


class TrackingError(WxError):
    """Storm tracking failed."""


class NoCandidateError(TrackingError):
    """No grid points remain in the storm-center search set."""


class UnalignedTrajectoriesError(TrackingError):
    """Trajectories differ in length or timestamps."""


class AllTrialsFailedError(WxError):
    """No successful trial is available for median selection."""

"""Failures of whole studies, on top of the solver errors in ``spacetime.exceptions``."""
from spacetime.exceptions import SpaceTimeError, UnsupportedConfigurationError


class ConfigError(UnsupportedConfigurationError):
    """Invalid run configuration (unreadable file or failed validation)."""


class StudyFailure(SpaceTimeError, RuntimeError):
    """One or more levels of a ladder or sweep failed; the partial table was written."""


class IdentityFailure(SpaceTimeError, RuntimeError):
    """A verification residual exceeded its threshold."""


def exit_code_for(exc: Exception) -> int:
    """0 success, 2 solver failure, 3 identity failure, 4 config error."""
    if isinstance(exc, IdentityFailure):
        return 3
    if isinstance(exc, ValueError):
        return 4
    return 2

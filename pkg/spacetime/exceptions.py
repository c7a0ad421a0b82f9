"""Error hierarchy of the numerical core.

Every error carries a JSON-friendly ``details`` mapping so the management
commands can report failures as ``{"error": {...}}`` payloads.
"""
from __future__ import annotations

from typing import Any, Dict


def _plain(value: Any) -> Any:
    # numpy scalars and arrays are not JSON serialisable
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


class SpaceTimeError(Exception):
    """Base class for failures raised by the space-time solvers."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = {k: _plain(v) for k, v in details.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'type': self.__class__.__name__,
            'message': self.message,
            'details': self.details,
        }


class MeshError(SpaceTimeError, ValueError):
    pass


class SpaceError(SpaceTimeError, ValueError):
    pass


class QuadratureError(SpaceTimeError, ValueError):
    pass


class PartitionError(SpaceTimeError, ValueError):
    pass


class UnsupportedConfigurationError(SpaceTimeError, ValueError):
    pass


class LinearSolverError(SpaceTimeError, RuntimeError):
    """Linear solve failed; ``details`` holds the achieved residual."""


class EigenSolverError(SpaceTimeError, RuntimeError):
    pass


class NewtonDivergenceError(SpaceTimeError, RuntimeError):
    """Newton iteration failed on a slab; ``details`` holds the history."""

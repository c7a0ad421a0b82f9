"""Problem data and the built-in registry of manufactured solutions and profiles.

Callables take points as an ``(npts, d)`` array. Time-dependent ones take
``(t, X)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .exceptions import UnsupportedConfigurationError

SpaceFunction = Callable[[np.ndarray], np.ndarray]
SpaceTimeFunction = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution with the analytic derivatives the forcing and projections need."""

    name: str
    value: SpaceTimeFunction
    time_derivative: SpaceTimeFunction
    gradient: SpaceTimeFunction
    laplacian: SpaceTimeFunction

    def forcing(self, epsilon: float) -> SpaceTimeFunction:
        def f(t, X):
            u = self.value(t, X)
            return self.time_derivative(t, X) - self.laplacian(t, X) + (u ** 3 - u) / epsilon ** 2
        return f

    def at(self, t: float) -> SpaceFunction:
        return lambda X: self.value(t, X)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    epsilon: float
    final_time: float
    initial: SpaceFunction
    forcing: Optional[SpaceTimeFunction] = None
    exact: Optional[ManufacturedSolution] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise UnsupportedConfigurationError('epsilon must be positive', epsilon=self.epsilon)
        if not self.final_time > 0:
            raise UnsupportedConfigurationError('final time must be positive', final_time=self.final_time)

    @property
    def forcing_is_zero(self) -> bool:
        return self.forcing is None


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

def _zero(t, X):
    return np.zeros(len(X))


def _zero_gradient(t, X):
    return np.zeros_like(X, dtype=float)


ZERO = ManufacturedSolution('zero', _zero, _zero, _zero_gradient, _zero)

EXPSINE = ManufacturedSolution(
    'expsine',
    value=lambda t, X: np.exp(-t) * np.sin(np.pi * X[:, 0]),
    time_derivative=lambda t, X: -np.exp(-t) * np.sin(np.pi * X[:, 0]),
    gradient=lambda t, X: (np.exp(-t) * np.pi * np.cos(np.pi * X[:, 0]))[:, None],
    laplacian=lambda t, X: -np.pi ** 2 * np.exp(-t) * np.sin(np.pi * X[:, 0]),
)


def _sin2(X):
    return np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])


EXPSINE2D = ManufacturedSolution(
    'expsine2d',
    value=lambda t, X: np.exp(-t) * _sin2(X),
    time_derivative=lambda t, X: -np.exp(-t) * _sin2(X),
    gradient=lambda t, X: np.pi * np.exp(-t) * np.column_stack([
        np.cos(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1]),
        np.sin(np.pi * X[:, 0]) * np.cos(np.pi * X[:, 1]),
    ]),
    laplacian=lambda t, X: -2.0 * np.pi ** 2 * np.exp(-t) * _sin2(X),
)

# (1 + t) x (1 - x) lies in P2 x P_k for k >= 1
TRIALSPACE = ManufacturedSolution(
    'trialspace',
    value=lambda t, X: (1.0 + t) * X[:, 0] * (1.0 - X[:, 0]),
    time_derivative=lambda t, X: X[:, 0] * (1.0 - X[:, 0]),
    gradient=lambda t, X: ((1.0 + t) * (1.0 - 2.0 * X[:, 0]))[:, None],
    laplacian=lambda t, X: np.full(len(X), -2.0 * (1.0 + t)),
)


def interface_profile(epsilon: float) -> SpaceFunction:
    """``tanh((x - 1/2) / (sqrt(2) eps))``, a single developed interface."""
    return lambda X: np.tanh((X[:, 0] - 0.5) / (np.sqrt(2.0) * epsilon))


def small_sine_profile(X: np.ndarray) -> np.ndarray:
    return 0.1 * np.prod(np.sin(np.pi * X), axis=1)


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    kind: str
    dimensions: Tuple[int, ...]
    description: str
    solution: Optional[ManufacturedSolution] = None
    profile: Optional[Callable[[float], SpaceFunction]] = None

    @property
    def has_exact_solution(self) -> bool:
        return self.solution is not None and self.kind == 'manufactured'

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'kind': self.kind,
            'dimensions': list(self.dimensions),
            'description': self.description,
            'has_exact_solution': self.has_exact_solution,
        }


REGISTRY: Dict[str, RegistryEntry] = {
    entry.name: entry for entry in (
        RegistryEntry('zero', 'manufactured', (1, 2), 'u = 0, f = 0', solution=ZERO),
        RegistryEntry('expsine', 'manufactured', (1,), 'u = exp(-t) sin(pi x)', solution=EXPSINE),
        RegistryEntry('expsine2d', 'manufactured', (2,), 'u = exp(-t) sin(pi x) sin(pi y)', solution=EXPSINE2D),
        RegistryEntry('trialspace', 'manufactured', (1,), 'u = (1 + t) x (1 - x)', solution=TRIALSPACE),
        RegistryEntry('interface', 'initial_profile', (1, 2),
                      'u0 = tanh((x - 1/2) / (sqrt(2) eps)), f = 0', profile=interface_profile),
        RegistryEntry('smallsine', 'initial_profile', (1, 2),
                      'u0 = 0.1 prod sin(pi x_i), f = 0', profile=lambda epsilon: small_sine_profile),
    )
}


def registry_entry(name: str, dimension: int) -> RegistryEntry:
    entry = REGISTRY.get(name)
    if entry is None:
        raise UnsupportedConfigurationError('unknown problem id', problem=name, known=sorted(REGISTRY))
    if dimension not in entry.dimensions:
        raise UnsupportedConfigurationError('problem not available in this dimension', problem=name,
                                            dimension=dimension, dimensions=list(entry.dimensions))
    return entry


def build_problem(name: str, epsilon: float, final_time: float, dimension: int) -> ProblemSpec:
    entry = registry_entry(name, dimension)
    if entry.kind == 'manufactured':
        solution = entry.solution
        forcing = None if solution is ZERO else solution.forcing(epsilon)
        return ProblemSpec(name=name, epsilon=epsilon, final_time=final_time, initial=solution.at(0.0),
                           forcing=forcing, exact=solution)
    return ProblemSpec(name=name, epsilon=epsilon, final_time=final_time, initial=entry.profile(epsilon))

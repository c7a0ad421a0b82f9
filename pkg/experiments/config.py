"""Validated run configurations and the numerical objects they describe."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

from django.conf import settings
from rest_framework.exceptions import ValidationError

from spacetime.forward import NewtonConfig
from spacetime.linalg import LinearSolveConfig
from spacetime.mesh import build_interval_mesh, build_space, build_square_mesh
from spacetime.problems import build_problem
from spacetime.timebasis import TimePartition, make_time_basis

from .exceptions import ConfigError
from .serializers import RunConfigSerializer


@dataclass(frozen=True)
class RunConfig:
    data: Dict[str, Any]

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'RunConfig':
        serializer = RunConfigSerializer(data=payload)
        try:
            serializer.is_valid(raise_exception=True)
        except ValidationError as exc:
            raise ConfigError('invalid run configuration', errors=exc.detail) from exc
        return cls(data=json.loads(json.dumps(serializer.validated_data)))

    # -- accessors -------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.data['dimension']

    @property
    def n_cells(self) -> int:
        mesh = self.data['mesh']
        return mesh['n'] if self.dimension == 1 else mesh['n_per_side']

    @property
    def final_time(self) -> float:
        return self.data['time']['T']

    @property
    def n_slabs(self) -> int:
        return self.data['time']['N_slabs']

    @property
    def k(self) -> int:
        return self.data['time']['k']

    @property
    def degree_l(self) -> int:
        return self.data['space']['degree_l']

    @property
    def epsilon(self) -> float:
        return self.data['epsilon']

    @property
    def problem_id(self) -> str:
        return self.data['problem']

    @property
    def run_id(self) -> str:
        return self.data['output']['run_id']

    @property
    def output_dir(self) -> Path:
        directory = self.data['output'].get('directory') or settings.ALLEN_CAHN['OUTPUT_DIR']
        return Path(directory) / self.run_id

    @property
    def config_hash(self) -> str:
        return config_hash(self.data)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    # -- variants ---------------------------------------------------------

    def replace(self, n_cells=None, n_slabs=None, epsilon=None, run_id=None) -> 'RunConfig':
        data = self.to_dict()
        if n_cells is not None:
            data['mesh']['n' if self.dimension == 1 else 'n_per_side'] = n_cells
        if n_slabs is not None:
            data['time']['N_slabs'] = n_slabs
        if epsilon is not None:
            data['epsilon'] = epsilon
        if run_id is not None:
            data['output']['run_id'] = run_id
        return RunConfig(data=data)

    # -- builders ---------------------------------------------------------

    def build_mesh(self):
        if self.dimension == 1:
            return build_interval_mesh(0.0, 1.0, self.n_cells)
        return build_square_mesh(self.n_cells)

    def build_space(self):
        return build_space(self.build_mesh(), self.degree_l, self.data.get('quadrature', {}).get('space_order'))

    def build_basis(self):
        quadrature = self.data.get('quadrature', {})
        return make_time_basis(self.k, quadrature.get('time_points'),
                               allow_under_integration=quadrature.get('allow_under_integration', False))

    def build_partition(self) -> TimePartition:
        ratio = self.data['time'].get('grading_ratio', 1.0)
        if ratio == 1.0:
            return TimePartition.uniform(self.final_time, self.n_slabs)
        return TimePartition.graded(self.final_time, self.n_slabs, ratio)

    def build_problem(self):
        return build_problem(self.problem_id, self.epsilon, self.final_time, self.dimension)

    def linear_config(self) -> LinearSolveConfig:
        defaults = settings.ALLEN_CAHN['LINEAR']
        solver = self.data.get('solver', {})
        return LinearSolveConfig(
            method=solver.get('linear_method', defaults['method']),
            rel_tolerance=solver.get('linear_tol', defaults['rel_tolerance']),
            max_iterations=solver.get('linear_max_iter', defaults['max_iterations']),
        )

    def newton_config(self) -> NewtonConfig:
        defaults = settings.ALLEN_CAHN['NEWTON']
        solver = self.data.get('solver', {})
        return NewtonConfig(
            abs_tol=solver.get('newton_abs_tol', defaults['abs_tol']),
            rel_tol=solver.get('newton_rel_tol', defaults['rel_tol']),
            max_iter=solver.get('max_iter', defaults['max_iter']),
            damping=solver.get('damping', defaults['damping']),
            linear=self.linear_config(),
        )


def canonical_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(',', ':'))


def config_hash(payload: Dict[str, Any]) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON, output block excluded."""
    physics = {key: value for key, value in payload.items() if key != 'output'}
    return hashlib.sha256(canonical_json(physics).encode('utf-8')).hexdigest()[:16]


def load_config(path, out=None) -> RunConfig:
    """Read and validate a JSON run config; ``out`` overrides ``output.directory``."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError('cannot read config file', path=str(path), reason=str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError('config file is not valid JSON', path=str(path), reason=str(exc)) from exc
    if not isinstance(payload, dict):
        raise ConfigError('config must be a JSON object', path=str(path))
    if out is not None:
        payload.setdefault('output', {})
        if isinstance(payload['output'], dict):
            payload['output']['directory'] = str(out)
    return RunConfig.from_dict(payload)

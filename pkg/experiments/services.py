"""Run bookkeeping, result files and the single-level evaluation shared by every study."""
from __future__ import annotations

import json
import logging
import math
import platform
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd
from django.conf import settings
from django.utils import timezone

from spacetime.diagnostics import NORM_FIELDS, compute_norms, stability_scalings
from spacetime.exceptions import SpaceTimeError
from spacetime.forward import DgSolution, solve_forward
from spacetime.problems import ProblemSpec

from .config import RunConfig
from .models import IdentityCheck, NormRecord, Run

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
NORM_COLUMNS = ['run_id', 'config_hash', 'level', 'measure', 'k', 'l', 'N', 'n_cells', 'h', 'tau', 'epsilon',
                *NORM_FIELDS, 'status', 'message']
RECORD_FIELDS = ('level', 'k', 'l', 'N', 'n_cells', 'h', 'tau', 'epsilon', *NORM_FIELDS, 'status', 'message')


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f'{type(value).__name__} is not JSON serialisable')


def write_json(path: Path, payload: Any) -> Path:
    with open(path, 'w') as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write('\n')
    return path


def write_table(path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """CSV with a fixed column order and full float precision, no index and no timestamps."""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format='%.16e')
    return path


def _package_versions() -> Dict[str, str]:
    versions = {'python': platform.python_version()}
    for name in ('numpy', 'scipy', 'Django', 'djangorestframework', 'celery'):
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def write_manifest(run: Run, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Timestamps live here and never in the CSV tables."""
    payload = {
        'run_id': run.run_id,
        'command': run.command,
        'status': run.status,
        'config': run.config,
        'config_hash': run.config_hash,
        'started_at': run.created_at.isoformat(),
        'updated_at': timezone.now().isoformat(),
        'versions': _package_versions(),
        **(extra or {}),
    }
    return write_json(Path(run.output_dir) / MANIFEST, payload)


# --------------------------------------------------------------------------
# run rows
# --------------------------------------------------------------------------

def start_run(command: str, config: RunConfig) -> Run:
    """Create (or reset) the Run row and the output directory for ``config.run_id``."""
    output_dir = config.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    run, created = Run.objects.update_or_create(
        run_id=config.run_id,
        defaults={
            'command': command,
            'status': Run.Status.RUNNING,
            'config': config.to_dict(),
            'config_hash': config.config_hash,
            'output_dir': str(output_dir),
            'summary': None,
            'error': None,
        },
    )
    if not created:
        run.norm_records.all().delete()
        run.identity_checks.all().delete()
    write_manifest(run)
    logger.info('%s run %s started (config %s)', command, run.run_id, run.config_hash)
    return run


def finish_run(run: Run, summary: Dict[str, Any]) -> Run:
    run.status = Run.Status.SUCCEEDED
    run.summary = json.loads(json.dumps(summary, default=_json_default))
    run.save(update_fields=['status', 'summary', 'updated_at'])
    write_manifest(run, {'summary': run.summary})
    logger.info('%s run %s succeeded', run.command, run.run_id)
    return run


def fail_run(run: Run, exc: SpaceTimeError, summary: Optional[Dict[str, Any]] = None) -> Run:
    run.status = Run.Status.FAILED
    run.error = exc.to_dict()
    if summary is not None:
        run.summary = json.loads(json.dumps(summary, default=_json_default))
    run.save(update_fields=['status', 'error', 'summary', 'updated_at'])
    write_manifest(run, {'error': run.error, 'summary': run.summary})
    logger.warning('%s run %s failed: %s', run.command, run.run_id, exc.message)
    return run


def record_norms(run: Run, rows: Iterable[Dict[str, Any]]) -> List[NormRecord]:
    return NormRecord.objects.bulk_create([
        NormRecord(run=run, **{name: row.get(name) for name in RECORD_FIELDS}) for row in rows
    ])


def record_check(run: Run, name: str, outcome: str, lhs=None, rhs=None, residual=None, threshold=None,
                 detail=None) -> IdentityCheck:
    return IdentityCheck.objects.create(
        run=run, name=name, outcome=outcome, lhs=lhs, rhs=rhs, residual=residual, threshold=threshold,
        detail=json.loads(json.dumps(detail, default=_json_default)) if detail is not None else None,
    )


# --------------------------------------------------------------------------
# single level
# --------------------------------------------------------------------------

def solve_case(config: RunConfig, on_slab=None) -> tuple:
    problem = config.build_problem()
    sol = solve_forward(problem, config.build_space(), config.build_partition(), config.build_basis(),
                        config.newton_config(), on_slab)
    return problem, sol


def forcing_norm(problem: ProblemSpec, sol: DgSolution) -> float:
    """``|f|_{L2 L2}`` on the reference time rule; zero for unforced problems."""
    if problem.forcing_is_zero:
        return 0.0
    space, basis = sol.space, sol.basis
    total = 0.0
    for slab in sol.slabs:
        for s, w in zip(basis.ref_points, basis.ref_weights):
            values = space.sample(lambda X: problem.forcing(slab.t_start + slab.tau * s, X))
            total += slab.tau * w * float(space.weights @ values ** 2)
    return math.sqrt(total)


def data_norm(problem: ProblemSpec, sol: DgSolution) -> float:
    """``|u_h^0| + |f|_{L2 H^-1}``, the H^-1 part bounded by ``|f|_{L2 L2} / pi``."""
    u0 = sol.initial
    return math.sqrt(float(u0 @ (sol.space.mass @ u0))) + forcing_norm(problem, sol) / math.pi


def base_row(config: RunConfig, level: int) -> Dict[str, Any]:
    return {
        'run_id': config.run_id,
        'config_hash': config.config_hash,
        'level': level,
        'k': config.k,
        'l': config.degree_l,
        'N': config.n_slabs,
        'n_cells': config.n_cells,
        'h': config.build_mesh().mesh_size_h,
        'tau': config.build_partition().tau,
        'epsilon': config.epsilon,
    }


def evaluate_level(config: RunConfig, level: int = 0, measure: str = 'error') -> Dict[str, Any]:
    """Solve one configuration and return its norm row.

    ``measure='error'`` reports norms of ``u_h - u`` (the problem needs an
    exact solution), ``'solution'`` norms of ``u_h`` plus the stability
    scalings. Solver failures come back as a ``failed`` row.
    """
    row = base_row(config, level)
    row['measure'] = measure
    try:
        problem, sol = solve_case(config)
        reference = problem.exact if measure == 'error' else None
        report = compute_norms(sol, reference, sample_factor=settings.ALLEN_CAHN['SAMPLE_FACTOR'])
    except SpaceTimeError as exc:
        logger.warning('level %d (n=%d, N=%d, eps=%g) failed: %s', level, config.n_cells, config.n_slabs,
                       config.epsilon, exc.message)
        row.update({name: None for name in NORM_FIELDS})
        row.update(status='failed', message=exc.message, error=exc.to_dict())
        return row
    row.update(report.as_row())
    row.update(status='ok', message='')
    if measure == 'solution':
        row.update(stability_scalings(report, config.epsilon, config.final_time, data_norm(problem, sol)))
    row['newton_iterations'] = int(sum(len(slab.newton_history) - 1 for slab in sol.slabs))
    logger.info('level %d: n=%d N=%d eps=%g %s', level, config.n_cells, config.n_slabs, config.epsilon,
                ' '.join(f'{name}={row[name]:.3e}' for name in NORM_FIELDS))
    return row


def mesh_guidance(config: RunConfig) -> str:
    """The error estimates assume ``tau + h`` small against ``eps^4``; reported, not enforced."""
    h = config.build_mesh().mesh_size_h
    tau = config.build_partition().tau
    return (f'tau + h = {tau + h:.3e}, eps^4 = {config.epsilon ** 4:.3e}: '
            f'the error estimates assume tau + h <= C eps^4 with an unknown constant C')


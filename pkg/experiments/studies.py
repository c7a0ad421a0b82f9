"""The five studies behind the management commands.

Each study opens a Run row, writes its files under ``<output>/<run_id>/``
and marks the run succeeded or failed. Solver errors propagate after the
run has been marked failed; ladder and sweep failures raise StudyFailure
once the partial table is on disk.
"""
from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from django.conf import settings

from spacetime.checkpoint import save_checkpoint
from spacetime.companions import duality_identity_residual, local_projection, local_projection_defects, \
    solve_backward_dual
from spacetime.diagnostics import compute_norms, energy_trace, observed_orders, spectrum_along_solution
from spacetime.exceptions import SpaceTimeError
from spacetime.forward import solve_forward, stability_balance
from spacetime.problems import ProblemSpec, registry_entry
from spacetime.timebasis import characteristic_residuals, dg_time_operators, discrete_characteristic, \
    sup_norm_scan

from .config import RunConfig
from .exceptions import ConfigError, IdentityFailure, StudyFailure
from .models import IdentityCheck
from .services import NORM_COLUMNS, base_row, fail_run, finish_run, mesh_guidance, record_check, record_norms, \
    solve_case, start_run, write_json, write_table
from .tasks import dispatch_levels

logger = logging.getLogger(__name__)

REFINE_MODES = ('time', 'space', 'both')
ORDER_FIELDS = ('L2L2', 'LinfL2', 'L2H1', 'L4L4', 'L4L2', 'X')
SCALED_FIELDS = ('L2L2_scaled', 'eps_X', 'eps_L4L4_sq')
CONVERGENCE_COLUMNS = NORM_COLUMNS + ['X'] + [f'order_{name}' for name in ORDER_FIELDS]
SWEEP_COLUMNS = NORM_COLUMNS + list(SCALED_FIELDS)
CHARACTERISTIC_GRID = 101


def _thresholds() -> Dict[str, float]:
    return settings.ALLEN_CAHN['THRESHOLDS']


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

def run_solve(config: RunConfig) -> Dict[str, Any]:
    run = start_run('solve', config)
    try:
        problem, sol = solve_case(config)
        save_checkpoint(sol, config.output_dir / 'checkpoint', meta={
            'problem': config.problem_id, 'epsilon': config.epsilon, 'config_hash': config.config_hash,
        })
        reference = problem.exact
        report = compute_norms(sol, reference, sample_factor=settings.ALLEN_CAHN['SAMPLE_FACTOR'])
    except SpaceTimeError as exc:
        fail_run(run, exc)
        raise
    row = base_row(config, 0)
    row.update(report.as_row(), measure='error' if reference is not None else 'solution', status='ok', message='')
    write_table(config.output_dir / 'norms.csv', [row], NORM_COLUMNS)
    write_json(config.output_dir / 'norms.json', report.to_dict())
    record_norms(run, [row])
    summary = {
        'norms': report.as_row(),
        'measure': row['measure'],
        'newton_iterations': [len(slab.newton_history) - 1 for slab in sol.slabs],
        'guidance': mesh_guidance(config),
    }
    finish_run(run, summary)
    return summary


# --------------------------------------------------------------------------
# convergence
# --------------------------------------------------------------------------

def ladder(config: RunConfig, levels: int, refine: str) -> List[RunConfig]:
    """Synchronized halving: h, tau or both halve from one level to the next."""
    configs = []
    for level in range(levels):
        factor = 2 ** level
        configs.append(config.replace(
            n_cells=config.n_cells * factor if refine in ('space', 'both') else None,
            n_slabs=config.n_slabs * factor if refine in ('time', 'both') else None,
            run_id=f'{config.run_id}-L{level}',
        ))
    return configs


def convergence_table(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Adds ``X = LinfL2 + L2H1`` and ``order_<norm>`` between consecutive ok rows."""
    table = []
    for row in rows:
        row = dict(row)
        ok = row['status'] == 'ok'
        row['X'] = row['LinfL2'] + row['L2H1'] if ok else None
        table.append(row)
    for name in ORDER_FIELDS:
        table[0][f'order_{name}'] = None
        for previous, row in zip(table, table[1:]):
            if previous['status'] == 'ok' and row['status'] == 'ok':
                row[f'order_{name}'] = observed_orders([previous[name], row[name]])[0]
            else:
                row[f'order_{name}'] = None
    return table


def run_convergence(config: RunConfig, levels: int = 3, refine: str = 'both',
                    parallel: bool = False) -> Dict[str, Any]:
    if levels < 3:
        raise ConfigError('a convergence study needs at least three levels', levels=levels)
    if refine not in REFINE_MODES:
        raise ConfigError('unknown refinement mode', refine=refine, choices=list(REFINE_MODES))
    if not registry_entry(config.problem_id, config.dimension).has_exact_solution:
        raise ConfigError('convergence studies need a manufactured solution', problem=config.problem_id)

    run = start_run('convergence', config)
    rows = dispatch_levels(ladder(config, levels, refine), 'error', parallel=parallel, stop_on_failure=True)
    for row in rows:
        row['run_id'] = config.run_id
    table = convergence_table(rows)
    write_table(config.output_dir / 'convergence.csv', table, CONVERGENCE_COLUMNS)
    record_norms(run, table)
    summary = {
        'refine': refine,
        'levels': levels,
        'completed_levels': sum(row['status'] == 'ok' for row in table),
        'finest_orders': {name: table[-1][f'order_{name}'] for name in ORDER_FIELDS},
        'guidance': mesh_guidance(config),
    }
    failed = [row for row in table if row['status'] == 'failed']
    if failed:
        exc = StudyFailure('convergence level failed', levels=[row['level'] for row in failed],
                           errors=[row.get('error') for row in failed])
        fail_run(run, exc, summary)
        raise exc
    finish_run(run, summary)
    return summary


# --------------------------------------------------------------------------
# stability sweep
# --------------------------------------------------------------------------

def _check_epsilons(epsilons: Sequence[float]) -> List[float]:
    epsilons = [float(eps) for eps in epsilons]
    if not epsilons:
        raise ConfigError('at least one epsilon is required')
    if any(not eps > 0 for eps in epsilons):
        raise ConfigError('epsilons must be positive', epsilons=epsilons)
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigError('epsilons must be strictly descending', epsilons=epsilons)
    return epsilons


def _spread(values: Sequence[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None and v > 0]
    return max(values) / min(values) if values else None


def run_stability_sweep(config: RunConfig, epsilons: Sequence[float], parallel: bool = False) -> Dict[str, Any]:
    epsilons = _check_epsilons(epsilons)
    run = start_run('stability_sweep', config)
    configs = [config.replace(epsilon=eps, run_id=f'{config.run_id}-eps{i}') for i, eps in enumerate(epsilons)]
    rows = dispatch_levels(configs, 'solution', parallel=parallel)
    for row in rows:
        row['run_id'] = config.run_id
    write_table(config.output_dir / 'stability_sweep.csv', rows, SWEEP_COLUMNS)
    record_norms(run, rows)
    ok = [row for row in rows if row['status'] == 'ok']
    summary = {
        'epsilons': epsilons,
        'failed_epsilons': [row['epsilon'] for row in rows if row['status'] == 'failed'],
        'spread': {name: _spread([row[name] for row in ok]) for name in ('L2L2', 'eps_X', 'eps_L4L4_sq')},
    }
    if summary['failed_epsilons']:
        exc = StudyFailure('stability sweep finished with failed epsilons', epsilons=summary['failed_epsilons'])
        fail_run(run, exc, summary)
        raise exc
    finish_run(run, summary)
    return summary


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def _unforced(problem: ProblemSpec) -> ProblemSpec:
    return ProblemSpec(name=f'{problem.name}-unforced', epsilon=problem.epsilon, final_time=problem.final_time,
                       initial=problem.initial)


def _check(checks: list, name: str, residual: float, threshold: float, **detail) -> None:
    outcome = IdentityCheck.Outcome.PASSED if residual <= threshold else IdentityCheck.Outcome.FAILED
    checks.append({'name': name, 'outcome': outcome, 'residual': float(residual), 'threshold': threshold,
                   **detail})


def _projection_source(problem: ProblemSpec):
    if problem.exact is not None:
        return problem.exact.value
    return lambda t, X: (1.0 + t) * problem.initial(X)


def verification_checks(config: RunConfig) -> List[Dict[str, Any]]:
    thresholds = _thresholds()
    problem, u_h = solve_case(config)
    space, basis, partition = u_h.space, u_h.basis, u_h.partition
    checks: List[Dict[str, Any]] = []

    phi_h = solve_backward_dual(u_h, problem, config.linear_config())
    duality = duality_identity_residual(u_h, phi_h, problem)
    _check(checks, 'duality', duality.residual, thresholds['duality'], lhs=duality.lhs, rhs=duality.rhs,
           detail=duality.details)

    balances = [stability_balance(u_h, n, problem) for n in range(1, u_h.n_slabs + 1)]
    worst = max(balances, key=lambda b: b.residual)
    _check(checks, 'stability_balance', worst.residual, thresholds['balance'], lhs=worst.lhs, rhs=worst.rhs,
           detail={'slab': worst.slab_index, 'terms': worst.terms})

    if basis.degree_k == 0:
        checks.append({'name': 'energy', 'outcome': IdentityCheck.Outcome.SKIPPED, 'residual': None,
                       'threshold': thresholds['energy'], 'detail': {'reason': 'skipped (k=0)'}})
    else:
        unforced = problem if problem.forcing_is_zero else _unforced(problem)
        flow = u_h if unforced is problem else solve_forward(unforced, space, partition, basis,
                                                             config.newton_config())
        rows = energy_trace(flow, unforced)
        relative = [row.residual / row.scale for row in rows]
        _check(checks, 'energy', max(relative), thresholds['energy'],
               detail={'problem': unforced.name, 'per_slab': relative})

    source = _projection_source(problem)
    defects = []
    for n in range(1, partition.n_slabs + 1):
        W = local_projection(source, n, space, partition, basis, config.linear_config())
        defects.append(float(local_projection_defects(source, W, n, space, partition, basis).max()))
    _check(checks, 'local_projection_moments', max(defects), thresholds['moments'], detail={'per_slab': defects})

    cuts = np.linspace(0.0, 1.0, CHARACTERISTIC_GRID)
    moment_residual = agreement = 0.0
    for t_hat in cuts:
        rho = discrete_characteristic(basis.degree_k, t_hat)
        explicit = discrete_characteristic(basis.degree_k, t_hat, method='explicit')
        moment_residual = max(moment_residual, float(characteristic_residuals(rho).max()),
                              float(characteristic_residuals(explicit).max()))
        agreement = max(agreement, float(np.abs(rho.coefficients - explicit.coefficients).max()))
    _check(checks, 'characteristic_moments', moment_residual, thresholds['moments'],
           detail={'cut_points': CHARACTERISTIC_GRID, 'explicit_agreement': agreement})

    ops = dg_time_operators(basis)
    by_parts = np.abs(ops.G.T - np.outer(basis.left_values, basis.left_values) - ops.derivative_moments).max()
    _check(checks, 'time_integration_by_parts', float(by_parts), thresholds['moments'])
    return checks


def run_verify(config: RunConfig) -> Dict[str, Any]:
    run = start_run('verify', config)
    try:
        checks = verification_checks(config)
    except SpaceTimeError as exc:
        fail_run(run, exc)
        raise
    for check in checks:
        record_check(run, check['name'], check['outcome'], lhs=check.get('lhs'), rhs=check.get('rhs'),
                     residual=check['residual'], threshold=check['threshold'], detail=check.get('detail'))
    write_json(config.output_dir / 'verify.json', {'config_hash': config.config_hash, 'checks': checks})
    constants = [
        {'k': k, 't_hat': t_hat, 'sup_norm': value, 'config_hash': config.config_hash}
        for degree in range(config.k + 1)
        for k, t_hat, value in sup_norm_scan(degree, CHARACTERISTIC_GRID).rows()
    ]
    write_table(config.output_dir / 'characteristic_constants.csv', constants,
                ['config_hash', 'k', 't_hat', 'sup_norm'])
    summary = {check['name']: check['outcome'] for check in checks}
    failed = [check['name'] for check in checks if check['outcome'] == IdentityCheck.Outcome.FAILED]
    if failed:
        exc = IdentityFailure(f"identity check failed: {', '.join(failed)}", failed=failed,
                              residuals={check['name']: check['residual'] for check in checks})
        fail_run(run, exc, summary)
        raise exc
    finish_run(run, summary)
    return summary


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------

SPECTRUM_SOURCES = ('solution', 'profile')


def run_spectrum(config: RunConfig, times: Optional[Sequence[float]] = None, source: str = 'solution',
                 samples: int = 11) -> Dict[str, Any]:
    if source not in SPECTRUM_SOURCES:
        raise ConfigError('unknown spectrum source', source=source, choices=list(SPECTRUM_SOURCES))
    if times is None:
        times = np.linspace(0.0, config.final_time, samples)
    times = [float(t) for t in times]
    run = start_run('spectrum', config)
    try:
        problem = config.build_problem()
        if source == 'solution':
            _, sol = solve_case(config)
            trace = spectrum_along_solution(sol, sol.space, times, config.epsilon)
        else:
            frozen = problem.exact if problem.exact is not None else (lambda t, X: problem.initial(X))
            trace = spectrum_along_solution(frozen, config.build_space(), times, config.epsilon)
    except SpaceTimeError as exc:
        fail_run(run, exc)
        raise
    payload = {**trace.to_dict(), 'config_hash': config.config_hash, 'epsilon': config.epsilon,
               'source': source, 'eps2_abs_lambda_min': config.epsilon ** 2 * abs(trace.lambda_min)}
    write_json(config.output_dir / 'spectrum.json', payload)
    write_table(config.output_dir / 'spectrum.csv', [
        {'config_hash': config.config_hash, 'time': t, 'lambda_min': lam, 'eigen_residual': res}
        for t, lam, res in zip(trace.times, trace.lambdas, trace.residuals)
    ], ['config_hash', 'time', 'lambda_min', 'eigen_residual'])
    summary = {'lambda_min': trace.lambda_min, 'C_s': trace.c_s,
               'eps2_abs_lambda_min': payload['eps2_abs_lambda_min'], 'note': trace.note}
    finish_run(run, summary)
    return summary

"""Fully discrete dG(k) x P_l Allen-Cahn solver, one slab at a time.

On slab ``n`` with coefficients ``U_j`` (one spatial vector per time node)
the test-index ``i`` residual is

    sum_j G_ij M U_j + tau sum_j Theta_ij A U_j
        + tau / eps^2 int_0^1 chi_i N(u) ds - chi_i(0) M u_prev - F_i

where ``N(u)`` is the load of ``u^3 - u`` and ``F_i`` the forcing moment.
Unknowns are flattened node-major: index ``i * n_free + dof``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import LinearSolverError, NewtonDivergenceError, UnsupportedConfigurationError
from .linalg import LinearSolveConfig, solve_linear
from .mesh import FeSpace
from .problems import ProblemSpec
from .timebasis import TimeBasis, TimePartition, dg_time_operators, exact_theta

logger = logging.getLogger(__name__)

DAMPING_MODES = ('none', 'backtracking')


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_iter: int = 25
    damping: str = 'backtracking'
    max_halvings: int = 8
    linear: LinearSolveConfig = field(default_factory=LinearSolveConfig)

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise UnsupportedConfigurationError('Newton tolerances must be positive',
                                                abs_tol=self.abs_tol, rel_tol=self.rel_tol)
        if self.max_iter < 1:
            raise UnsupportedConfigurationError('max_iter must be positive', max_iter=self.max_iter)
        if self.damping not in DAMPING_MODES:
            raise UnsupportedConfigurationError('unknown damping mode', damping=self.damping,
                                                choices=list(DAMPING_MODES))


@dataclass(frozen=True, eq=False)
class SlabSolution:
    """Coefficients of one slab plus its traces.

    ``incoming`` is the trace handed over by the neighbouring slab: the
    previous right trace for forward problems, the next left trace for
    backward ones. ``jump`` is ``u^{n-1}_{h+} - u^{n-1}_{h-}`` going forward
    and ``phi^n_{h+} - phi^n_{h-}`` going backward.
    """

    slab_index: int
    t_start: float
    tau: float
    coefficients: np.ndarray
    incoming: np.ndarray
    left_trace: np.ndarray
    right_trace: np.ndarray
    jump: np.ndarray
    newton_history: Tuple[dict, ...] = ()


def make_slab(basis: TimeBasis, n: int, t_start: float, tau: float, U: np.ndarray, incoming: np.ndarray,
              direction: str = 'forward', history=()) -> SlabSolution:
    left = basis.left_values @ U
    right = basis.right_values @ U
    jump = left - incoming if direction == 'forward' else incoming - right
    return SlabSolution(
        slab_index=n, t_start=t_start, tau=tau, coefficients=U, incoming=incoming,
        left_trace=left, right_trace=right, jump=jump, newton_history=tuple(history),
    )


@dataclass(frozen=True, eq=False)
class DgSolution:
    partition: TimePartition
    basis: TimeBasis
    space: FeSpace
    slabs: Tuple[SlabSolution, ...]
    initial: np.ndarray
    direction: str = 'forward'
    label: str = 'u_h'

    @property
    def n_slabs(self) -> int:
        return len(self.slabs)

    def slab(self, n: int) -> SlabSolution:
        return self.slabs[n - 1]

    def right_traces(self) -> List[np.ndarray]:
        return [slab.right_trace for slab in self.slabs]

    def value_at(self, t: float) -> np.ndarray:
        """Free-dof vector at time ``t``, left-continuous at the partition points."""
        endpoints = self.partition.endpoints
        if t <= endpoints[0]:
            return self.initial if self.direction == 'forward' else self.slabs[0].left_trace
        n = int(np.searchsorted(endpoints, t, side='left'))
        n = min(max(n, 1), self.n_slabs)
        slab = self.slab(n)
        s = (t - slab.t_start) / slab.tau
        return self.basis.evaluate(s)[0] @ slab.coefficients


class SlabSystem:
    """Slab algebra shared by the forward, dual, psi and projection solvers."""

    def __init__(self, space: FeSpace, basis: TimeBasis, epsilon: float):
        self.space = space
        self.basis = basis
        self.epsilon = epsilon
        self.ops = dg_time_operators(basis)
        self.M = space.mass
        self.A = space.stiffness
        self._GM = sp.kron(self.ops.G, self.M, format='csr')
        self._GtM = sp.kron(self.ops.G.T, self.M, format='csr')
        self._ThetaA = sp.kron(self.ops.Theta, self.A, format='csr')
        self.weighted_values = basis.values * basis.weights[:, None]

    @property
    def size(self) -> int:
        return self.basis.size * self.space.n_free

    def time_values(self, U: np.ndarray) -> np.ndarray:
        """Values at every spatial quadrature point and assembly time point, shape ``(n_space, n_time)``."""
        return self.space.evaluate((self.basis.values @ U).T)

    def block_operator(self, tau: float, reaction: Optional[np.ndarray] = None,
                       transpose_time: bool = False) -> sp.csr_matrix:
        """``G (x) M + tau Theta (x) A + tau sum_q w_q chi_q chi_q^T (x) M[c_q]``.

        ``reaction`` holds the coefficient ``c`` with shape ``(n_space, n_time)``;
        ``transpose_time`` swaps G for its transpose (backward problems).
        """
        op = (self._GtM if transpose_time else self._GM) + tau * self._ThetaA
        if reaction is not None:
            for q, w in enumerate(self.basis.weights):
                chi = self.basis.values[q]
                op = op + sp.kron(w * np.outer(chi, chi), tau * self.space.weighted_mass(reaction[:, q]),
                                  format='csr')
        return sp.csr_matrix(op)

    def apply_linear(self, U: np.ndarray, tau: float, transpose_time: bool = False) -> np.ndarray:
        G = self.ops.G.T if transpose_time else self.ops.G
        MU = (self.M @ U.T).T
        AU = (self.A @ U.T).T
        return G @ MU + tau * self.ops.Theta @ AU

    def nonlinear_moments(self, V: np.ndarray, tau: float) -> np.ndarray:
        loads = self.space.load(V ** 3 - V)
        return (tau / self.epsilon ** 2) * (self.weighted_values.T @ loads.T)

    def residual(self, U: np.ndarray, prev: np.ndarray, tau: float, F: np.ndarray) -> np.ndarray:
        R = self.apply_linear(U, tau) + self.nonlinear_moments(self.time_values(U), tau)
        R -= np.outer(self.ops.left_load, self.M @ prev)
        return R - F

    def jacobian(self, U: np.ndarray, tau: float) -> sp.csr_matrix:
        V = self.time_values(U)
        return self.block_operator(tau, (3.0 * V ** 2 - 1.0) / self.epsilon ** 2)


def load_moments(g: Callable[[float, np.ndarray], np.ndarray], space: FeSpace, basis: TimeBasis,
                 t_start: float, tau: float) -> np.ndarray:
    """``tau int_0^1 chi_i (g(t), phi) ds`` on the reference rule, shape ``(k+1, n_free)``."""
    loads = np.column_stack([
        space.load(space.sample(lambda X, t=t_start + tau * s: g(t, X)))
        for s in basis.ref_points
    ])
    return tau * (basis.ref_values * basis.ref_weights[:, None]).T @ loads.T


def forcing_moments(problem: ProblemSpec, space: FeSpace, basis: TimeBasis, t_start: float,
                    tau: float) -> np.ndarray:
    if problem.forcing is None:
        return np.zeros((basis.size, space.n_free))
    return load_moments(problem.forcing, space, basis, t_start, tau)


def l2_project(space: FeSpace, g: Callable[[np.ndarray], np.ndarray],
               linear: Optional[LinearSolveConfig] = None) -> np.ndarray:
    """Coefficients of ``P_h g``: ``M c = (g, phi_i)``."""
    return solve_linear(space.mass, space.load(space.sample(g)), linear or LinearSolveConfig())


def newton_slab(system: SlabSystem, prev: np.ndarray, tau: float, F: np.ndarray, cfg: NewtonConfig,
                slab_index: int) -> Tuple[np.ndarray, List[dict]]:
    U = np.tile(prev, (system.basis.size, 1))
    R = system.residual(U, prev, tau, F)
    norm = initial = float(np.linalg.norm(R))
    target = cfg.abs_tol + cfg.rel_tol * initial
    history = [{'iteration': 0, 'residual_norm': norm, 'step_length': 0.0, 'halvings': 0}]

    for iteration in range(1, cfg.max_iter + 1):
        if norm <= target:
            break
        delta = solve_linear(system.jacobian(U, tau), -R.ravel(), cfg.linear).reshape(U.shape)
        step, halvings = 1.0, 0
        trial = U + delta
        trial_R = system.residual(trial, prev, tau, F)
        trial_norm = float(np.linalg.norm(trial_R))
        if cfg.damping == 'backtracking':
            while not trial_norm < norm and halvings < cfg.max_halvings:
                step *= 0.5
                halvings += 1
                trial = U + step * delta
                trial_R = system.residual(trial, prev, tau, F)
                trial_norm = float(np.linalg.norm(trial_R))
        if not np.isfinite(trial_norm):
            history.append({'iteration': iteration, 'residual_norm': trial_norm,
                            'step_length': step, 'halvings': halvings})
            raise NewtonDivergenceError('Newton iterate is not finite', slab=slab_index, history=history)
        if cfg.damping == 'backtracking' and not trial_norm < norm:
            history.append({'iteration': iteration, 'residual_norm': trial_norm,
                            'step_length': step, 'halvings': halvings})
            raise NewtonDivergenceError('line search could not reduce the residual', slab=slab_index,
                                        residual_norm=norm, history=history)
        U, R, norm = trial, trial_R, trial_norm
        history.append({'iteration': iteration, 'residual_norm': norm, 'step_length': step,
                        'halvings': halvings})
        logger.debug('slab %d newton %d: |R| = %.3e (step %.3g)', slab_index, iteration, norm, step)

    if norm > target:
        raise NewtonDivergenceError('Newton did not converge', slab=slab_index, target=target,
                                    residual_norm=norm, history=history)
    return U, history


def solve_slab(prev_trace: np.ndarray, slab_n: int, problem: ProblemSpec, cfg: NewtonConfig,
               space: FeSpace, partition: TimePartition, basis: TimeBasis,
               system: Optional[SlabSystem] = None) -> SlabSolution:
    system = system or SlabSystem(space, basis, problem.epsilon)
    t_start, tau = partition.slab(slab_n)
    F = forcing_moments(problem, space, basis, t_start, tau)
    try:
        U, history = newton_slab(system, prev_trace, tau, F, cfg, slab_n)
    except LinearSolverError as exc:
        exc.details.setdefault('slab', slab_n)
        raise
    logger.debug('slab %d converged after %d Newton steps', slab_n, len(history) - 1)
    return make_slab(basis, slab_n, t_start, tau, U, prev_trace, history=history)


def solve_forward(problem: ProblemSpec, space: FeSpace, partition: TimePartition, basis: TimeBasis,
                  cfg: Optional[NewtonConfig] = None,
                  on_slab: Optional[Callable[[SlabSolution], None]] = None) -> DgSolution:
    cfg = cfg or NewtonConfig()
    system = SlabSystem(space, basis, problem.epsilon)
    u0 = l2_project(space, problem.initial, cfg.linear)
    prev = u0
    slabs = []
    for n in range(1, partition.n_slabs + 1):
        slab = solve_slab(prev, n, problem, cfg, space, partition, basis, system)
        slabs.append(slab)
        if on_slab is not None:
            on_slab(slab)
        prev = slab.right_trace
    logger.info('forward solve %s: %d slabs, k=%d, l=%d, %d free dofs', problem.name, partition.n_slabs,
                basis.degree_k, space.degree_l, space.n_free)
    return DgSolution(partition=partition, basis=basis, space=space, slabs=tuple(slabs), initial=u0)


@dataclass(frozen=True)
class StabilityBalance:
    slab_index: int
    lhs: float
    rhs: float
    terms: dict

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / (abs(self.lhs) + abs(self.rhs) + 1.0)


def stability_balance(sol: DgSolution, slab_n: int, problem: ProblemSpec) -> StabilityBalance:
    """Both sides of the slab energy balance obtained by testing with ``u_h`` itself.

    ``1/2|u^n_-|^2 - 1/2|u^{n-1}_-|^2 + 1/2|[u^{n-1}]|^2 + int a(u, u)
    + 1/eps^2 int (|u|_4^4 - |u|^2) = int <f, u>``
    """
    space, basis = sol.space, sol.basis
    slab = sol.slab(slab_n)
    M, A = space.mass, space.stiffness
    U, tau = slab.coefficients, slab.tau

    def sq(v):
        return float(v @ (M @ v))

    theta = exact_theta(basis)
    diffusion = tau * float(np.sum(theta * (U @ (A @ U.T))))
    V = space.evaluate((basis.ref_values @ U).T)
    w = space.weights[:, None]
    quartic = tau * float(np.sum(basis.ref_weights * np.sum(w * V ** 4, axis=0)))
    quadratic = tau * float(np.sum(theta * (U @ (M @ U.T))))
    terms = {
        'right_trace': 0.5 * sq(slab.right_trace),
        'incoming': 0.5 * sq(slab.incoming),
        'jump': 0.5 * sq(slab.jump),
        'diffusion': diffusion,
        'reaction': (quartic - quadratic) / problem.epsilon ** 2,
    }
    F = forcing_moments(problem, space, basis, slab.t_start, tau)
    lhs = terms['right_trace'] - terms['incoming'] + terms['jump'] + terms['diffusion'] + terms['reaction']
    return StabilityBalance(slab_index=slab_n, lhs=lhs, rhs=float(np.sum(U * F)), terms=terms)

"""Auxiliary discrete problems built on a forward solution.

Backward problems reuse the forward slab algebra with G transposed and the
slab loop reversed: slab ``n`` receives ``phi^n_{h+}`` from slab ``n + 1``
as a right-value load ``chi_i(1) M phi^n_{h+}``, with zero terminal data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse.linalg as spla
from numpy.polynomial import Legendre

from .forward import DgSolution, SlabSystem, forcing_moments, l2_project, load_moments, make_slab
from .linalg import LinearSolveConfig, smallest_generalized_eigenvalue, solve_linear
from .mesh import FeSpace
from .problems import ManufacturedSolution, ProblemSpec
from .timebasis import TimeBasis, TimePartition, exact_theta, gauss_rule

logger = logging.getLogger(__name__)

SpaceTimeSource = Union[Callable[[float, np.ndarray], np.ndarray], ManufacturedSolution, DgSolution]


@dataclass(frozen=True, eq=False)
class BackwardSolution(DgSolution):
    """Backward-in-time solution; ``initial`` holds the left trace ``phi^0_{h+}``."""

    rhs_reference: Optional[DgSolution] = None
    laplacian: Tuple[np.ndarray, ...] = ()


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    details: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / (abs(self.lhs) + abs(self.rhs) + 1.0)

    def to_dict(self) -> dict:
        return {'name': self.name, 'lhs': self.lhs, 'rhs': self.rhs, 'residual': self.residual,
                **self.details}


def _source_values(source: SpaceTimeSource, system: SlabSystem, n: int, t_start: float,
                   tau: float) -> np.ndarray:
    """Values of ``source`` at ``(spatial point, assembly time point)``."""
    if isinstance(source, DgSolution):
        return system.time_values(source.slab(n).coefficients)
    fn = source.value if isinstance(source, ManufacturedSolution) else source
    space = system.space
    return np.column_stack([space.sample(lambda X, t=t_start + tau * s: fn(t, X))
                            for s in system.basis.points])


def _backward_sweep(system: SlabSystem, partition: TimePartition,
                    reaction: Callable[[int, float, float], np.ndarray],
                    rhs: Callable[[int, float, float], np.ndarray],
                    linear: LinearSolveConfig) -> list:
    basis, M = system.basis, system.M
    incoming = np.zeros(system.space.n_free)
    slabs = [None] * partition.n_slabs
    for n in range(partition.n_slabs, 0, -1):
        t_start, tau = partition.slab(n)
        op = system.block_operator(tau, reaction(n, t_start, tau), transpose_time=True)
        b = np.outer(system.ops.right_values, M @ incoming) + rhs(n, t_start, tau)
        coefficients = solve_linear(op, b.ravel(), linear).reshape(basis.size, -1)
        slab = make_slab(basis, n, t_start, tau, coefficients, incoming, direction='backward')
        slabs[n - 1] = slab
        incoming = slab.left_trace
    return slabs


def solve_backward_dual(u_h: DgSolution, problem: ProblemSpec,
                        linear: Optional[LinearSolveConfig] = None) -> BackwardSolution:
    """Backward dual with reaction ``(u_h^2 + 1) / eps^2`` and right-hand side ``u_h``."""
    system = SlabSystem(u_h.space, u_h.basis, problem.epsilon)
    eps2 = problem.epsilon ** 2

    def reaction(n, t_start, tau):
        return (system.time_values(u_h.slab(n).coefficients) ** 2 + 1.0) / eps2

    def rhs(n, t_start, tau):
        U = u_h.slab(n).coefficients
        return tau * system.ops.Theta @ (system.M @ U.T).T

    slabs = _backward_sweep(system, u_h.partition, reaction, rhs, linear or LinearSolveConfig())
    return BackwardSolution(partition=u_h.partition, basis=u_h.basis, space=u_h.space, slabs=tuple(slabs),
                            initial=slabs[0].left_trace, direction='backward', label='phi_h',
                            rhs_reference=u_h)


def _time_inner(sol_a: DgSolution, sol_b: DgSolution, n: int, matrix) -> float:
    """``tau int_0^1 (a, b)_matrix ds`` with the exact time Gram matrix."""
    theta = exact_theta(sol_a.basis)
    a, b = sol_a.slab(n).coefficients, sol_b.slab(n).coefficients
    return sol_a.slab(n).tau * float(np.sum(theta * (a @ (matrix @ b.T))))


def duality_identity_residual(u_h: DgSolution, phi_h: DgSolution, problem: ProblemSpec) -> IdentityReport:
    """``int |u_h|^2 = 2/eps^2 int (phi_h, u_h) + int <f, phi_h> + (u^0, phi^0_+)``."""
    M = u_h.space.mass
    lhs = sum(_time_inner(u_h, u_h, n, M) for n in range(1, u_h.n_slabs + 1))
    coupling = sum(_time_inner(phi_h, u_h, n, M) for n in range(1, u_h.n_slabs + 1))
    forcing = 0.0
    if not problem.forcing_is_zero:
        for n in range(1, u_h.n_slabs + 1):
            slab = u_h.slab(n)
            F = forcing_moments(problem, u_h.space, u_h.basis, slab.t_start, slab.tau)
            forcing += float(np.sum(phi_h.slab(n).coefficients * F))
    initial = float(u_h.initial @ (M @ phi_h.slab(1).left_trace))
    rhs = 2.0 * coupling / problem.epsilon ** 2 + forcing + initial
    return IdentityReport('duality', lhs, rhs, {
        'coupling': coupling, 'forcing': forcing, 'initial': initial,
        'under_integrated': u_h.basis.under_integrated,
    })


@dataclass(frozen=True)
class DualStability:
    lhs: float
    bound: float
    terms: dict

    @property
    def slack(self) -> float:
        return self.bound - self.lhs


def dual_stability_slack(u_h: DgSolution, phi_h: DgSolution, problem: ProblemSpec) -> DualStability:
    """``1/2|phi^0_+|^2 + |grad phi|^2 + |u phi|^2/eps^2 + |phi|^2/(2 eps^2) <= eps^2/2 |u|^2``."""
    space, basis = u_h.space, u_h.basis
    M, A = space.mass, space.stiffness
    eps2 = problem.epsilon ** 2
    n_slabs = u_h.n_slabs
    phi0 = phi_h.slab(1).left_trace
    u_phi = 0.0
    for n in range(1, n_slabs + 1):
        slab_u, slab_phi = u_h.slab(n), phi_h.slab(n)
        Vu = space.evaluate((basis.ref_values @ slab_u.coefficients).T)
        Vp = space.evaluate((basis.ref_values @ slab_phi.coefficients).T)
        u_phi += slab_u.tau * float(basis.ref_weights @ (space.weights @ (Vu * Vp) ** 2))
    terms = {
        'initial_trace': 0.5 * float(phi0 @ (M @ phi0)),
        'gradient': sum(_time_inner(phi_h, phi_h, n, A) for n in range(1, n_slabs + 1)),
        'weighted': u_phi / eps2,
        'mass': sum(_time_inner(phi_h, phi_h, n, M) for n in range(1, n_slabs + 1)) / (2.0 * eps2),
    }
    bound = 0.5 * eps2 * sum(_time_inner(u_h, u_h, n, M) for n in range(1, n_slabs + 1))
    return DualStability(lhs=sum(terms.values()), bound=bound, terms=terms)


def _discrete_laplacian(space: FeSpace, coefficients: np.ndarray) -> np.ndarray:
    """Rows ``d_j`` with ``M d_j = A psi_j``."""
    lu = spla.splu(space.mass.tocsc())
    return lu.solve(np.ascontiguousarray((space.stiffness @ coefficients.T))).T


def solve_backward_psi(rhs: SpaceTimeSource, u_ref: SpaceTimeSource, problem: ProblemSpec, space: FeSpace,
                       partition: TimePartition, basis: TimeBasis,
                       linear: Optional[LinearSolveConfig] = None) -> BackwardSolution:
    """Backward linearised problem with reaction ``(3 u_ref^2 - 1) / eps^2``.

    ``rhs`` is either a discrete solution (tested with the slab Gram matrix)
    or a space-time callable (tested on the reference rule).
    """
    system = SlabSystem(space, basis, problem.epsilon)
    eps2 = problem.epsilon ** 2

    def reaction(n, t_start, tau):
        return (3.0 * _source_values(u_ref, system, n, t_start, tau) ** 2 - 1.0) / eps2

    def moments(n, t_start, tau):
        if isinstance(rhs, DgSolution):
            E = rhs.slab(n).coefficients
            return tau * system.ops.Theta @ (system.M @ E.T).T
        fn = rhs.value if isinstance(rhs, ManufacturedSolution) else rhs
        return load_moments(fn, space, basis, t_start, tau)

    slabs = _backward_sweep(system, partition, reaction, moments, linear or LinearSolveConfig())
    laplacian = tuple(_discrete_laplacian(space, slab.coefficients) for slab in slabs)
    return BackwardSolution(partition=partition, basis=basis, space=space, slabs=tuple(slabs),
                            initial=slabs[0].left_trace, direction='backward', label='psi_h',
                            rhs_reference=rhs if isinstance(rhs, DgSolution) else None,
                            laplacian=laplacian)


def laplacian_defect(psi: BackwardSolution) -> float:
    """max over slabs and nodes of ``|M d - A psi|``."""
    space = psi.space
    return max(
        float(np.max(np.abs(space.mass @ d.T - space.stiffness @ slab.coefficients.T)))
        for slab, d in zip(psi.slabs, psi.laplacian)
    )


def psi_spectral_chain(psi: BackwardSolution, rhs: SpaceTimeSource, u_ref: SpaceTimeSource,
                       problem: ProblemSpec) -> List[dict]:
    """Per-slab check of the energy inequality with the measured ``lambda_min``.

    Testing the psi equation with psi gives
    ``1/2|psi^{n-1}_+|^2 - 1/2|psi^n_+|^2 + 1/2|[psi^n]|^2
    + tau sum_q w_q lambda_q |psi_q|^2 <= int (e, psi)``.
    """
    space, basis = psi.space, psi.basis
    system = SlabSystem(space, basis, problem.epsilon)
    M, A = space.mass, space.stiffness
    eps2 = problem.epsilon ** 2
    rows = []
    for slab in psi.slabs:
        n, tau, Psi = slab.slab_index, slab.tau, slab.coefficients
        reaction = (3.0 * _source_values(u_ref, system, n, slab.t_start, tau) ** 2 - 1.0) / eps2
        lhs = 0.5 * (slab.left_trace @ (M @ slab.left_trace)
                     - slab.incoming @ (M @ slab.incoming)
                     + slab.jump @ (M @ slab.jump))
        lambdas = []
        for q, w in enumerate(basis.weights):
            lam, _ = smallest_generalized_eigenvalue(A + space.weighted_mass(reaction[:, q]), M)
            psi_q = basis.values[q] @ Psi
            lhs += tau * w * lam * float(psi_q @ (M @ psi_q))
            lambdas.append(lam)
        if isinstance(rhs, DgSolution):
            E = rhs.slab(n).coefficients
            moments = tau * system.ops.Theta @ (M @ E.T).T
        else:
            fn = rhs.value if isinstance(rhs, ManufacturedSolution) else rhs
            moments = load_moments(fn, space, basis, slab.t_start, tau)
        right = float(np.sum(Psi * moments))
        rows.append({'slab': n, 'lhs': float(lhs), 'rhs': right, 'slack': right - float(lhs),
                     'lambda_min': min(lambdas)})
    return rows


def solve_parabolic_projection(u_exact: ManufacturedSolution, space: FeSpace, partition: TimePartition,
                               basis: TimeBasis, linear: Optional[LinearSolveConfig] = None) -> DgSolution:
    """Linear dG heat solve with load ``(u_t, w) + a(u, w)`` and ``u_p^0 = P_h u(0)``."""
    linear = linear or LinearSolveConfig()
    system = SlabSystem(space, basis, epsilon=1.0)
    prev = l2_project(space, u_exact.at(0.0), linear)
    initial = prev
    slabs = []
    for n in range(1, partition.n_slabs + 1):
        t_start, tau = partition.slab(n)
        b = np.outer(system.ops.left_load, system.M @ prev) + _heat_load(u_exact, space, basis, t_start, tau)
        U = solve_linear(system.block_operator(tau), b.ravel(), linear).reshape(basis.size, -1)
        slab = make_slab(basis, n, t_start, tau, U, prev)
        slabs.append(slab)
        prev = slab.right_trace
    return DgSolution(partition=partition, basis=basis, space=space, slabs=tuple(slabs), initial=initial,
                      label='u_p')


def _heat_load(u_exact: ManufacturedSolution, space: FeSpace, basis: TimeBasis, t_start: float,
               tau: float) -> np.ndarray:
    loads = []
    for s in basis.ref_points:
        t = t_start + tau * s
        loads.append(space.load(space.sample(lambda X: u_exact.time_derivative(t, X)))
                     + space.gradient_load(u_exact.gradient(t, space.points)))
    return tau * (basis.ref_values * basis.ref_weights[:, None]).T @ np.column_stack(loads).T


def parabolic_orthogonality_residuals(u_p: DgSolution, u_exact: ManufacturedSolution) -> np.ndarray:
    """Per-slab max over test functions of the dG form applied to ``u_p - u``.

    The exact solution enters through the integrated-by-parts slab form
    ``(u(t^n), w^n_-) - int (u, w_t) - (u(t^{n-1}), w^{n-1}_+) + int a(u, w)``.
    """
    space, basis = u_p.space, u_p.basis
    system = SlabSystem(space, basis, epsilon=1.0)
    ops = system.ops
    residuals = []
    for slab in u_p.slabs:
        t0, tau = slab.t_start, slab.tau
        discrete = system.apply_linear(slab.coefficients, tau) - np.outer(ops.left_load, system.M @ slab.incoming)
        prev_load = space.load(space.sample(u_exact.at(t0)))
        end_load = space.load(space.sample(u_exact.at(t0 + tau)))
        value_loads = np.column_stack([space.load(space.sample(u_exact.at(t0 + tau * s)))
                                       for s in basis.ref_points])
        grad_loads = np.column_stack([space.gradient_load(u_exact.gradient(t0 + tau * s, space.points))
                                      for s in basis.ref_points])
        w = basis.ref_weights[:, None]
        continuous = (np.outer(ops.right_values, end_load)
                      - (basis.ref_derivatives * w).T @ value_loads.T
                      - np.outer(ops.left_load, prev_load)
                      + tau * (basis.ref_values * w).T @ grad_loads.T)
        residuals.append(float(np.max(np.abs(discrete - continuous))))
    return np.array(residuals)


def _legendre_moment_matrix(basis: TimeBasis) -> np.ndarray:
    """``B[m, j] = int_0^1 chi_j q_m`` for shifted Legendre ``q_m``, m < k."""
    k = basis.degree_k
    s, w = gauss_rule(k + 2)
    chi = basis.evaluate(s)
    Q = np.column_stack([Legendre.basis(m, domain=[0.0, 1.0])(s) for m in range(k)]) if k else np.zeros((len(s), 0))
    return (Q * w[:, None]).T @ chi


def _moment_loads(w_fn, space: FeSpace, basis: TimeBasis, t_start: float, tau: float) -> np.ndarray:
    """``int_0^1 q_m (w(t), phi) ds`` for m < k, shape ``(k, n_free)``."""
    k = basis.degree_k
    loads = np.column_stack([space.load(space.sample(lambda X, t=t_start + tau * s: w_fn(t, X)))
                             for s in basis.ref_points])
    if k == 0:
        return np.zeros((0, space.n_free))
    Q = np.column_stack([Legendre.basis(m, domain=[0.0, 1.0])(basis.ref_points) for m in range(k)])
    return (Q * basis.ref_weights[:, None]).T @ loads.T


def local_projection(w_fn: Callable[[float, np.ndarray], np.ndarray], slab_n: int, space: FeSpace,
                     partition: TimePartition, basis: TimeBasis,
                     linear: Optional[LinearSolveConfig] = None) -> np.ndarray:
    """Slab coefficients with ``W(t^n) = P_h w(t^n)`` and ``int (W - w, q phi) = 0`` for q in P_{k-1}."""
    linear = linear or LinearSolveConfig()
    k = basis.degree_k
    t_start, tau = partition.slab(slab_n)
    W = np.empty((k + 1, space.n_free))
    # the last Radau node is s = 1
    W[k] = l2_project(space, lambda X: w_fn(t_start + tau, X), linear)
    if k == 0:
        return W
    B = _legendre_moment_matrix(basis)
    lu = spla.splu(space.mass.tocsc())
    targets = lu.solve(np.ascontiguousarray(_moment_loads(w_fn, space, basis, t_start, tau).T)).T
    W[:k] = np.linalg.solve(B[:, :k], targets - np.outer(B[:, k], W[k]))
    return W


def local_projection_defects(w_fn, W: np.ndarray, slab_n: int, space: FeSpace, partition: TimePartition,
                             basis: TimeBasis) -> np.ndarray:
    """``[|M W(1) - (w(t^n), phi)|_inf, moment defects...]``."""
    t_start, tau = partition.slab(slab_n)
    M = space.mass
    end = np.max(np.abs(M @ (basis.right_values @ W) - space.load(space.sample(lambda X: w_fn(t_start + tau, X)))))
    if basis.degree_k == 0:
        return np.array([end])
    B = _legendre_moment_matrix(basis)
    moments = B @ (M @ W.T).T - _moment_loads(w_fn, space, basis, t_start, tau)
    return np.concatenate([[end], np.max(np.abs(moments), axis=1)])


def local_projection_global(w_fn, space: FeSpace, partition: TimePartition, basis: TimeBasis,
                            linear: Optional[LinearSolveConfig] = None) -> DgSolution:
    linear = linear or LinearSolveConfig()
    initial = l2_project(space, lambda X: w_fn(0.0, X), linear)
    prev = initial
    slabs = []
    for n in range(1, partition.n_slabs + 1):
        t_start, tau = partition.slab(n)
        W = local_projection(w_fn, n, space, partition, basis, linear)
        slab = make_slab(basis, n, t_start, tau, W, prev)
        slabs.append(slab)
        prev = slab.right_trace
    return DgSolution(partition=partition, basis=basis, space=space, slabs=tuple(slabs), initial=initial,
                      label='P_loc')


def laplacian_solution(psi: BackwardSolution) -> DgSolution:
    """``Delta_h psi_h`` as a solution object, for norm evaluation."""
    slabs = []
    for slab, d in zip(psi.slabs, psi.laplacian):
        incoming = _discrete_laplacian(psi.space, slab.incoming[None, :])[0]
        slabs.append(make_slab(psi.basis, slab.slab_index, slab.t_start, slab.tau, d, incoming,
                               direction='backward'))
    return DgSolution(partition=psi.partition, basis=psi.basis, space=psi.space, slabs=tuple(slabs),
                      initial=slabs[0].left_trace, direction='backward', label='laplacian_psi_h')

"""Norms, energy identity, spectral diagnostic and approximation ratios."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np

from .exceptions import UnsupportedConfigurationError
from .forward import DgSolution
from .linalg import smallest_generalized_eigenvalue
from .mesh import FeSpace, build_space
from .problems import ManufacturedSolution, ProblemSpec

logger = logging.getLogger(__name__)

NORM_FIELDS = ('L2L2', 'LinfL2', 'L2H1', 'L4L4', 'L4L2', 'jump_sum')


@dataclass(frozen=True)
class NormReport:
    """Space-time norms of a solution, or of its error when a reference was given.

    ``LinfL2`` is the maximum over ``sample_factor * (k + 1) + 1`` equispaced
    points per slab (both slab ends included) and the initial value.
    ``L2H1`` uses the full H1 norm.
    """

    L2L2: float
    LinfL2: float
    L2H1: float
    L4L4: float
    L4L2: float
    jump_sum: float
    per_slab: tuple = ()

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in NORM_FIELDS}

    def to_dict(self) -> dict:
        data = self.as_row()
        data['per_slab'] = list(self.per_slab)
        return data


def _evaluation_space(space: FeSpace, quad_degree: Optional[int]) -> FeSpace:
    if quad_degree is None or quad_degree == space.quadrature.degree:
        return space
    return build_space(space.mesh, space.degree_l, quad_degree)


def compute_norms(sol: DgSolution, reference: Optional[ManufacturedSolution] = None,
                  quad_degree: Optional[int] = None, sample_factor: int = 4) -> NormReport:
    space, basis = sol.space, sol.basis
    if reference is not None and quad_degree is None:
        quad_degree = 4 * space.degree_l + 4
    ev = _evaluation_space(space, quad_degree)
    W, points = ev.weights, ev.points
    grid = np.linspace(0.0, 1.0, sample_factor * (basis.degree_k + 1) + 1)
    grid_values = basis.evaluate(grid)

    def error_values(C: np.ndarray, times: np.ndarray):
        V = ev.evaluate(C.T)
        grads = [G @ C.T for G in ev.quadrature.gradients]
        if reference is not None:
            V = V - np.column_stack([reference.value(t, points) for t in times])
            exact_grads = [reference.gradient(t, points) for t in times]
            grads = [g - np.column_stack([eg[:, d] for eg in exact_grads]) for d, g in enumerate(grads)]
        return V, grads

    def l2_of(vector: np.ndarray, t: float) -> float:
        values = ev.evaluate(vector)
        if reference is not None:
            values = values - reference.value(t, points)
        return math.sqrt(max(float(W @ values ** 2), 0.0))

    l2 = h1 = l4 = l4l2 = jumps = 0.0
    linf = l2_of(sol.initial, float(sol.partition.endpoints[0]))
    per_slab = []
    M = space.mass
    for slab in sol.slabs:
        tau = slab.tau
        times = slab.t_start + tau * basis.ref_points
        V, grads = error_values(basis.ref_values @ slab.coefficients, times)
        squares = W @ V ** 2
        gradient_squares = sum(W @ g ** 2 for g in grads)
        slab_l2 = tau * float(basis.ref_weights @ squares)
        slab_h1 = slab_l2 + tau * float(basis.ref_weights @ gradient_squares)
        slab_l4 = tau * float(basis.ref_weights @ (W @ V ** 4))
        slab_l4l2 = tau * float(basis.ref_weights @ squares ** 2)
        sampled = grid_values @ slab.coefficients
        slab_linf = max(l2_of(sampled[i], slab.t_start + tau * s) for i, s in enumerate(grid))
        slab_jump = float(slab.jump @ (M @ slab.jump))
        l2 += slab_l2
        h1 += slab_h1
        l4 += slab_l4
        l4l2 += slab_l4l2
        jumps += slab_jump
        linf = max(linf, slab_linf)
        per_slab.append({'slab': slab.slab_index, 'L2L2_sq': slab_l2, 'LinfL2': slab_linf, 'jump_sq': slab_jump})

    return NormReport(
        L2L2=math.sqrt(l2),
        LinfL2=linf,
        L2H1=math.sqrt(h1),
        L4L4=l4 ** 0.25,
        L4L2=l4l2 ** 0.25,
        jump_sum=jumps,
        per_slab=tuple(per_slab),
    )


def energy(space: FeSpace, u: np.ndarray, epsilon: float) -> float:
    """``1/2 |grad u|^2 + 1/(4 eps^2) int (u^2 - 1)^2``."""
    values = space.evaluate(u)
    return 0.5 * float(u @ (space.stiffness @ u)) + float(space.weights @ (values ** 2 - 1.0) ** 2) / (4.0 * epsilon ** 2)


@dataclass(frozen=True)
class EnergySlab:
    slab: int
    energy_right: float
    energy_integral: float
    dissipation: float
    residual: float

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.energy_right)


def energy_identity(sol: DgSolution, slab_n: int, problem: ProblemSpec) -> EnergySlab:
    """``tau E(u^n_-) - int_slab E + int_slab (t - t^{n-1}) |u_t|^2`` for f = 0, k >= 1."""
    basis, space = sol.basis, sol.space
    if basis.degree_k == 0:
        raise UnsupportedConfigurationError('energy identity needs k >= 1', k=0)
    if not problem.forcing_is_zero:
        raise UnsupportedConfigurationError('energy identity needs zero forcing', problem=problem.name)
    slab = sol.slab(slab_n)
    U, tau = slab.coefficients, slab.tau
    right = energy(space, slab.right_trace, problem.epsilon)
    nodal_energies = [energy(space, basis.ref_values[q] @ U, problem.epsilon) for q in range(len(basis.ref_points))]
    integral = tau * float(basis.ref_weights @ np.array(nodal_energies))
    dU = basis.ref_derivatives @ U
    M = space.mass
    rates = np.einsum('qi,qi->q', dU, (M @ dU.T).T)
    dissipation = float(basis.ref_weights @ (basis.ref_points * rates))
    residual = abs(tau * right - integral + dissipation)
    return EnergySlab(slab=slab_n, energy_right=tau * right, energy_integral=integral,
                      dissipation=dissipation, residual=residual)


def energy_trace(sol: DgSolution, problem: ProblemSpec) -> List[EnergySlab]:
    return [energy_identity(sol, n, problem) for n in range(1, sol.n_slabs + 1)]


@dataclass(frozen=True)
class SpectrumTrace:
    times: tuple
    lambdas: tuple
    residuals: tuple
    note: str = 'Rayleigh quotient over the Dirichlet-constrained discrete space'

    @property
    def lambda_min(self) -> float:
        return float(min(self.lambdas))

    @property
    def c_s(self) -> float:
        return max(0.0, -self.lambda_min)

    def to_dict(self) -> dict:
        return {'times': list(self.times), 'lambda_min': list(self.lambdas), 'eigen_residuals': list(self.residuals),
                'C_s': self.c_s, 'note': self.note}


SpectrumSource = Union[DgSolution, ManufacturedSolution, Callable[[float, np.ndarray], np.ndarray]]


def linearized_operator(space: FeSpace, values: np.ndarray, epsilon: float):
    """Stiffness plus the mass weighted by ``(3 u^2 - 1) / eps^2``."""
    return space.stiffness + space.weighted_mass((3.0 * values ** 2 - 1.0) / epsilon ** 2)


def spectrum_along_solution(u_source: SpectrumSource, space: FeSpace, times: Sequence[float],
                            epsilon: float, tol: float = 1e-8) -> SpectrumTrace:
    if isinstance(u_source, DgSolution):
        T = u_source.partition.final_time
        if any(t < 0 or t > T for t in times):
            raise UnsupportedConfigurationError('sample times must lie in [0, T]', T=T)
    M = space.mass
    lambdas, residuals = [], []
    for t in times:
        if isinstance(u_source, DgSolution):
            values = space.evaluate(u_source.value_at(t))
        else:
            fn = u_source.value if isinstance(u_source, ManufacturedSolution) else u_source
            values = space.sample(lambda X: fn(t, X))
        A_t = linearized_operator(space, values, epsilon)
        lam, v = smallest_generalized_eigenvalue(A_t, M, tol=tol)
        Mv = M @ v
        residuals.append(float(np.linalg.norm(A_t @ v - lam * Mv) / (np.linalg.norm(Mv) * (1.0 + abs(lam)))))
        lambdas.append(lam)
        logger.debug('t=%.4g lambda_min=%.8g', t, lam)
    return SpectrumTrace(times=tuple(float(t) for t in times), lambdas=tuple(lambdas), residuals=tuple(residuals))


@dataclass(frozen=True)
class BestApproximation:
    numerator: float
    denominator: float
    exact: bool

    @property
    def ratio(self) -> Optional[float]:
        if self.exact:
            return None
        return self.numerator / self.denominator if self.denominator > 0 else math.inf


EXACT_REPRODUCTION_TOL = 1e-9


def best_approximation_ratio(u_h: DgSolution, u_p: DgSolution, u_exact: ManufacturedSolution,
                             quad_degree: Optional[int] = None) -> BestApproximation:
    """``(|u_h - u|_{L2H1} + |u_h - u|_{LinfL2}) / (|u_p - u|_{L2H1} + |u_p - u|_{LinfL2})``.

    ``exact`` only when both errors vanish; a vanishing denominator alone
    gives an infinite ratio.
    """
    e_h = compute_norms(u_h, u_exact, quad_degree)
    e_p = compute_norms(u_p, u_exact, quad_degree)
    numerator = e_h.L2H1 + e_h.LinfL2
    denominator = e_p.L2H1 + e_p.LinfL2
    exact = denominator <= EXACT_REPRODUCTION_TOL and numerator <= EXACT_REPRODUCTION_TOL
    return BestApproximation(numerator=numerator, denominator=denominator, exact=exact)


def stability_scalings(report: NormReport, epsilon: float, final_time: float, data_norm: float) -> dict:
    """Quantities that stay bounded across an eps sweep when the stability estimates hold."""
    return {
        'L2L2': report.L2L2,
        'L2L2_scaled': report.L2L2 / (math.sqrt(final_time) + epsilon * data_norm),
        'eps_X': epsilon * (report.LinfL2 + report.L2H1),
        'eps_L4L4_sq': epsilon * report.L4L4 ** 2,
    }


def observed_orders(errors: Iterable[float]) -> List[Optional[float]]:
    """``log2(e_coarse / e_fine)`` between consecutive levels."""
    errors = list(errors)
    orders: List[Optional[float]] = []
    for coarse, fine in zip(errors, errors[1:]):
        if coarse > 0 and fine > 0:
            orders.append(math.log2(coarse / fine))
        else:
            orders.append(None)
    return orders

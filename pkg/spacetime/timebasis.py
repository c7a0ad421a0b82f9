"""Time partitions, the reference slab basis and the discrete characteristic.

Everything here lives on the reference interval [0, 1]; a slab
``(t^{n-1}, t^n]`` is reached through ``t = t^{n-1} + tau_n s``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial import Legendre, Polynomial

from .exceptions import PartitionError, QuadratureError

logger = logging.getLogger(__name__)

REFERENCE_DOMAIN = [0.0, 1.0]


@dataclass(frozen=True, eq=False)
class TimePartition:
    endpoints: np.ndarray
    theta: float

    @classmethod
    def from_endpoints(cls, endpoints: Sequence[float]) -> 'TimePartition':
        t = np.asarray(endpoints, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise PartitionError('a partition needs at least two endpoints', count=int(t.size))
        if t[0] != 0.0:
            raise PartitionError('partitions start at t = 0', first=float(t[0]))
        taus = np.diff(t)
        if np.any(taus <= 0):
            raise PartitionError('endpoints must be strictly increasing')
        t.setflags(write=False)
        return cls(endpoints=t, theta=float(taus.min() / taus.max()))

    @classmethod
    def uniform(cls, final_time: float, n_slabs: int) -> 'TimePartition':
        if n_slabs < 1 or not final_time > 0:
            raise PartitionError('uniform partition needs T > 0 and N >= 1', T=final_time, N=n_slabs)
        t = final_time * (np.arange(n_slabs + 1) / n_slabs)
        t[-1] = final_time
        return cls.from_endpoints(t)

    @classmethod
    def graded(cls, final_time: float, n_slabs: int, ratio: float) -> 'TimePartition':
        """Linearly growing steps with ``max tau / min tau = ratio``."""
        if ratio < 1 or n_slabs < 1 or not final_time > 0:
            raise PartitionError('graded partition needs T > 0, N >= 1 and ratio >= 1',
                                 T=final_time, N=n_slabs, ratio=ratio)
        growth = np.linspace(1.0, ratio, n_slabs) if n_slabs > 1 else np.ones(1)
        t = np.concatenate([[0.0], np.cumsum(growth)]) * (final_time / growth.sum())
        t[-1] = final_time
        return cls.from_endpoints(t)

    @property
    def n_slabs(self) -> int:
        return len(self.endpoints) - 1

    @property
    def final_time(self) -> float:
        return float(self.endpoints[-1])

    @property
    def taus(self) -> np.ndarray:
        return np.diff(self.endpoints)

    @property
    def tau(self) -> float:
        return float(self.taus.max())

    def slab(self, n: int):
        """``(t^{n-1}, tau_n)`` for the 1-based slab index ``n``."""
        if not 1 <= n <= self.n_slabs:
            raise PartitionError('slab index out of range', slab=n, n_slabs=self.n_slabs)
        t0 = float(self.endpoints[n - 1])
        return t0, float(self.endpoints[n]) - t0


def radau_right_nodes(k: int) -> np.ndarray:
    """Right Radau points on [0, 1]: roots of P_{k+1} - P_k, the last one being 1."""
    roots = (Legendre.basis(k + 1) - Legendre.basis(k)).roots()
    nodes = np.sort(0.5 * (np.real(roots) + 1.0))
    nodes[-1] = 1.0
    return nodes


def lagrange_polynomials(nodes: np.ndarray) -> List[Polynomial]:
    polys = []
    for i, node in enumerate(nodes):
        others = np.delete(nodes, i)
        p = Polynomial.fromroots(others) if len(others) else Polynomial([1.0])
        polys.append(p / p(node))
    return polys


def gauss_rule(n_points: int):
    x, w = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class TimeBasis:
    """Nodal basis of P_k on [0, 1] with its assembly and reference quadratures.

    ``points``/``weights`` is the assembly rule used inside the slab systems.
    ``ref_points``/``ref_weights`` is an accurate rule for data, norms and the
    identity checks; it never drops below the assembly rule.
    """

    degree_k: int
    node_points: np.ndarray
    polynomials: tuple
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    ref_points: np.ndarray
    ref_weights: np.ndarray
    ref_values: np.ndarray
    ref_derivatives: np.ndarray
    left_values: np.ndarray
    right_values: np.ndarray
    under_integrated: bool = False

    @property
    def size(self) -> int:
        return self.degree_k + 1

    def evaluate(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.column_stack([p(s) for p in self.polynomials])

    def evaluate_derivative(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.column_stack([p.deriv()(s) for p in self.polynomials])


def required_time_points(k: int) -> int:
    return math.ceil((4 * k + 3) / 2)


def make_time_basis(k: int, quad_points: Optional[int] = None,
                    allow_under_integration: bool = False) -> TimeBasis:
    """Lagrange basis at right Radau nodes with Gauss-Legendre quadrature.

    The default rule is exact to degree ``4k + 3`` so the cubic term tested
    against P_k is integrated exactly. Fewer points are rejected unless
    ``allow_under_integration`` is set, in which case the default drops to
    ``max(1, k)`` points.
    """
    if k < 0:
        raise QuadratureError('time degree must be non-negative', k=k)
    minimum = required_time_points(k)
    if quad_points is None:
        quad_points = max(1, k) if allow_under_integration else minimum
    if quad_points < 1:
        raise QuadratureError('time quadrature needs at least one point', requested=quad_points)
    if quad_points < minimum and not allow_under_integration:
        raise QuadratureError('time quadrature would under-integrate the cubic term',
                              requested=quad_points, minimum=minimum)

    nodes = radau_right_nodes(k)
    polys = tuple(lagrange_polynomials(nodes))
    derivs = tuple(p.deriv() for p in polys)
    points, weights = gauss_rule(quad_points)
    ref_points, ref_weights = gauss_rule(max(quad_points, 2 * k + 6))

    def table(ps, s):
        return np.column_stack([p(s) for p in ps])

    under = quad_points < minimum
    if under:
        logger.warning('time basis k=%d built with %d quadrature points (exactness needs %d)',
                       k, quad_points, minimum)
    return TimeBasis(
        degree_k=k,
        node_points=nodes,
        polynomials=polys,
        points=points,
        weights=weights,
        values=table(polys, points),
        derivatives=table(derivs, points),
        ref_points=ref_points,
        ref_weights=ref_weights,
        ref_values=table(polys, ref_points),
        ref_derivatives=table(derivs, ref_points),
        left_values=table(polys, np.zeros(1))[0],
        right_values=table(polys, np.ones(1))[0],
        under_integrated=under,
    )


@dataclass(frozen=True, eq=False)
class DgTimeOperators:
    G: np.ndarray
    Theta: np.ndarray
    left_load: np.ndarray
    right_values: np.ndarray
    derivative_moments: np.ndarray


def dg_time_operators(basis: TimeBasis) -> DgTimeOperators:
    """``G_ij = chi_i(1) chi_j(1) - int chi_j chi_i'`` and ``Theta_ij = int chi_i chi_j``.

    ``derivative_moments[i, j] = int chi_i' chi_j``; integration by parts gives
    ``G.T == outer(left, left) + derivative_moments``.
    """
    w = basis.weights
    X, dX = basis.values, basis.derivatives
    theta = (X * w[:, None]).T @ X
    D = (dX * w[:, None]).T @ X
    G = np.outer(basis.right_values, basis.right_values) - D
    return DgTimeOperators(
        G=G,
        Theta=0.5 * (theta + theta.T),
        left_load=basis.left_values.copy(),
        right_values=basis.right_values.copy(),
        derivative_moments=D,
    )


def exact_theta(basis: TimeBasis) -> np.ndarray:
    """Theta on the reference rule, exact regardless of the assembly rule."""
    X = basis.ref_values
    return (X * basis.ref_weights[:, None]).T @ X


# --------------------------------------------------------------------------
# discrete characteristic
# --------------------------------------------------------------------------

def _legendre(m: int) -> Legendre:
    return Legendre.basis(m, domain=REFERENCE_DOMAIN)


def _integral_to(p, t_hat: float) -> float:
    return float(p.integ(lbnd=0.0)(t_hat))


@dataclass(frozen=True, eq=False)
class CharacteristicPoly:
    """``rho`` in P_k with ``rho(0) = 1`` and ``int_0^1 rho q = int_0^t_hat q`` for q in P_{k-1}."""

    degree_k: int
    cut_fraction: float
    polynomial: Legendre
    coefficients: np.ndarray
    sup_norm: float

    def __call__(self, s):
        return self.polynomial(s)


def _coefficients(p: Legendre, k: int) -> np.ndarray:
    c = np.zeros(k + 1)
    c[:len(p.coef)] = p.coef[:k + 1]
    return c


def polynomial_sup_norm(p) -> float:
    """max |p| on [0, 1], from the endpoints and the real critical points."""
    candidates = [0.0, 1.0]
    roots = p.deriv().roots() if len(p.coef) > 1 else np.array([])
    for r in np.atleast_1d(roots):
        if abs(np.imag(r)) < 1e-12 and 0.0 <= np.real(r) <= 1.0:
            candidates.append(float(np.real(r)))
    return float(np.max(np.abs(p(np.array(candidates)))))


def characteristic_moment_system(k: int, t_hat: float) -> Legendre:
    """Solve the (k+1) x (k+1) system {rho(0) = 1, moments against L_0..L_{k-1}}."""
    n_points = k + 2
    s, w = gauss_rule(n_points)
    L = np.column_stack([_legendre(j)(s) for j in range(k + 1)])
    system = np.empty((k + 1, k + 1))
    rhs = np.empty(k + 1)
    system[0] = [_legendre(j)(0.0) for j in range(k + 1)]
    rhs[0] = 1.0
    for m in range(k):
        system[m + 1] = (L[:, m] * w) @ L
        rhs[m + 1] = _integral_to(_legendre(m), t_hat)
    return Legendre(np.linalg.solve(system, rhs), domain=REFERENCE_DOMAIN)


def weighted_orthonormal_basis(k: int) -> List[Legendre]:
    """Basis of P_{k-1} orthonormal in ``<p, q> = int_0^1 s p q``.

    Modified Gram-Schmidt with one re-orthogonalisation pass.
    """
    s, w = gauss_rule(k + 2)
    weight = w * s

    def inner(p, q):
        return float(np.sum(weight * p(s) * q(s)))

    basis: List[Legendre] = []
    for m in range(k):
        p = _legendre(m)
        for _ in range(2):
            for q in basis:
                p = p - inner(p, q) * q
        basis.append(p / math.sqrt(inner(p, p)))
    return basis


def characteristic_explicit(k: int, t_hat: float) -> Legendre:
    """``rho(s) = 1 + s sum_i c_i p_i`` with ``c_i = -int_{t_hat}^1 p_i``."""
    rho = Legendre([1.0], domain=REFERENCE_DOMAIN)
    s = Legendre.identity(domain=REFERENCE_DOMAIN)
    for p in weighted_orthonormal_basis(k):
        antiderivative = p.integ(lbnd=0.0)
        c = -(antiderivative(1.0) - antiderivative(t_hat))
        rho = rho + c * (s * p)
    return rho


def discrete_characteristic(k: int, t_hat: float, method: str = 'moments') -> CharacteristicPoly:
    if not 0.0 <= t_hat <= 1.0:
        raise QuadratureError('cut fraction must lie in [0, 1]', t_hat=t_hat)
    if method == 'moments':
        rho = characteristic_moment_system(k, t_hat)
    elif method == 'explicit':
        rho = characteristic_explicit(k, t_hat)
    else:
        raise ValueError(f'unknown characteristic method {method!r}')
    return CharacteristicPoly(
        degree_k=k,
        cut_fraction=float(t_hat),
        polynomial=rho,
        coefficients=_coefficients(rho, k),
        sup_norm=polynomial_sup_norm(rho),
    )


def characteristic_residuals(rho: CharacteristicPoly) -> np.ndarray:
    """``|rho(0) - 1|`` followed by the k moment defects."""
    k = rho.degree_k
    s, w = gauss_rule(k + 2)
    values = rho(s)
    defects = [abs(float(rho(0.0)) - 1.0)]
    for m in range(k):
        q = _legendre(m)
        defects.append(abs(float(np.sum(w * values * q(s))) - _integral_to(q, rho.cut_fraction)))
    return np.array(defects)


def characteristic_transfer(basis: TimeBasis, t_hat: float) -> np.ndarray:
    """Matrix T with ``U_tilde = T @ U`` for slab coefficients in the nodal basis.

    Column i holds the nodal values of the corrected basis function that
    matches ``chi_i(0)`` and the moments of ``chi_i`` over ``[0, t_hat)``.
    """
    k = basis.degree_k
    s, w = gauss_rule(k + 2)
    cut_s = t_hat * s
    cut_w = t_hat * w
    L = np.column_stack([_legendre(j)(s) for j in range(k + 1)])
    system = np.empty((k + 1, k + 1))
    system[0] = [_legendre(j)(0.0) for j in range(k + 1)]
    for m in range(k):
        system[m + 1] = (L[:, m] * w) @ L
    rhs = np.empty((k + 1, k + 1))
    rhs[0] = basis.left_values
    chi_cut = basis.evaluate(cut_s)
    for m in range(k):
        rhs[m + 1] = (_legendre(m)(cut_s) * cut_w) @ chi_cut
    legendre_coefficients = np.linalg.solve(system, rhs)
    nodal = np.column_stack([_legendre(j)(basis.node_points) for j in range(k + 1)])
    return nodal @ legendre_coefficients


def characteristic_apply(u_slab: np.ndarray, t_hat: float, basis: TimeBasis) -> np.ndarray:
    """Discrete approximation of ``chi_[0, t_hat) u`` for slab coefficients ``(k+1, ndof)``."""
    if not 0.0 <= t_hat <= 1.0:
        raise QuadratureError('cut fraction must lie in [0, 1]', t_hat=t_hat)
    return characteristic_transfer(basis, t_hat) @ u_slab


@dataclass(frozen=True)
class SupNormTable:
    degree_k: int
    cut_points: np.ndarray
    sup_norms: np.ndarray

    @property
    def constant(self) -> float:
        return float(self.sup_norms.max())

    def rows(self):
        for t_hat, value in zip(self.cut_points, self.sup_norms):
            yield self.degree_k, float(t_hat), float(value)


def sup_norm_scan(k: int, grid: int) -> SupNormTable:
    """``max_s |rho(s; t_hat)|`` for ``t_hat`` on a uniform grid of ``grid`` points."""
    if grid < 2:
        raise ValueError('sup_norm_scan needs at least two cut points')
    cuts = np.linspace(0.0, 1.0, grid)
    norms = np.array([discrete_characteristic(k, t).sup_norm for t in cuts])
    return SupNormTable(degree_k=k, cut_points=cuts, sup_norms=norms)

"""Sparse assembly, linear solvers and the generalized eigenvalue diagnostic."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.io
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import EigenSolverError, LinearSolverError, UnsupportedConfigurationError

logger = logging.getLogger(__name__)

LINEAR_METHODS = ('sparse_lu', 'dense_lu', 'conjugate_gradient', 'bicgstab')
DENSE_FALLBACK_LIMIT = 600


@dataclass(frozen=True)
class LinearSolveConfig:
    method: str = 'sparse_lu'
    rel_tolerance: float = 1e-12
    max_iterations: int = 2000

    def __post_init__(self):
        if self.method not in LINEAR_METHODS:
            raise UnsupportedConfigurationError('unknown linear solver', method=self.method,
                                                choices=list(LINEAR_METHODS))
        if not self.rel_tolerance > 0:
            raise UnsupportedConfigurationError('rel_tolerance must be positive',
                                                rel_tolerance=self.rel_tolerance)
        if self.max_iterations < 1:
            raise UnsupportedConfigurationError('max_iterations must be positive',
                                                max_iterations=self.max_iterations)


def assemble_csr(rows, cols, values, shape) -> sp.csr_matrix:
    """COO triplets to CSR; duplicates are summed and column indices sorted."""
    A = sp.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def jacobi_preconditioner(A: sp.spmatrix) -> spla.LinearOperator:
    d = A.diagonal().astype(float)
    d[d == 0.0] = 1.0
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda x: inv * x, dtype=float)


def relative_residual(A, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve_linear(A, b: np.ndarray, cfg: Optional[LinearSolveConfig] = None) -> np.ndarray:
    cfg = cfg or LinearSolveConfig()
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise LinearSolverError('dimension mismatch', matrix_shape=list(A.shape), rhs_length=b.shape[0])
    if not np.any(b):
        return np.zeros_like(b)

    if cfg.method == 'dense_lu':
        lu, piv = la.lu_factor(A.toarray(), check_finite=True)
        if np.any(np.diag(lu) == 0.0):
            raise LinearSolverError('singular matrix in dense_lu', size=A.shape[0])
        return la.lu_solve((lu, piv), b)

    if cfg.method == 'sparse_lu':
        try:
            return spla.splu(A.tocsc()).solve(b)
        except RuntimeError as exc:
            raise LinearSolverError('sparse LU factorization failed', reason=str(exc), size=A.shape[0]) from exc

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    krylov = spla.cg if cfg.method == 'conjugate_gradient' else spla.bicgstab
    x, info = krylov(A, b, rtol=cfg.rel_tolerance, atol=0.0, maxiter=cfg.max_iterations,
                     M=jacobi_preconditioner(A), callback=count)
    achieved = relative_residual(A, x, b)
    if info != 0:
        raise LinearSolverError(f'{cfg.method} did not converge', info=int(info), iterations=iterations,
                                achieved_residual=achieved, rel_tolerance=cfg.rel_tolerance)
    logger.debug('%s converged in %d iterations, relative residual %.3e', cfg.method, iterations, achieved)
    return x


def to_matrix_market(A, path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))


def dense_generalized_eigenvalues(A, M) -> np.ndarray:
    """All eigenvalues of ``A v = lambda M v`` in ascending order (small systems only)."""
    return la.eigh(_dense(A), _dense(M), eigvals_only=True)


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _gershgorin_lower(A: sp.csr_matrix) -> float:
    diag = A.diagonal()
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius))


def _gershgorin_upper(A: sp.csr_matrix) -> float:
    diag = A.diagonal()
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.max(diag + radius))


def _mass_lower_estimate(M: sp.csr_matrix, iterations: int = 50) -> float:
    """Half the Rayleigh quotient reached by plain inverse iteration on ``M``."""
    lu = spla.splu(M.tocsc())
    v = np.ones(M.shape[0])
    for _ in range(iterations):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    return 0.5 * float(v @ (M @ v))


def default_shift(A, M) -> float:
    """A shift strictly below the smallest generalized eigenvalue."""
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    lower = _gershgorin_lower(A)
    if lower >= 0:
        sigma = lower / _gershgorin_upper(M)
    else:
        sigma = lower / _mass_lower_estimate(M)
    return sigma - 1e-3 * (1.0 + abs(sigma))


def smallest_generalized_eigenvalue(A, M, shift_guess: Optional[float] = None, tol: float = 1e-8,
                                    max_iter: int = 5000, retries: int = 4) -> Tuple[float, np.ndarray]:
    """Smallest eigenpair of ``A v = lambda M v`` by shifted inverse iteration.

    The shift is held fixed below the spectrum so the iteration converges to
    the minimum eigenvalue. On breakdown the shift is pushed further down and
    the iteration restarted; small systems fall back to a dense solve after
    the retries are exhausted. The returned eigenvector is M-normalised and
    the returned value is its Rayleigh quotient.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    sigma = default_shift(A, M) if shift_guess is None else float(shift_guess)
    start = np.random.default_rng(0).standard_normal(n)

    for attempt in range(retries + 1):
        result = _inverse_iteration(A, M, sigma, start, tol, max_iter)
        if result is not None:
            return result
        new_sigma = sigma - 0.1 * (1.0 + abs(sigma))
        logger.warning('inverse iteration broke down at shift %.6g, retrying with %.6g', sigma, new_sigma)
        sigma = new_sigma

    if n < DENSE_FALLBACK_LIMIT:
        logger.warning('falling back to dense eigensolver for %d unknowns', n)
        values, vectors = la.eigh(A.toarray(), M.toarray(), subset_by_index=[0, 0])
        v = vectors[:, 0] / np.sqrt(vectors[:, 0] @ (M @ vectors[:, 0]))
        return float(v @ (A @ v)), v
    raise EigenSolverError('inverse iteration failed after shift perturbations', size=n, retries=retries,
                           last_shift=sigma)


def _inverse_iteration(A, M, sigma, start, tol, max_iter) -> Optional[Tuple[float, np.ndarray]]:
    try:
        lu = spla.splu((A - sigma * M).tocsc())
    except RuntimeError:
        return None
    v = start / np.sqrt(start @ (M @ start))
    for iteration in range(1, max_iter + 1):
        w = lu.solve(M @ v)
        norm = np.sqrt(w @ (M @ w))
        if not np.isfinite(norm) or norm == 0.0:
            return None
        v = w / norm
        Mv = M @ v
        lam = float(v @ (A @ v))
        residual = np.linalg.norm(A @ v - lam * Mv)
        if residual <= tol * np.linalg.norm(Mv) * (1.0 + abs(lam)):
            logger.debug('inverse iteration converged in %d steps, lambda=%.10g', iteration, lam)
            return lam, v
    return None

import math
import os
import tempfile

import numpy as np
import scipy.io
import scipy.linalg as la
import scipy.sparse as sp
from django.test import SimpleTestCase

from spacetime.exceptions import LinearSolverError, UnsupportedConfigurationError
from spacetime.linalg import (
	LinearSolveConfig,
	assemble_csr,
	dense_generalized_eigenvalues,
	smallest_generalized_eigenvalue,
	solve_linear,
	to_matrix_market,
)
from spacetime.mesh import build_interval_mesh, build_space


def stiffness_3x3():
	return build_space(build_interval_mesh(0.0, 1.0, 4), 1).stiffness


class SolveLinearTest(SimpleTestCase):
	def test_identity(self):
		b = np.array([1.0, -2.0, 3.0])
		for method in ("sparse_lu", "dense_lu", "conjugate_gradient", "bicgstab"):
			x = solve_linear(sp.identity(3, format="csr"), b, LinearSolveConfig(method=method))
			np.testing.assert_allclose(x, b, atol=1e-14)

	def test_stiffness_against_dense(self):
		A = stiffness_3x3()
		b = np.array([1.0, 0.0, 0.0])
		oracle = la.solve(A.toarray(), b)
		for method in ("sparse_lu", "dense_lu"):
			np.testing.assert_allclose(solve_linear(A, b, LinearSolveConfig(method=method)), oracle, atol=1e-12)
		for method in ("conjugate_gradient", "bicgstab"):
			x = solve_linear(A, b, LinearSolveConfig(method=method))
			self.assertLess(np.linalg.norm(x - oracle) / np.linalg.norm(oracle), 1e-10)

	def test_zero_rhs(self):
		x = solve_linear(stiffness_3x3(), np.zeros(3))
		self.assertTrue(np.all(x == 0.0))

	def test_nonsymmetric_bicgstab(self):
		A = sp.csr_matrix(np.array([[4.0, 1.0, 0.0], [-1.0, 5.0, 2.0], [0.0, -2.0, 6.0]]))
		b = np.array([1.0, 2.0, 3.0])
		x = solve_linear(A, b, LinearSolveConfig(method="bicgstab"))
		oracle = la.solve(A.toarray(), b)
		self.assertLess(np.linalg.norm(x - oracle) / np.linalg.norm(oracle), 1e-10)

	def test_singular_dense(self):
		A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
		with self.assertRaises(LinearSolverError):
			solve_linear(A, np.array([1.0, 0.0]), LinearSolveConfig(method="dense_lu"))

	def test_krylov_failure_reports_residual(self):
		A = build_space(build_interval_mesh(0.0, 1.0, 64), 1).stiffness
		b = np.ones(A.shape[0])
		with self.assertRaises(LinearSolverError) as ctx:
			solve_linear(A, b, LinearSolveConfig(method="conjugate_gradient", max_iterations=2))
		self.assertIn("achieved_residual", ctx.exception.details)
		self.assertGreater(ctx.exception.details["achieved_residual"], 1e-12)

	def test_config_validation(self):
		with self.assertRaises(UnsupportedConfigurationError):
			LinearSolveConfig(method="gmres")
		with self.assertRaises(UnsupportedConfigurationError):
			LinearSolveConfig(rel_tolerance=0.0)


class AssemblyTest(SimpleTestCase):
	def test_duplicates_summed(self):
		A = assemble_csr([0, 0, 1, 0], [1, 1, 0, 0], [1.0, 2.0, 5.0, 7.0], (2, 2))
		np.testing.assert_array_equal(A.toarray(), [[7.0, 3.0], [5.0, 0.0]])
		self.assertTrue(A.has_sorted_indices)

	def test_matrix_market_dump(self):
		A = stiffness_3x3()
		with tempfile.TemporaryDirectory() as tmp:
			path = os.path.join(tmp, "stiffness.mtx")
			to_matrix_market(A, path)
			loaded = scipy.io.mmread(path)
		np.testing.assert_allclose(sp.csr_matrix(loaded).toarray(), A.toarray(), atol=1e-14)


class EigenTest(SimpleTestCase):
	def setUp(self):
		self.space = build_space(build_interval_mesh(0.0, 1.0, 64), 1)

	def test_dirichlet_laplacian(self):
		lam, v = smallest_generalized_eigenvalue(self.space.stiffness, self.space.mass)
		self.assertAlmostEqual(lam / math.pi ** 2, 1.0, delta=0.01)
		M, A = self.space.mass, self.space.stiffness
		self.assertAlmostEqual((v @ (A @ v)) / (v @ (M @ v)), lam, delta=1e-10 * abs(lam))

	def test_shifted_operator(self):
		A = self.space.stiffness - self.space.mass
		lam, _ = smallest_generalized_eigenvalue(A, self.space.mass)
		self.assertAlmostEqual(lam / (math.pi ** 2 - 1.0), 1.0, delta=0.01)

	def test_interface_matches_dense(self):
		eps = 0.05
		space = build_space(build_interval_mesh(0.0, 1.0, 512), 1)
		u = np.tanh((space.points[:, 0] - 0.5) / (math.sqrt(2.0) * eps))
		A = space.stiffness + space.weighted_mass((3.0 * u ** 2 - 1.0) / eps ** 2)
		lam, v = smallest_generalized_eigenvalue(A, space.mass)
		dense = dense_generalized_eigenvalues(A, space.mass)[0]
		self.assertLess(abs(lam - dense), 1e-6 * max(1.0, abs(dense)))
		residual = np.linalg.norm(A @ v - lam * (space.mass @ v))
		self.assertLessEqual(residual, 1e-8 * np.linalg.norm(space.mass @ v) * (1.0 + abs(lam)))

	def test_dense_eigenvalues_sorted(self):
		values = dense_generalized_eigenvalues(self.space.stiffness, self.space.mass)
		self.assertTrue(np.all(np.diff(values) >= 0))

import math

import numpy as np
from django.test import SimpleTestCase

from spacetime.companions import (
	duality_identity_residual,
	dual_stability_slack,
	laplacian_defect,
	laplacian_solution,
	local_projection,
	local_projection_defects,
	local_projection_global,
	parabolic_orthogonality_residuals,
	psi_spectral_chain,
	solve_backward_dual,
	solve_backward_psi,
	solve_parabolic_projection,
)
from spacetime.diagnostics import compute_norms, observed_orders
from spacetime.forward import NewtonConfig, load_moments, solve_forward
from spacetime.mesh import build_interval_mesh, build_space
from spacetime.problems import EXPSINE, TRIALSPACE, build_problem
from spacetime.timebasis import TimePartition, make_time_basis


def forward(k, n=8, N=4, T=1.0, eps=0.5, under=False, cfg=None):
	space = build_space(build_interval_mesh(0.0, 1.0, n), 1)
	basis = make_time_basis(k, allow_under_integration=under)
	problem = build_problem('expsine', eps, T, 1)
	return problem, solve_forward(problem, space, TimePartition.uniform(T, N), basis, cfg)


def dense_backward(space, basis, partition, reaction, rhs):
	"""All backward slabs as one block upper-triangular system; ``reaction(n)`` is c at (space, time) points."""
	M, A = space.mass.toarray(), space.stiffness.toarray()
	V, w = space.quadrature.values.toarray(), space.weights
	X, dX, tw = basis.values, basis.derivatives, basis.weights
	B = np.outer(basis.right_values, basis.right_values) - (X * tw[:, None]).T @ dX
	theta = (X * tw[:, None]).T @ X
	size, N = basis.size * space.n_free, partition.n_slabs
	K, b = np.zeros((N * size, N * size)), np.zeros(N * size)
	for n in range(1, N + 1):
		t_start, tau = partition.slab(n)
		c = reaction(n)
		block = np.kron(B, M) + tau * np.kron(theta, A)
		for q in range(len(tw)):
			Mc = V.T @ ((w * c[:, q])[:, None] * V)
			block += tau * tw[q] * np.kron(np.outer(X[q], X[q]), Mc)
		rows = slice((n - 1) * size, n * size)
		K[rows, rows] = block
		if n < N:
			K[rows, n * size:(n + 1) * size] = -np.kron(np.outer(basis.right_values, basis.left_values), M)
		b[rows] = rhs(n, t_start, tau).ravel()
	return np.linalg.solve(K, b).reshape(N, basis.size, space.n_free)


class DualTest(SimpleTestCase):
	def test_duality_identity(self):
		for k in (0, 1):
			problem, u_h = forward(k)
			phi_h = solve_backward_dual(u_h, problem)
			report = duality_identity_residual(u_h, phi_h, problem)
			self.assertLessEqual(report.residual, 1e-8, msg=f'k={k}')
			self.assertFalse(report.to_dict()['under_integrated'])

	def test_under_integrated_time_rule_breaks_identity(self):
		problem, u_h = forward(1, under=True)
		phi_h = solve_backward_dual(u_h, problem)
		report = duality_identity_residual(u_h, phi_h, problem)
		self.assertGreater(report.residual, 1e-6)
		self.assertTrue(report.details['under_integrated'])

	def test_backward_orientation(self):
		problem, u_h = forward(1)
		phi_h = solve_backward_dual(u_h, problem)
		self.assertEqual(phi_h.direction, 'backward')
		self.assertEqual(np.abs(phi_h.slab(u_h.n_slabs).incoming).max(), 0.0)
		for n in range(1, u_h.n_slabs):
			np.testing.assert_array_equal(phi_h.slab(n).incoming, phi_h.slab(n + 1).left_trace)
		np.testing.assert_array_equal(phi_h.initial, phi_h.slab(1).left_trace)

	def test_dual_stability(self):
		for k in (0, 1, 2):
			problem, u_h = forward(k)
			phi_h = solve_backward_dual(u_h, problem)
			result = dual_stability_slack(u_h, phi_h, problem)
			self.assertGreaterEqual(result.slack, -1e-10 * (1.0 + result.bound))
			self.assertGreater(result.lhs, 0.0)

	def test_matches_dense_space_time_system(self):
		problem, u_h = forward(0, n=4)
		phi_h = solve_backward_dual(u_h, problem)
		space, basis = u_h.space, u_h.basis
		V, M = space.quadrature.values.toarray(), space.mass.toarray()
		theta = (basis.values * basis.weights[:, None]).T @ basis.values

		def reaction(n):
			U = u_h.slab(n).coefficients
			return ((V @ (basis.values @ U).T) ** 2 + 1.0) / problem.epsilon ** 2

		def rhs(n, t_start, tau):
			return tau * theta @ (M @ u_h.slab(n).coefficients.T).T

		expected = dense_backward(space, basis, u_h.partition, reaction, rhs)
		for n in range(1, u_h.n_slabs + 1):
			np.testing.assert_allclose(phi_h.slab(n).coefficients, expected[n - 1], rtol=1e-10, atol=1e-13)

	def test_identity_tightens_with_newton_tolerance(self):
		residuals = []
		for tol in (1e-8, 1e-12):
			problem, u_h = forward(1, cfg=NewtonConfig(abs_tol=tol, rel_tol=tol))
			phi_h = solve_backward_dual(u_h, problem)
			residuals.append(duality_identity_residual(u_h, phi_h, problem).residual)
		loose, tight = residuals
		self.assertLessEqual(tight, 1e-8)
		self.assertLessEqual(tight, loose + 1e-12)


class PsiTest(SimpleTestCase):
	def test_psi_chain_and_laplacian(self):
		problem, u_h = forward(1, N=3, eps=0.2)
		psi = solve_backward_psi(EXPSINE, u_h, problem, u_h.space, u_h.partition, u_h.basis)
		self.assertEqual(psi.label, 'psi_h')
		self.assertLessEqual(laplacian_defect(psi), 1e-10)
		rows = psi_spectral_chain(psi, EXPSINE, u_h, problem)
		self.assertEqual([row['slab'] for row in rows], [1, 2, 3])
		for row in rows:
			self.assertGreaterEqual(row['slack'], -1e-9 * (1.0 + abs(row['rhs'])))
		lap = laplacian_solution(psi)
		self.assertEqual(lap.n_slabs, 3)

	def test_psi_with_discrete_rhs(self):
		problem, u_h = forward(1, N=2)
		psi = solve_backward_psi(u_h, EXPSINE, problem, u_h.space, u_h.partition, u_h.basis)
		self.assertIs(psi.rhs_reference, u_h)
		for row in psi_spectral_chain(psi, u_h, EXPSINE, problem):
			self.assertGreaterEqual(row['slack'], -1e-9 * (1.0 + abs(row['rhs'])))

	def test_constant_state_matches_dense_system(self):
		problem, u_h = forward(1, n=4, N=2)
		space, basis, partition = u_h.space, u_h.basis, u_h.partition
		psi = solve_backward_psi(EXPSINE, lambda t, X: np.ones(len(X)), problem, space, partition, basis)
		# 3 u^2 - 1 = 2 everywhere
		shape = (len(space.weights), len(basis.weights))
		expected = dense_backward(
			space, basis, partition,
			lambda n: np.full(shape, 2.0 / problem.epsilon ** 2),
			lambda n, t_start, tau: load_moments(EXPSINE.value, space, basis, t_start, tau),
		)
		for n in (1, 2):
			np.testing.assert_allclose(psi.slab(n).coefficients, expected[n - 1], rtol=1e-10, atol=1e-12)

	def test_scalings_stay_bounded_under_refinement(self):
		# |exp(-t) sin(pi x)|_{L2 L2} on (0, 1)
		rhs_norm = math.sqrt((1.0 - math.exp(-2.0)) / 4.0)
		psi_ratios, laplacian_ratios = [], []
		for n in (8, 16, 32):
			problem, u_h = forward(1, n=n, N=n)
			psi = solve_backward_psi(EXPSINE, u_h, problem, u_h.space, u_h.partition, u_h.basis)
			psi_ratios.append(compute_norms(psi).L2L2 / rhs_norm)
			laplacian_norm = compute_norms(laplacian_solution(psi)).L2L2
			laplacian_ratios.append(problem.epsilon ** 2 * laplacian_norm / rhs_norm)
		for ratios in (psi_ratios, laplacian_ratios):
			self.assertGreater(min(ratios), 0.0)
			self.assertLessEqual(max(ratios) / min(ratios), 1.5)


class ParabolicProjectionTest(SimpleTestCase):
	def test_orthogonality(self):
		for k in (0, 1, 2):
			space = build_space(build_interval_mesh(0.0, 1.0, 8), 2)
			partition = TimePartition.uniform(1.0, 4)
			u_p = solve_parabolic_projection(EXPSINE, space, partition, make_time_basis(k))
			self.assertLessEqual(parabolic_orthogonality_residuals(u_p, EXPSINE).max(), 1e-10)

	def test_convergence(self):
		errors = []
		for n in (16, 32, 64):
			space = build_space(build_interval_mesh(0.0, 1.0, n), 1)
			u_p = solve_parabolic_projection(EXPSINE, space, TimePartition.uniform(1.0, n), make_time_basis(1))
			errors.append(compute_norms(u_p, EXPSINE).L2L2)
		for order in observed_orders(errors):
			self.assertGreater(order, 1.8)

	def test_reproduces_trial_space_solution(self):
		space = build_space(build_interval_mesh(0.0, 1.0, 4), 2)
		basis = make_time_basis(1)
		u_p = solve_parabolic_projection(TRIALSPACE, space, TimePartition.uniform(1.0, 2), basis)
		np.testing.assert_allclose(u_p.initial, space.interpolate(TRIALSPACE.at(0.0)), atol=1e-12)
		for slab in u_p.slabs:
			for j, s in enumerate(basis.node_points):
				expected = space.interpolate(TRIALSPACE.at(slab.t_start + slab.tau * s))
				np.testing.assert_allclose(slab.coefficients[j], expected, atol=1e-10)

	def test_linf_h1_stays_bounded(self):
		seminorms = []
		for n in (8, 16, 32):
			space = build_space(build_interval_mesh(0.0, 1.0, n), 1)
			u_p = solve_parabolic_projection(EXPSINE, space, TimePartition.uniform(1.0, n), make_time_basis(1))
			vectors = [u_p.initial]
			for slab in u_p.slabs:
				vectors.extend([slab.left_trace, *slab.coefficients])
			seminorms.append(max(math.sqrt(float(v @ (space.stiffness @ v))) for v in vectors))
		for value in seminorms:
			self.assertLessEqual(value, 1.2 * math.pi / math.sqrt(2.0))
		self.assertLessEqual(max(seminorms) / min(seminorms), 1.1)


class LocalProjectionTest(SimpleTestCase):
	def test_defining_conditions(self):
		space = build_space(build_interval_mesh(0.0, 1.0, 8), 2)
		partition = TimePartition.uniform(1.0, 3)
		for k in (0, 1, 2, 3):
			basis = make_time_basis(k)
			W = local_projection(EXPSINE.value, 2, space, partition, basis)
			defects = local_projection_defects(EXPSINE.value, W, 2, space, partition, basis)
			self.assertEqual(len(defects), k + 1)
			self.assertLessEqual(defects.max(), 1e-12)

	def test_convergence(self):
		errors = []
		for n in (16, 32, 64):
			space = build_space(build_interval_mesh(0.0, 1.0, n), 1)
			partition = TimePartition.uniform(1.0, n)
			projection = local_projection_global(EXPSINE.value, space, partition, make_time_basis(1))
			errors.append(compute_norms(projection, EXPSINE).L2L2)
		for order in observed_orders(errors):
			self.assertGreater(order, 1.8)

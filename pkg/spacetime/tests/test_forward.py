from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp
from django.test import SimpleTestCase
from scipy.optimize import root

from spacetime.diagnostics import compute_norms, observed_orders
from spacetime.exceptions import LinearSolverError, NewtonDivergenceError, UnsupportedConfigurationError
from spacetime.forward import (
	NewtonConfig,
	SlabSystem,
	forcing_moments,
	l2_project,
	newton_slab,
	solve_forward,
	stability_balance,
)
from spacetime.linalg import LinearSolveConfig
from spacetime.mesh import build_interval_mesh, build_space
from spacetime.problems import EXPSINE, TRIALSPACE, build_problem
from spacetime.timebasis import TimePartition, dg_time_operators, gauss_rule, make_time_basis


def setup_1d(n=8, l=1, k=1, N=4, T=0.5, problem='expsine', eps=0.5):
	space = build_space(build_interval_mesh(0.0, 1.0, n), l)
	return (build_problem(problem, eps, T, 1), space, TimePartition.uniform(T, N), make_time_basis(k))


def reaction_load(space, u, eps):
	V = space.quadrature.values
	values = V @ u
	return V.T @ (space.quadrature.weights * (values ** 3 - values)) / eps ** 2


class ForwardSolveTest(SimpleTestCase):
	def test_zero_data_stays_zero(self):
		problem, space, partition, basis = setup_1d(problem='zero')
		sol = solve_forward(problem, space, partition, basis)
		for slab in sol.slabs:
			self.assertEqual(np.abs(slab.coefficients).max(), 0.0)
			self.assertEqual(len(slab.newton_history), 1)

	def test_trial_space_solution_is_reproduced(self):
		problem, space, partition, basis = setup_1d(n=4, l=2, k=1, N=2, T=1.0, problem='trialspace', eps=1.0)
		sol = solve_forward(problem, space, partition, basis, NewtonConfig(abs_tol=1e-12, rel_tol=1e-12))
		for slab in sol.slabs:
			for j, s in enumerate(basis.node_points):
				expected = space.interpolate(TRIALSPACE.at(slab.t_start + slab.tau * s))
				np.testing.assert_allclose(slab.coefficients[j], expected, atol=1e-9)

	def test_constant_in_time_matches_implicit_euler(self):
		problem, space, partition, basis = setup_1d(n=8, k=0, N=2)
		sol = solve_forward(problem, space, partition, basis, NewtonConfig(abs_tol=1e-13, rel_tol=1e-13))
		M = space.mass.toarray()
		A = space.stiffness.toarray()
		s, w = gauss_rule(12)
		prev = sol.initial
		for slab in sol.slabs:
			t0, tau = slab.t_start, slab.tau
			forcing = problem.forcing
			F = tau * sum(wq * space.load(forcing(t0 + tau * sq, space.points)) for sq, wq in zip(s, w))

			def residual(u, prev=prev, tau=tau, F=F):
				return M @ (u - prev) + tau * A @ u + tau * reaction_load(space, u, problem.epsilon) - F

			oracle = root(residual, prev, tol=1e-13)
			np.testing.assert_allclose(slab.coefficients[0], oracle.x, atol=1e-9)
			prev = oracle.x

	def test_matches_dense_space_time_system(self):
		problem, space, partition, basis = setup_1d(n=6, k=1, N=2)
		sol = solve_forward(problem, space, partition, basis, NewtonConfig(abs_tol=1e-13, rel_tol=1e-13))
		ops = dg_time_operators(basis)
		M = space.mass.toarray()
		A = space.stiffness.toarray()
		prev = sol.initial
		n_free = space.n_free
		for slab in sol.slabs:
			F = forcing_moments(problem, space, basis, slab.t_start, slab.tau)

			def residual(x, prev=prev, tau=slab.tau, F=F):
				U = x.reshape(basis.size, n_free)
				R = ops.G @ (U @ M) + tau * ops.Theta @ (U @ A) - np.outer(ops.left_load, M @ prev) - F
				for q, wq in enumerate(basis.weights):
					u_q = basis.values[q] @ U
					R += tau * wq * np.outer(basis.values[q], reaction_load(space, u_q, problem.epsilon))
				return R.ravel()

			oracle = root(residual, np.tile(prev, basis.size), tol=1e-13)
			np.testing.assert_allclose(slab.coefficients.ravel(), oracle.x, atol=1e-9)
			prev = slab.right_trace

	def test_stability_balance(self):
		for k in (1, 2):
			problem, space, partition, basis = setup_1d(n=8, l=2, k=k, N=3)
			sol = solve_forward(problem, space, partition, basis)
			for n in range(1, sol.n_slabs + 1):
				self.assertLessEqual(stability_balance(sol, n, problem).residual, 1e-9)

	def test_value_at_is_left_continuous(self):
		problem, space, partition, basis = setup_1d()
		seen = []
		sol = solve_forward(problem, space, partition, basis, on_slab=lambda slab: seen.append(slab.slab_index))
		self.assertEqual(seen, [1, 2, 3, 4])
		np.testing.assert_array_equal(sol.value_at(0.0), sol.initial)
		t1 = float(partition.endpoints[1])
		np.testing.assert_allclose(sol.value_at(t1), sol.slab(1).right_trace, atol=1e-14)
		np.testing.assert_allclose(sol.slab(2).jump, sol.slab(2).left_trace - sol.slab(1).right_trace)
		np.testing.assert_allclose(sol.initial, l2_project(space, problem.initial))

	def test_newton_history_shrinks(self):
		problem, space, partition, basis = setup_1d(problem='interface', eps=0.1, n=32, N=2, T=0.1)
		sol = solve_forward(problem, space, partition, basis)
		history = sol.slab(1).newton_history
		self.assertGreater(len(history), 2)
		self.assertLess(history[-1]['residual_norm'], history[0]['residual_norm'])
		self.assertEqual(history[0]['iteration'], 0)

	def test_time_values_shape(self):
		problem, space, partition, basis = setup_1d(n=8, k=2)
		system = SlabSystem(space, basis, problem.epsilon)
		U = np.ones((basis.size, space.n_free))
		values = system.time_values(U)
		self.assertEqual(values.shape, (len(space.weights), len(basis.weights)))
		self.assertNotEqual(len(space.weights), len(basis.weights))
		self.assertEqual(system.block_operator(0.1, values).shape, (system.size, system.size))

	def test_spatial_convergence(self):
		errors = []
		for n in (8, 16, 32):
			problem, space, partition, basis = setup_1d(n=n, N=n, eps=1.0)
			sol = solve_forward(problem, space, partition, basis)
			errors.append(compute_norms(sol, EXPSINE).L2H1)
		for order in observed_orders(errors):
			self.assertGreater(order, 0.85)


class FailureTest(SimpleTestCase):
	def test_newton_divergence(self):
		problem, space, partition, basis = setup_1d(problem='interface', eps=0.05, n=32, N=1, T=1.0)
		cfg = NewtonConfig(abs_tol=1e-14, rel_tol=1e-14, max_iter=1)
		with self.assertRaises(NewtonDivergenceError) as ctx:
			solve_forward(problem, space, partition, basis, cfg)
		self.assertEqual(ctx.exception.details['slab'], 1)
		self.assertEqual(len(ctx.exception.details['history']), 2)

	def test_line_search_without_decrease(self):
		# every step away from the start increases |R|
		system = SimpleNamespace(
			basis=SimpleNamespace(size=1),
			residual=lambda U, prev, tau, F: np.full_like(U, 1.0 + np.abs(U - prev).sum()),
			jacobian=lambda U, tau: sp.identity(U.size, format='csr'),
		)
		cfg = NewtonConfig(max_halvings=3)
		with self.assertRaises(NewtonDivergenceError) as ctx:
			newton_slab(system, np.zeros(3), 0.1, None, cfg, 4)
		details = ctx.exception.details
		self.assertEqual(details['slab'], 4)
		self.assertEqual(len(details['history']), 2)
		self.assertEqual(details['history'][-1]['halvings'], 3)
		self.assertEqual(details['history'][-1]['step_length'], 0.125)
		self.assertGreater(details['history'][-1]['residual_norm'], details['residual_norm'])

	def test_linear_failure_names_slab(self):
		problem, space, partition, basis = setup_1d()
		linear = LinearSolveConfig(method='conjugate_gradient', max_iterations=1)
		with self.assertRaises(LinearSolverError) as ctx:
			solve_forward(problem, space, partition, basis, NewtonConfig(linear=linear))
		self.assertEqual(ctx.exception.details['slab'], 1)

	def test_config_validation(self):
		with self.assertRaises(UnsupportedConfigurationError):
			NewtonConfig(damping='armijo')
		with self.assertRaises(UnsupportedConfigurationError):
			NewtonConfig(max_iter=0)
		with self.assertRaises(UnsupportedConfigurationError):
			NewtonConfig(abs_tol=0.0)

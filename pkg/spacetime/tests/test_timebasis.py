import numpy as np
from django.test import SimpleTestCase

from spacetime.exceptions import PartitionError, QuadratureError
from spacetime.timebasis import (
	TimePartition,
	characteristic_apply,
	characteristic_residuals,
	discrete_characteristic,
	dg_time_operators,
	gauss_rule,
	make_time_basis,
	sup_norm_scan,
)


class PartitionTest(SimpleTestCase):
	def test_uniform(self):
		partition = TimePartition.uniform(1.0, 4)
		np.testing.assert_array_equal(partition.endpoints, [0.0, 0.25, 0.5, 0.75, 1.0])
		self.assertEqual(partition.theta, 1.0)
		self.assertEqual(partition.slab(2), (0.25, 0.25))

	def test_graded_theta(self):
		partition = TimePartition.graded(2.0, 5, 3.0)
		taus = partition.taus
		self.assertEqual(partition.final_time, 2.0)
		self.assertEqual(partition.theta, taus.min() / taus.max())
		self.assertAlmostEqual(partition.theta, 1.0 / 3.0, places=12)

	def test_invalid(self):
		with self.assertRaises(PartitionError):
			TimePartition.from_endpoints([0.0, 0.5, 0.5, 1.0])
		with self.assertRaises(PartitionError):
			TimePartition.uniform(1.0, 0)
		with self.assertRaises(PartitionError):
			TimePartition.uniform(1.0, 2).slab(3)


class TimeBasisTest(SimpleTestCase):
	def test_constant_basis(self):
		basis = make_time_basis(0)
		np.testing.assert_array_equal(basis.node_points, [1.0])
		np.testing.assert_allclose(basis.values, 1.0)
		ops = dg_time_operators(basis)
		np.testing.assert_allclose(ops.G, [[1.0]], atol=1e-15)
		np.testing.assert_allclose(ops.Theta, [[1.0]], atol=1e-15)
		np.testing.assert_allclose(ops.left_load, [1.0], atol=1e-15)

	def test_lagrange_and_partition_of_unity(self):
		for k in range(5):
			basis = make_time_basis(k)
			self.assertEqual(basis.node_points[-1], 1.0)
			np.testing.assert_allclose(basis.evaluate(basis.node_points), np.eye(k + 1), atol=1e-13)
			np.testing.assert_allclose(basis.values.sum(axis=1), 1.0, atol=1e-13)

	def test_quadrature_exactness(self):
		for k in range(4):
			basis = make_time_basis(k)
			for m in range(4 * k + 3):
				self.assertAlmostEqual(basis.weights @ basis.points ** m, 1.0 / (m + 1), delta=1e-13)
		basis = make_time_basis(2)
		self.assertAlmostEqual(basis.weights @ basis.points ** 8, 1.0 / 9.0, delta=1e-13)

	def test_theta_k1(self):
		ops = dg_time_operators(make_time_basis(1))
		self.assertAlmostEqual(ops.Theta.sum(), 1.0, places=13)
		self.assertTrue(np.all(np.linalg.eigvalsh(ops.Theta) > 0))

	def test_integration_by_parts(self):
		for k in range(4):
			basis = make_time_basis(k)
			ops = dg_time_operators(basis)
			np.testing.assert_allclose(
				ops.G.T, np.outer(basis.left_values, basis.left_values) + ops.derivative_moments, atol=1e-13
			)

	def test_under_integration(self):
		with self.assertRaises(QuadratureError):
			make_time_basis(1, quad_points=2)
		basis = make_time_basis(1, allow_under_integration=True)
		self.assertTrue(basis.under_integrated)
		self.assertEqual(len(basis.points), 1)
		self.assertFalse(make_time_basis(1).under_integrated)


class CharacteristicTest(SimpleTestCase):
	def test_constant_degree(self):
		for t_hat in (0.0, 0.3, 1.0):
			rho = discrete_characteristic(0, t_hat)
			self.assertAlmostEqual(float(rho(0.7)), 1.0, places=14)

	def test_full_cut_is_identity(self):
		for k in range(5):
			rho = discrete_characteristic(k, 1.0)
			s = np.linspace(0.0, 1.0, 7)
			np.testing.assert_allclose(rho(s), 1.0, atol=1e-12)

	def test_k1_half(self):
		rho = discrete_characteristic(1, 0.5)
		s = np.linspace(0.0, 1.0, 11)
		np.testing.assert_allclose(rho(s), 1.0 - s, atol=1e-13)

	def test_moments_and_paths_agree(self):
		rng = np.random.default_rng(7)
		for k in range(5):
			for t_hat in rng.uniform(0.0, 1.0, 100):
				moments = discrete_characteristic(k, t_hat)
				explicit = discrete_characteristic(k, t_hat, method="explicit")
				self.assertLessEqual(characteristic_residuals(moments).max(), 1e-12)
				self.assertLessEqual(characteristic_residuals(explicit).max(), 1e-12)
				np.testing.assert_allclose(explicit.coefficients, moments.coefficients, atol=1e-10)

	def test_sup_norm_constants(self):
		self.assertAlmostEqual(sup_norm_scan(0, 21).constant, 1.0, places=12)
		self.assertAlmostEqual(sup_norm_scan(1, 21).constant, 1.0, places=12)
		constants = [sup_norm_scan(k, 101).constant for k in range(4)]
		self.assertGreater(constants[2], 1.0)
		for lower, upper in zip(constants, constants[1:]):
			self.assertGreaterEqual(upper, lower - 1e-12)
		self.assertTrue(np.isfinite(constants).all())

	def test_scan_resolution(self):
		coarse = sup_norm_scan(4, 1001).constant
		fine = sup_norm_scan(4, 2001).constant
		self.assertLess(abs(coarse - fine), 1e-3)

	def test_apply_constant_in_time(self):
		basis = make_time_basis(2)
		u = np.array([1.0, -2.0, 0.5])
		U = np.tile(u, (3, 1))
		rho = discrete_characteristic(2, 0.3)
		tilde = characteristic_apply(U, 0.3, basis)
		np.testing.assert_allclose(tilde, np.outer(rho(basis.node_points), u), atol=1e-12)

	def test_apply_identity(self):
		basis = make_time_basis(3)
		U = np.random.default_rng(1).standard_normal((4, 5))
		np.testing.assert_allclose(characteristic_apply(U, 1.0, basis), U, atol=1e-12)

	def test_apply_moments(self):
		basis = make_time_basis(1)
		U = np.random.default_rng(3).standard_normal((2, 4))
		t_hat = 0.5
		tilde = characteristic_apply(U, t_hat, basis)
		np.testing.assert_allclose(basis.left_values @ tilde, basis.left_values @ U, atol=1e-12)
		s, w = gauss_rule(10)
		full = (basis.evaluate(s) @ tilde).T @ w
		cut = (basis.evaluate(t_hat * s) @ U).T @ (t_hat * w)
		np.testing.assert_allclose(full, cut, atol=1e-12)

import math

import numpy as np
from django.test import SimpleTestCase

from spacetime.exceptions import MeshError, QuadratureError, SpaceError
from spacetime.mesh import (
	build_interval_mesh,
	build_space,
	build_square_mesh,
	gauss_triangle,
	mesh_to_json,
	refine_mesh,
)


class IntervalMeshTest(SimpleTestCase):
	def test_unit_interval_four_cells(self):
		mesh = build_interval_mesh(0.0, 1.0, 4)
		np.testing.assert_array_equal(mesh.vertices[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
		self.assertEqual(mesh.mesh_size_h, 0.25)
		self.assertEqual(mesh.boundary_vertex_flags.tolist(), [True, False, False, False, True])

	def test_single_cell(self):
		mesh = build_interval_mesh(0.0, 1.0, 1)
		self.assertEqual(mesh.n_elements, 1)
		self.assertTrue(mesh.boundary_vertex_flags.all())

	def test_shifted_interval(self):
		mesh = build_interval_mesh(-1.0, 1.0, 8)
		self.assertEqual(mesh.n_vertices, 9)
		self.assertAlmostEqual(mesh.mesh_size_h, 0.25, places=14)

	def test_invalid_input(self):
		with self.assertRaises(MeshError):
			build_interval_mesh(0.0, 1.0, 0)
		with self.assertRaises(MeshError):
			build_interval_mesh(1.0, 1.0, 4)

	def test_refinement_keeps_vertices(self):
		coarse = build_interval_mesh(0.0, 1.0, 8)
		fine = refine_mesh(coarse)
		self.assertEqual(fine.n_elements, 16)
		np.testing.assert_array_equal(fine.vertices[::2], coarse.vertices)


class SquareMeshTest(SimpleTestCase):
	def test_counts(self):
		for n, vertices, triangles, interior in ((1, 4, 2, 0), (2, 9, 8, 1), (4, 25, 32, 9)):
			mesh = build_square_mesh(n)
			self.assertEqual(mesh.n_vertices, vertices)
			self.assertEqual(mesh.n_elements, triangles)
			self.assertEqual(int((~mesh.boundary_vertex_flags).sum()), interior)
			self.assertAlmostEqual(mesh.mesh_size_h, math.sqrt(2.0) / n, places=14)

	def test_conforming_and_oriented(self):
		mesh = build_square_mesh(4)
		self.assertTrue(np.all(mesh.element_volumes() > 0))
		counts = mesh.facet_counts()
		self.assertTrue(set(counts.values()) <= {1, 2})
		self.assertEqual(len(mesh.boundary_facets()), 16)
		self.assertAlmostEqual(mesh.element_volumes().sum(), 1.0, places=14)

	def test_invalid_size(self):
		with self.assertRaises(MeshError):
			build_square_mesh(0)

	def test_refinement_keeps_vertices(self):
		coarse = build_square_mesh(3)
		fine = refine_mesh(coarse)
		for j in range(4):
			for i in range(4):
				np.testing.assert_array_equal(
					fine.vertices[2 * j * 7 + 2 * i], coarse.vertices[j * 4 + i]
				)

	def test_json_dump(self):
		data = mesh_to_json(build_square_mesh(1))
		self.assertEqual(data["dimension"], 2)
		self.assertEqual(len(data["elements"]), 2)
		self.assertEqual(data["boundary_vertex_flags"], [True] * 4)


class SpaceTest(SimpleTestCase):
	def test_dof_counts(self):
		interval = build_interval_mesh(0.0, 1.0, 4)
		p1 = build_space(interval, 1)
		p2 = build_space(interval, 2)
		self.assertEqual((p1.dof_count, p1.n_free), (5, 3))
		self.assertEqual((p2.dof_count, p2.n_free), (9, 7))
		square = build_square_mesh(2)
		q1 = build_space(square, 1)
		q2 = build_space(square, 2)
		self.assertEqual((q1.dof_count, q1.n_free), (9, 1))
		self.assertEqual((q2.dof_count, q2.n_free), (25, 9))

	def test_unsupported_degree(self):
		with self.assertRaises(SpaceError):
			build_space(build_interval_mesh(0.0, 1.0, 4), 3)

	def test_low_quadrature_rejected(self):
		with self.assertRaises(QuadratureError):
			build_space(build_interval_mesh(0.0, 1.0, 4), 2, quad_degree=6)

	def test_dirichlet_dofs_on_boundary(self):
		space = build_space(build_square_mesh(3), 2)
		coords = space.dof_coordinates
		on_boundary = np.any((coords == 0.0) | (coords == 1.0), axis=1)
		np.testing.assert_array_equal(np.flatnonzero(on_boundary), space.dirichlet_dofs)

	def test_p2_edge_dofs_shared(self):
		n = 3
		space = build_space(build_square_mesh(n), 2)
		mesh = space.mesh
		edge_dofs = space.element_dof_map[:, 3:]
		self.assertEqual(len(np.unique(edge_dofs)), 3 * n * n + 2 * n)
		for e, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
			midpoints = 0.5 * (mesh.vertices[mesh.elements[:, i]] + mesh.vertices[mesh.elements[:, j]])
			np.testing.assert_allclose(space.dof_coordinates[edge_dofs[:, e]], midpoints, atol=1e-15)

	def test_partition_of_unity(self):
		meshes = (build_interval_mesh(0.0, 1.0, 5), build_square_mesh(3))
		for mesh in meshes:
			for degree in (1, 2):
				space = build_space(mesh, degree)
				ones = space.quadrature.values_full @ np.ones(space.dof_count)
				np.testing.assert_allclose(ones, 1.0, atol=1e-13)
				self.assertAlmostEqual(space.weights.sum(), 1.0, places=13)

	def test_p1_stiffness(self):
		space = build_space(build_interval_mesh(0.0, 1.0, 4), 1)
		expected = 4.0 * np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
		np.testing.assert_allclose(space.stiffness.toarray(), expected, atol=1e-12)
		self.assertAlmostEqual(np.abs(space.mass - space.mass.T).max(), 0.0, places=15)

	def test_triangle_rule_exactness(self):
		points, weights = gauss_triangle(4)
		value = weights @ (points[:, 0] ** 2 * points[:, 1] ** 2)
		self.assertAlmostEqual(value, 1.0 / 180.0, places=15)

	def test_interpolation_convergence(self):
		g = lambda X: np.sin(np.pi * X[:, 0])
		dg = lambda X: np.pi * np.cos(np.pi * X[:, 0])
		for degree in (1, 2):
			l2, h1 = [], []
			for n in (8, 16, 32, 64):
				space = build_space(build_interval_mesh(0.0, 1.0, n), degree, quad_degree=4 * degree + 6)
				c = space.interpolate(g)
				err = space.evaluate(c) - g(space.points)
				derr = space.evaluate_gradient(c)[0] - dg(space.points)
				l2.append(math.sqrt(space.weights @ err ** 2))
				h1.append(math.sqrt(space.weights @ derr ** 2))
			for coarse, fine in zip(l2[1:], l2[2:]):
				self.assertAlmostEqual(math.log2(coarse / fine), degree + 1, delta=0.15)
			for coarse, fine in zip(h1[1:], h1[2:]):
				self.assertAlmostEqual(math.log2(coarse / fine), degree, delta=0.15)

import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from spacetime.checkpoint import MANIFEST, load_checkpoint, save_checkpoint
from spacetime.exceptions import UnsupportedConfigurationError
from spacetime.forward import solve_forward
from spacetime.mesh import build_space, build_square_mesh
from spacetime.problems import build_problem
from spacetime.timebasis import TimePartition, make_time_basis


class CheckpointTest(SimpleTestCase):
	def setUp(self):
		space = build_space(build_square_mesh(4), 1)
		problem = build_problem('smallsine', 0.5, 0.2, 2)
		self.sol = solve_forward(problem, space, TimePartition.graded(0.2, 3, 2.0), make_time_basis(1))
		self.tmp = tempfile.TemporaryDirectory()
		self.addCleanup(self.tmp.cleanup)

	def test_round_trip(self):
		save_checkpoint(self.sol, self.tmp.name, meta={'problem': 'smallsine'})
		loaded = load_checkpoint(self.tmp.name)
		self.assertEqual(loaded.n_slabs, 3)
		self.assertEqual(loaded.space.n_free, self.sol.space.n_free)
		np.testing.assert_array_equal(loaded.partition.endpoints, self.sol.partition.endpoints)
		np.testing.assert_array_equal(loaded.initial, self.sol.initial)
		for a, b in zip(loaded.slabs, self.sol.slabs):
			np.testing.assert_array_equal(a.coefficients, b.coefficients)
			np.testing.assert_array_equal(a.jump, b.jump)
		manifest = json.loads((Path(self.tmp.name) / MANIFEST).read_text())
		self.assertEqual(manifest['problem'], 'smallsine')
		self.assertEqual(manifest['slabs'], ['slab_0001.npz', 'slab_0002.npz', 'slab_0003.npz'])

	def test_unknown_format(self):
		path = save_checkpoint(self.sol, self.tmp.name)
		manifest = json.loads(path.read_text())
		manifest['format_version'] = 99
		path.write_text(json.dumps(manifest))
		with self.assertRaises(UnsupportedConfigurationError):
			load_checkpoint(self.tmp.name)

import copy
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from AllenCahnLab.celery import app as celery_app
from .config import RunConfig, config_hash, load_config
from .exceptions import ConfigError
from .models import IdentityCheck, NormRecord, Run
from .tasks import dispatch_levels


BASE_CONFIG = {
	"dimension": 1,
	"mesh": {"n": 16},
	"time": {"T": 0.5, "N_slabs": 8, "k": 1},
	"space": {"degree_l": 1},
	"epsilon": 0.5,
	"problem": "expsine",
	"output": {"run_id": "test-run"},
}


def config_dict(**overrides):
	data = copy.deepcopy(BASE_CONFIG)
	for key, value in overrides.items():
		if isinstance(value, dict) and isinstance(data.get(key), dict):
			data[key].update(value)
		else:
			data[key] = value
	return data


class RunConfigTest(SimpleTestCase):
	def test_valid_config(self):
		config = RunConfig.from_dict(config_dict())
		self.assertEqual(config.n_cells, 16)
		self.assertEqual(config.k, 1)
		self.assertEqual(len(config.config_hash), 16)
		self.assertEqual(config.newton_config().max_iter, 25)
		self.assertEqual(config.linear_config().method, "sparse_lu")

	def test_hash_ignores_output_block(self):
		a = config_dict()
		b = config_dict(output={"run_id": "other", "directory": "/tmp/elsewhere"})
		self.assertEqual(config_hash(RunConfig.from_dict(a).data), config_hash(RunConfig.from_dict(b).data))
		c = config_dict(epsilon=0.25)
		self.assertNotEqual(RunConfig.from_dict(a).config_hash, RunConfig.from_dict(c).config_hash)

	def test_unknown_fields_rejected(self):
		with self.assertRaises(ConfigError) as ctx:
			RunConfig.from_dict(config_dict(colour="blue"))
		self.assertIn("colour", ctx.exception.details["errors"])
		with self.assertRaises(ConfigError) as ctx:
			RunConfig.from_dict(config_dict(solver={"newton_abs_tol": 1e-10, "tolerance": 1.0}))
		self.assertIn("tolerance", ctx.exception.details["errors"]["solver"])

	def test_invalid_values(self):
		for bad in (
			config_dict(problem="nope"),
			config_dict(problem="expsine2d"),
			config_dict(mesh={"n_per_side": 4}),
			config_dict(epsilon=0.0),
			config_dict(solver={"newton_rel_tol": -1.0}),
			config_dict(space={"degree_l": 3}),
		):
			with self.assertRaises(ConfigError):
				RunConfig.from_dict(bad)

	def test_ladder_variants(self):
		config = RunConfig.from_dict(config_dict())
		finer = config.replace(n_cells=32, n_slabs=16, run_id="finer")
		self.assertEqual((finer.n_cells, finer.n_slabs, finer.run_id), (32, 16, "finer"))
		self.assertEqual(config.n_cells, 16)

	def test_load_config_errors(self):
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / "broken.json"
			path.write_text("{not json")
			with self.assertRaises(ConfigError):
				load_config(path)
			with self.assertRaises(ConfigError):
				load_config(Path(tmp) / "missing.json")


class CommandTestCase(TestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.addCleanup(self.tmp.cleanup)
		self.out = Path(self.tmp.name)

	def write_config(self, **overrides):
		path = self.out / f"config-{len(list(self.out.glob('config-*.json')))}.json"
		path.write_text(json.dumps(config_dict(**overrides)))
		return str(path)

	def call(self, command, *args, **overrides):
		stdout, stderr = StringIO(), StringIO()
		call_command(command, "--config", self.write_config(**overrides), "--out", str(self.out), *args,
					 stdout=stdout, stderr=stderr)
		return stdout.getvalue()

	def call_failing(self, command, *args, **overrides):
		stderr = StringIO()
		with self.assertRaises(CommandError) as ctx:
			call_command(command, "--config", self.write_config(**overrides), "--out", str(self.out), *args,
						 stdout=StringIO(), stderr=stderr)
		return ctx.exception.returncode, json.loads(stderr.getvalue().strip())["error"]


class SolveCommandTest(CommandTestCase):
	def test_zero_data(self):
		self.call("solve", problem="zero", output={"run_id": "zero"})
		run = Run.objects.get(run_id="zero")
		self.assertEqual(run.status, Run.Status.SUCCEEDED)
		record = NormRecord.objects.get(run=run)
		for name in ("L2L2", "LinfL2", "L2H1", "L4L4", "jump_sum"):
			self.assertEqual(getattr(record, name), 0.0)
		self.assertTrue((self.out / "zero" / "checkpoint" / "checkpoint.json").exists())
		manifest = json.loads((self.out / "zero" / "manifest.json").read_text())
		self.assertEqual(manifest["config_hash"], run.config_hash)

	def test_manufactured_solution(self):
		self.call("solve", time={"k": 0, "N_slabs": 32, "T": 1.0}, mesh={"n": 32}, output={"run_id": "expsine"})
		table = pd.read_csv(self.out / "expsine" / "norms.csv")
		self.assertEqual(len(table), 1)
		self.assertEqual(table.loc[0, "measure"], "error")
		for name in ("L2L2", "LinfL2", "L2H1", "L4L4"):
			self.assertTrue(math.isfinite(table.loc[0, name]))
			self.assertLess(table.loc[0, name], 0.5)

	def test_invalid_problem(self):
		code, error = self.call_failing("solve", problem="nope")
		self.assertEqual(code, 4)
		self.assertEqual(error["type"], "ConfigError")
		self.assertIn("problem", error["details"]["errors"])

	def test_solver_failure(self):
		code, error = self.call_failing(
			"solve", problem="interface", epsilon=0.05, time={"N_slabs": 1, "T": 1.0},
			solver={"max_iter": 1, "newton_abs_tol": 1e-14, "newton_rel_tol": 1e-14}, output={"run_id": "diverge"},
		)
		self.assertEqual(code, 2)
		self.assertEqual(error["type"], "NewtonDivergenceError")
		self.assertEqual(error["details"]["slab"], 1)
		run = Run.objects.get(run_id="diverge")
		self.assertEqual(run.status, Run.Status.FAILED)
		self.assertEqual(run.error["type"], "NewtonDivergenceError")


class ConvergenceCommandTest(CommandTestCase):
	def test_joint_refinement_order(self):
		self.call("convergence", "--levels", "4", "--refine", "both",
				  time={"k": 0, "N_slabs": 16}, mesh={"n": 16}, output={"run_id": "ladder"})
		table = pd.read_csv(self.out / "ladder" / "convergence.csv")
		self.assertEqual(list(table["n_cells"]), [16, 32, 64, 128])
		self.assertEqual(list(table["N"]), [16, 32, 64, 128])
		self.assertTrue(math.isnan(table.loc[0, "order_X"]))
		self.assertGreater(table.loc[3, "order_X"], 0.85)
		self.assertLess(table.loc[3, "order_X"], 1.15)
		self.assertEqual(NormRecord.objects.filter(run__run_id="ladder").count(), 4)

	def test_time_refinement_order(self):
		self.call("convergence", "--levels", "4", "--refine", "time", mesh={"n": 512},
				  time={"T": 1.0, "N_slabs": 2, "k": 1}, output={"run_id": "time-ladder"})
		table = pd.read_csv(self.out / "time-ladder" / "convergence.csv")
		self.assertEqual(list(table["N"]), [2, 4, 8, 16])
		self.assertEqual(set(table["n_cells"]), {512})
		self.assertGreater(table.loc[3, "order_LinfL2"], 1.8)
		self.assertLess(table.loc[3, "order_LinfL2"], 2.2)

	def test_space_refinement_order(self):
		self.call("convergence", "--levels", "3", "--refine", "space", mesh={"n": 8}, space={"degree_l": 2},
				  time={"T": 0.1, "N_slabs": 1000, "k": 0}, output={"run_id": "space-ladder"})
		table = pd.read_csv(self.out / "space-ladder" / "convergence.csv")
		self.assertEqual(list(table["n_cells"]), [8, 16, 32])
		self.assertEqual(set(table["N"]), {1000})
		self.assertGreater(table.loc[2, "order_L2H1"], 1.8)
		self.assertLess(table.loc[2, "order_L2H1"], 2.2)

	def test_parallel_matches_sequential(self):
		config_overrides = dict(time={"k": 0}, mesh={"n": 8}, output={"run_id": "det"})
		self.call("convergence", "--levels", "3", **config_overrides)
		sequential = (self.out / "det" / "convergence.csv").read_bytes()
		previous = celery_app.conf.task_always_eager
		celery_app.conf.task_always_eager = True
		self.addCleanup(setattr, celery_app.conf, "task_always_eager", previous)
		self.call("convergence", "--levels", "3", "--parallel", **config_overrides)
		self.assertEqual((self.out / "det" / "convergence.csv").read_bytes(), sequential)

	def test_parallel_stops_at_first_failed_level(self):
		previous = celery_app.conf.task_always_eager
		celery_app.conf.task_always_eager = True
		self.addCleanup(setattr, celery_app.conf, "task_always_eager", previous)
		strict = {"max_iter": 1, "newton_abs_tol": 1e-14, "newton_rel_tol": 1e-14}
		configs = [
			RunConfig.from_dict(config_dict(output={"run_id": "lvl0"})),
			RunConfig.from_dict(config_dict(solver=strict, output={"run_id": "lvl1"})),
			RunConfig.from_dict(config_dict(output={"run_id": "lvl2"})),
		]
		for parallel in (False, True):
			rows = dispatch_levels(configs, "error", parallel=parallel, stop_on_failure=True)
			self.assertEqual([row["status"] for row in rows], ["ok", "failed"], msg=f"parallel={parallel}")
		rows = dispatch_levels(configs, "error", parallel=True)
		self.assertEqual([row["status"] for row in rows], ["ok", "failed", "ok"])

	def test_rejects_short_ladder_and_profiles(self):
		code, _ = self.call_failing("convergence", "--levels", "2")
		self.assertEqual(code, 4)
		code, error = self.call_failing("convergence", problem="interface")
		self.assertEqual(code, 4)
		self.assertEqual(error["details"]["problem"], "interface")


class StabilitySweepCommandTest(CommandTestCase):
	def test_sweep_rows(self):
		self.call("stability_sweep", "--epsilons", "0.4", "0.2", problem="interface", mesh={"n": 32},
				  time={"T": 0.1, "N_slabs": 4}, output={"run_id": "sweep"})
		table = pd.read_csv(self.out / "sweep" / "stability_sweep.csv")
		self.assertEqual(list(table["epsilon"]), [0.4, 0.2])
		self.assertEqual(list(table["status"]), ["ok", "ok"])
		for name in ("L2L2_scaled", "eps_X", "eps_L4L4_sq"):
			self.assertTrue((table[name] > 0).all())

	def test_scaled_norms_stay_within_factor_four(self):
		self.call("stability_sweep", "--epsilons", "0.4", "0.2", "0.1", "0.05", problem="interface",
				  mesh={"n": 256}, time={"T": 0.2, "N_slabs": 64}, output={"run_id": "sweep4"})
		table = pd.read_csv(self.out / "sweep4" / "stability_sweep.csv")
		self.assertEqual(list(table["status"]), ["ok"] * 4)
		for name in ("L2L2", "eps_X"):
			self.assertLessEqual(table[name].max() / table[name].min(), 4.0, msg=name)
		spread = Run.objects.get(run_id="sweep4").summary["spread"]
		self.assertAlmostEqual(spread["L2L2"], table["L2L2"].max() / table["L2L2"].min())

	def test_epsilons_must_descend(self):
		code, _ = self.call_failing("stability_sweep", "--epsilons", "0.1", "0.2", problem="interface")
		self.assertEqual(code, 4)

	def test_failed_epsilons_are_recorded(self):
		code, error = self.call_failing(
			"stability_sweep", "--epsilons", "0.1", "0.05", problem="interface", time={"N_slabs": 1},
			solver={"max_iter": 1, "newton_abs_tol": 1e-14, "newton_rel_tol": 1e-14}, output={"run_id": "fails"},
		)
		self.assertEqual(code, 2)
		self.assertEqual(error["type"], "StudyFailure")
		table = pd.read_csv(self.out / "fails" / "stability_sweep.csv")
		self.assertEqual(list(table["status"]), ["failed", "failed"])


class VerifyCommandTest(CommandTestCase):
	def test_default_configuration_passes(self):
		self.call("verify", output={"run_id": "verify"})
		checks = {c.name: c for c in IdentityCheck.objects.filter(run__run_id="verify")}
		self.assertEqual(set(checks), {
			"duality", "stability_balance", "energy", "local_projection_moments",
			"characteristic_moments", "time_integration_by_parts",
		})
		for check in checks.values():
			self.assertEqual(check.outcome, IdentityCheck.Outcome.PASSED, msg=check.name)
		self.assertLessEqual(checks["duality"].residual, 1e-8)
		self.assertTrue((self.out / "verify" / "characteristic_constants.csv").exists())

	def test_energy_skipped_for_piecewise_constants(self):
		self.call("verify", time={"k": 0}, output={"run_id": "verify-k0"})
		energy = IdentityCheck.objects.get(run__run_id="verify-k0", name="energy")
		self.assertEqual(energy.outcome, IdentityCheck.Outcome.SKIPPED)
		self.assertEqual(energy.detail["reason"], "skipped (k=0)")

	def test_under_integration_fails_duality(self):
		code, error = self.call_failing("verify", quadrature={"allow_under_integration": True},
										output={"run_id": "control"})
		self.assertEqual(code, 3)
		self.assertIn("duality", error["details"]["failed"])
		self.assertEqual(Run.objects.get(run_id="control").status, Run.Status.FAILED)


class SpectrumCommandTest(CommandTestCase):
	def test_interface_profile(self):
		for eps, run_id in ((0.1, "spectrum"), (0.05, "spectrum-fine")):
			self.call("spectrum", "--source", "profile", "--times", "0.0", problem="interface", epsilon=eps,
					  mesh={"n": 256}, output={"run_id": run_id})
			payload = json.loads((self.out / run_id / "spectrum.json").read_text())
			self.assertEqual(len(payload["lambda_min"]), 1)
			self.assertLessEqual(payload["eps2_abs_lambda_min"], 0.5, msg=f"eps={eps}")
			self.assertGreaterEqual(payload["lambda_min"][0], -10.0, msg=f"eps={eps}")

	def test_times_outside_horizon(self):
		code, _ = self.call_failing("spectrum", "--times", "2.0", output={"run_id": "late"})
		self.assertEqual(code, 4)

from django.test import TestCase
from django.contrib.auth import get_user_model
from rest_framework.test import APIClient
from experiments.models import IdentityCheck, NormRecord, Run


User = get_user_model()


class RunBrowserTest(TestCase):
	def setUp(self):
		self.client = APIClient()
		self.user = User.objects.create_user(username="analyst", email="analyst@example.com", password="pass")

		self.solve = Run.objects.create(
			run_id="solve-1",
			command=Run.Command.SOLVE,
			status=Run.Status.SUCCEEDED,
			config={"problem": "expsine"},
			config_hash="0123456789abcdef",
			output_dir="/tmp/solve-1",
		)
		NormRecord.objects.create(
			run=self.solve, k=1, l=1, N=8, n_cells=16, h=1 / 16, tau=1 / 16, epsilon=0.5,
			L2L2=1e-3, LinfL2=2e-3, L2H1=3e-2, L4L4=1e-3, L4L2=1e-3, jump_sum=0.0,
		)
		self.verify = Run.objects.create(
			run_id="verify-1",
			command=Run.Command.VERIFY,
			status=Run.Status.FAILED,
			config={"problem": "expsine"},
			config_hash="fedcba9876543210",
			output_dir="/tmp/verify-1",
		)
		IdentityCheck.objects.create(run=self.verify, name="duality", lhs=1.0, rhs=1.0, residual=0.0,
									 threshold=1e-8, outcome=IdentityCheck.Outcome.PASSED)
		IdentityCheck.objects.create(run=self.verify, name="energy", outcome=IdentityCheck.Outcome.SKIPPED,
									 detail={"reason": "skipped (k=0)"})

	def test_requires_authentication(self):
		res = self.client.get("/api/runs")
		self.assertIn(res.status_code, (401, 403))

	def test_run_list_pagination_and_filters(self):
		self.client.force_authenticate(user=self.user)
		res = self.client.get("/api/runs", {"page_size": 1})
		self.assertEqual(res.status_code, 200)
		self.assertEqual(res.data["count"], 2)
		self.assertEqual(res.data["total_pages"], 2)
		self.assertEqual(len(res.data["results"]), 1)

		res = self.client.get("/api/runs", {"command": "verify"})
		self.assertEqual([r["run_id"] for r in res.data["results"]], ["verify-1"])
		res = self.client.get("/api/runs", {"status": "succeeded"})
		self.assertEqual([r["run_id"] for r in res.data["results"]], ["solve-1"])

	def test_run_detail(self):
		self.client.force_authenticate(user=self.user)
		res = self.client.get("/api/runs/solve-1")
		self.assertEqual(res.status_code, 200)
		self.assertEqual(len(res.data["norm_records"]), 1)
		self.assertEqual(res.data["norm_records"][0]["L2L2"], 1e-3)

		res = self.client.get("/api/runs/verify-1")
		passed = {c["name"]: c["passed"] for c in res.data["identity_checks"]}
		self.assertEqual(passed, {"duality": True, "energy": None})

		res = self.client.get("/api/runs/missing")
		self.assertEqual(res.status_code, 404)

	def test_problem_registry(self):
		self.client.force_authenticate(user=self.user)
		res = self.client.get("/api/problems", {"dimension": 2})
		self.assertEqual(res.status_code, 200)
		names = {p["name"] for p in res.data["results"]}
		self.assertIn("expsine2d", names)
		self.assertNotIn("expsine", names)

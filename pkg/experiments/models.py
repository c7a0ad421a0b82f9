from django.db import models


class TimestampModel(models.Model):
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True


class Run(TimestampModel):
    class Command(models.TextChoices):
        SOLVE = 'solve', 'Solve'
        CONVERGENCE = 'convergence', 'Convergence'
        STABILITY_SWEEP = 'stability_sweep', 'Stability sweep'
        VERIFY = 'verify', 'Verify'
        SPECTRUM = 'spectrum', 'Spectrum'

    class Status(models.TextChoices):
        RUNNING = 'running', 'Running'
        SUCCEEDED = 'succeeded', 'Succeeded'
        FAILED = 'failed', 'Failed'

    run_id = models.CharField(max_length=100, unique=True, db_index=True)
    command = models.CharField(max_length=20, choices=Command.choices)
    status = models.CharField(max_length=20, choices=Status.choices, default=Status.RUNNING)
    config = models.JSONField()
    config_hash = models.CharField(max_length=16, db_index=True)
    output_dir = models.CharField(max_length=500)
    summary = models.JSONField(blank=True, null=True)
    error = models.JSONField(blank=True, null=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command}:{self.run_id}"


class NormRecord(TimestampModel):
    class Status(models.TextChoices):
        OK = 'ok', 'OK'
        FAILED = 'failed', 'Failed'

    run = models.ForeignKey(Run, related_name='norm_records', on_delete=models.CASCADE)
    level = models.PositiveIntegerField(default=0)
    k = models.PositiveIntegerField()
    l = models.PositiveIntegerField()
    N = models.PositiveIntegerField()
    n_cells = models.PositiveIntegerField()
    h = models.FloatField()
    tau = models.FloatField()
    epsilon = models.FloatField()
    L2L2 = models.FloatField(null=True)
    LinfL2 = models.FloatField(null=True)
    L2H1 = models.FloatField(null=True)
    L4L4 = models.FloatField(null=True)
    L4L2 = models.FloatField(null=True)
    jump_sum = models.FloatField(null=True)
    status = models.CharField(max_length=10, choices=Status.choices, default=Status.OK)
    message = models.TextField(blank=True, default='')

    class Meta:
        ordering = ['run', 'level', '-epsilon']

    def __str__(self):
        return f"{self.run.run_id} level {self.level}"


class IdentityCheck(TimestampModel):
    class Outcome(models.TextChoices):
        PASSED = 'passed', 'Passed'
        FAILED = 'failed', 'Failed'
        SKIPPED = 'skipped', 'Skipped'

    run = models.ForeignKey(Run, related_name='identity_checks', on_delete=models.CASCADE)
    name = models.CharField(max_length=100)
    lhs = models.FloatField(null=True)
    rhs = models.FloatField(null=True)
    residual = models.FloatField(null=True)
    threshold = models.FloatField(null=True)
    outcome = models.CharField(max_length=10, choices=Outcome.choices)
    detail = models.JSONField(blank=True, null=True)

    class Meta:
        ordering = ['run', 'id']

    def __str__(self):
        return f"{self.name}: {self.outcome}"

from rest_framework import serializers

from experiments.models import IdentityCheck, NormRecord, Run


class NormRecordSerializer(serializers.ModelSerializer):
    class Meta:
        model = NormRecord
        fields = [
            "level",
            "k",
            "l",
            "N",
            "n_cells",
            "h",
            "tau",
            "epsilon",
            "L2L2",
            "LinfL2",
            "L2H1",
            "L4L4",
            "L4L2",
            "jump_sum",
            "status",
            "message",
        ]


class IdentityCheckSerializer(serializers.ModelSerializer):
    passed = serializers.SerializerMethodField()

    class Meta:
        model = IdentityCheck
        fields = ["name", "lhs", "rhs", "residual", "threshold", "outcome", "passed", "detail"]

    def get_passed(self, obj):
        if obj.outcome == IdentityCheck.Outcome.SKIPPED:
            return None
        return obj.outcome == IdentityCheck.Outcome.PASSED


class RunSerializer(serializers.ModelSerializer):
    class Meta:
        model = Run
        fields = ["run_id", "command", "status", "config_hash", "output_dir", "created_at", "updated_at"]


class RunDetailSerializer(RunSerializer):
    norm_records = NormRecordSerializer(many=True, read_only=True)
    identity_checks = IdentityCheckSerializer(many=True, read_only=True)

    class Meta(RunSerializer.Meta):
        fields = RunSerializer.Meta.fields + ["config", "summary", "error", "norm_records", "identity_checks"]

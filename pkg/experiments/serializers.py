from rest_framework import serializers

from spacetime.exceptions import UnsupportedConfigurationError
from spacetime.linalg import LINEAR_METHODS
from spacetime.forward import DAMPING_MODES
from spacetime.problems import registry_entry


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields, at every nesting level."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({name: ["Unknown field."] for name in unknown})
        return super().to_internal_value(data)


class MeshSerializer(StrictSerializer):
    n = serializers.IntegerField(min_value=1, required=False)
    n_per_side = serializers.IntegerField(min_value=1, required=False)


class TimeSerializer(StrictSerializer):
    T = serializers.FloatField()
    N_slabs = serializers.IntegerField(min_value=1)
    k = serializers.IntegerField(min_value=0)
    grading_ratio = serializers.FloatField(min_value=1.0, default=1.0)

    def validate_T(self, value):
        if not value > 0:
            raise serializers.ValidationError("Final time must be positive.")
        return value


class SpaceSerializer(StrictSerializer):
    degree_l = serializers.ChoiceField(choices=[1, 2])


class SolverSerializer(StrictSerializer):
    newton_abs_tol = serializers.FloatField(required=False)
    newton_rel_tol = serializers.FloatField(required=False)
    max_iter = serializers.IntegerField(min_value=1, required=False)
    damping = serializers.ChoiceField(choices=DAMPING_MODES, required=False)
    linear_method = serializers.ChoiceField(choices=LINEAR_METHODS, required=False)
    linear_tol = serializers.FloatField(required=False)
    linear_max_iter = serializers.IntegerField(min_value=1, required=False)

    def validate(self, attrs):
        for name in ("newton_abs_tol", "newton_rel_tol", "linear_tol"):
            if name in attrs and not attrs[name] > 0:
                raise serializers.ValidationError({name: ["Tolerances must be positive."]})
        return attrs


class QuadratureSerializer(StrictSerializer):
    time_points = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    space_order = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    allow_under_integration = serializers.BooleanField(default=False)


class OutputSerializer(StrictSerializer):
    directory = serializers.CharField(required=False)
    run_id = serializers.RegexField(r"^[A-Za-z0-9_.-]+$", max_length=100)


class RunConfigSerializer(StrictSerializer):
    dimension = serializers.ChoiceField(choices=[1, 2])
    mesh = MeshSerializer()
    time = TimeSerializer()
    space = SpaceSerializer()
    epsilon = serializers.FloatField()
    problem = serializers.CharField()
    solver = SolverSerializer(required=False, default=dict)
    quadrature = QuadratureSerializer(required=False, default=dict)
    output = OutputSerializer()

    def validate_epsilon(self, value):
        if not value > 0:
            raise serializers.ValidationError("epsilon must be positive.")
        return value

    def validate(self, attrs):
        mesh = attrs["mesh"]
        wanted, other = ("n", "n_per_side") if attrs["dimension"] == 1 else ("n_per_side", "n")
        if wanted not in mesh or other in mesh:
            raise serializers.ValidationError({"mesh": [f"dimension {attrs['dimension']} needs exactly mesh.{wanted}."]})
        try:
            registry_entry(attrs["problem"], attrs["dimension"])
        except UnsupportedConfigurationError as exc:
            raise serializers.ValidationError({"problem": [exc.message]})
        return attrs

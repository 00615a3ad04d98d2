from rest_framework import serializers

from engine.services import ExperimentConfig
from stats.estimators import NULL_CONVENTIONS, normalize_convention

CONVENTION_CHOICES = [*NULL_CONVENTIONS, "discard", "minus"]


class ExperimentConfigSerializer(serializers.Serializer):
    """Experiment config JSON, as written by hand or by `ExperimentConfig.to_dict()`."""

    physics = serializers.DictField()
    source = serializers.DictField(required=False, default=dict)
    efficiency_a = serializers.FloatField(required=False, default=1.0, min_value=0.0, max_value=1.0)
    efficiency_b = serializers.FloatField(required=False, default=1.0, min_value=0.0, max_value=1.0)
    herald_probability = serializers.FloatField(required=False, default=1.0, min_value=0.0, max_value=1.0)
    trials = serializers.IntegerField(required=False, default=1000, min_value=1)
    seed = serializers.IntegerField(required=False, default=0, min_value=0, max_value=2**64 - 1)
    geometry = serializers.DictField(required=False, allow_null=True, default=None)
    record_hidden = serializers.BooleanField(required=False, default=False)

    def validate(self, attrs):
        max_trials = self.context.get("max_trials")
        if max_trials is not None and attrs["trials"] > max_trials:
            raise serializers.ValidationError(f"trials must be <= {max_trials}")
        try:
            attrs["config"] = ExperimentConfig.from_dict(attrs)
        except (ValueError, KeyError, TypeError) as e:
            raise serializers.ValidationError(str(e)) from e
        return attrs


class SimulateRequestSerializer(ExperimentConfigSerializer):
    convention = serializers.ChoiceField(required=False, default="discard_nulls", choices=CONVENTION_CHOICES)

    def validate_convention(self, value):
        return normalize_convention(value)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        # Server-side files are not readable through the API.
        if attrs["config"].source.kind == "external_bitstream":
            raise serializers.ValidationError("external_bitstream sources are only available from the simulate command")
        return attrs


class ChshQuerySerializer(serializers.Serializer):
    # Analyzer angles in degrees; defaults are the Tsirelson settings.
    a = serializers.FloatField(required=False, default=0.0)
    a_prime = serializers.FloatField(required=False, default=45.0)
    b = serializers.FloatField(required=False, default=22.5)
    b_prime = serializers.FloatField(required=False, default=67.5)
    state = serializers.ChoiceField(required=False, default="bell_plus", choices=["bell_plus", "bell_minus", "eberhard"])
    r = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0, max_value=1.0)

    def validate(self, attrs):
        if attrs.get("state") == "eberhard" and not attrs.get("r"):
            raise serializers.ValidationError("r in (0, 1] is required for the eberhard state")
        return attrs


class BoundQuerySerializer(serializers.Serializer):
    eta = serializers.FloatField(min_value=0.0, max_value=1.0)
    include_adversary = serializers.BooleanField(required=False, default=False)
    convention = serializers.ChoiceField(required=False, default="discard_nulls", choices=["discard_nulls", "null_as_minus"])

    def validate_eta(self, value):
        if value <= 0:
            raise serializers.ValidationError("eta must be in (0, 1]")
        return value


class AnalyzeQuerySerializer(serializers.Serializer):
    log = serializers.CharField()
    convention = serializers.ChoiceField(required=False, default="discard_nulls", choices=CONVENTION_CHOICES)

    def validate_convention(self, value):
        return normalize_convention(value)


class EventSerializer(serializers.Serializer):
    label = serializers.CharField()
    t = serializers.FloatField()
    x = serializers.FloatField(required=False, default=0.0)
    y = serializers.FloatField(required=False, default=0.0)
    z = serializers.FloatField(required=False, default=0.0)


class AuditRequestSerializer(serializers.Serializer):
    events = EventSerializer(many=True)
    setting_sources = serializers.DictField(
        child=EventSerializer(many=True), required=False, default=dict
    )

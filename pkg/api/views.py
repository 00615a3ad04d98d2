import math

from django.conf import settings
from django.core.cache import cache
from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import APIView

from domain.models import ExperimentRun
from engine.logs import TrialLogStore
from engine.services import TrialEngine
from quantum.services import TSIRELSON_BOUND, QuantumService, SettingsQuad
from spacetime.services import SpacetimeEvent, SpacetimeService
from stats.estimators import efficiency_bound
from synthesize.services import SynthesisService
from tooling.presets import PRESETS
from tooling.services import ReportService

from .serializers import (
    AnalyzeQuerySerializer,
    AuditRequestSerializer,
    BoundQuerySerializer,
    ChshQuerySerializer,
    SimulateRequestSerializer,
)


class PresetsView(APIView):
    def get(self, request):
        items = []
        for preset in PRESETS.values():
            items.append(
                {
                    "name": preset.name,
                    "title": preset.title,
                    "reference_S": preset.reference_S,
                    "reference_se": preset.reference_se,
                    "reference": preset.reference_label,
                    "closes": list(preset.closes),
                    "opens": list(preset.opens),
                    "notes": preset.notes,
                }
            )
        return Response(items)


class ChshView(APIView):
    def get(self, request):
        params = ChshQuerySerializer(data=request.query_params)
        params.is_valid(raise_exception=True)
        data = params.validated_data
        try:
            state = QuantumService.make_state(data["state"], r=data.get("r"))
            quad = SettingsQuad.from_degrees(data["a"], data["a_prime"], data["b"], data["b_prime"])
            correlations = QuantumService.correlations(state, quad)
            S = QuantumService.chsh_value(state, quad)
        except ValueError as e:
            return Response({"error": str(e)}, status=status.HTTP_400_BAD_REQUEST)

        return Response(
            {
                "state": state.label,
                "settings_degrees": {k: data[k] for k in ("a", "a_prime", "b", "b_prime")},
                "correlations": {f"{i}{j}": value for (i, j), value in correlations.items()},
                "S": S,
                "tsirelson_bound": TSIRELSON_BOUND,
                "at_tsirelson_bound": math.isclose(S, TSIRELSON_BOUND, abs_tol=1e-9),
                "violates_local_bound": S > 2.0 + 1e-12,
            }
        )


class BoundView(APIView):
    def get(self, request):
        params = BoundQuerySerializer(data=request.query_params)
        params.is_valid(raise_exception=True)
        eta = params.validated_data["eta"]
        convention = params.validated_data["convention"]

        try:
            payload = efficiency_bound(eta).to_dict()
        except ValueError as e:
            return Response({"error": str(e)}, status=status.HTTP_400_BAD_REQUEST)

        if params.validated_data["include_adversary"]:
            cache_key = f"adversary:efficiency:{eta!r}:{convention}"
            adversary = cache.get(cache_key)
            if adversary is None:
                report = SynthesisService.max_chsh_given_efficiency(eta, convention=convention)
                adversary = report.to_dict()
                cache.set(cache_key, adversary, settings.SCENARIO_CACHE_SECONDS)
            payload["adversary"] = adversary
        return Response(payload)


class AuditView(APIView):
    def post(self, request):
        body = AuditRequestSerializer(data=request.data)
        body.is_valid(raise_exception=True)
        try:
            events = [SpacetimeEvent.from_dict(item) for item in body.validated_data["events"]]
            report = SpacetimeService.check_events(events)
            payload = report.to_dict()
            sources = body.validated_data.get("setting_sources") or {}
            if sources:
                exclusion = SpacetimeService.foc_exclusion_time(
                    {side: [SpacetimeEvent.from_dict(e) for e in items] for side, items in sources.items()}
                )
                payload["foc_exclusion"] = exclusion.to_dict()
        except ValueError as e:
            return Response({"error": str(e)}, status=status.HTTP_400_BAD_REQUEST)
        return Response(payload)


class AnalyzeView(APIView):
    def get(self, request):
        params = AnalyzeQuerySerializer(data=request.query_params)
        params.is_valid(raise_exception=True)
        try:
            path = TrialLogStore.resolve_path(params.validated_data["log"])
            log = TrialLogStore.read(path)
            payload = ReportService.analyze_log(log, convention=params.validated_data["convention"])
        except FileNotFoundError as e:
            return Response({"error": str(e)}, status=status.HTTP_404_NOT_FOUND)
        except ValueError as e:
            return Response({"error": str(e)}, status=status.HTTP_400_BAD_REQUEST)
        payload["log"] = path.name
        return Response(payload)


class SimulateView(APIView):
    def post(self, request):
        body = SimulateRequestSerializer(data=request.data, context={"max_trials": settings.BELL_MAX_API_TRIALS})
        body.is_valid(raise_exception=True)
        config = body.validated_data["config"]
        try:
            log = TrialEngine.run(config)
            payload = ReportService.analyze_log(log, convention=body.validated_data["convention"])
        except ValueError as e:
            return Response({"error": str(e)}, status=status.HTTP_400_BAD_REQUEST)
        audit = ReportService.audit_log(log)
        payload["audit"] = audit.to_dict() if audit is not None else None
        payload["config"] = config.to_dict()
        return Response(payload)


class RunsView(APIView):
    def get(self, request):
        items = [
            {
                "id": run.pk,
                "name": run.name,
                "source": run.source,
                "seed": run.seed,
                "trials": run.trials,
                "convention": run.convention,
                "S": run.s_value,
                "std_error": run.std_error,
                "sigma": run.sigma,
                "p_value": run.p_value,
                "epsilon": run.epsilon,
                "reference": run.reference,
                "audit_passed": run.audit_passed,
                "created_at": run.created_at.isoformat(),
            }
            for run in ExperimentRun.objects.all()[:500]
        ]
        return Response(items)

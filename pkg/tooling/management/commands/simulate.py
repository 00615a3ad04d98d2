from __future__ import annotations

from django.core.management.base import BaseCommand

from api.serializers import ExperimentConfigSerializer
from engine.logs import TrialLogStore
from engine.services import TrialEngine
from spacetime.services import SpacetimeService
from tooling.cliutils import dumps, load_json_file, output_path, usage_error
from tooling.services import ReportService


class Command(BaseCommand):
    help = "Run the trial engine on an experiment config JSON and write the trial log CSV (plus .meta.json)."

    @staticmethod
    def _format_errors(errors) -> str:
        if isinstance(errors, dict):
            return "; ".join(f"{key}: {Command._format_errors(value)}" for key, value in errors.items())
        if isinstance(errors, list):
            return ", ".join(Command._format_errors(e) for e in errors)
        return str(errors)

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Path to an experiment config JSON file.")
        parser.add_argument("--seed", type=int, default=None, help="Override the config seed.")
        parser.add_argument("--trials", type=int, default=None, help="Override the config trial count.")
        parser.add_argument(
            "--output",
            default=None,
            help="Output CSV (default: RESULTS_DIR/<physics>_seed<seed>_n<trials>.csv).",
        )
        parser.add_argument("--include-hidden", action="store_true", help="Also write the hidden-variable column.")
        parser.add_argument("--json", action="store_true", help="Print a JSON summary.")

    def handle(self, *args, **options):
        raw = load_json_file(options["config"], what="config file")
        if not isinstance(raw, dict):
            raise usage_error("config file must hold a JSON object")
        if options["seed"] is not None:
            raw["seed"] = options["seed"]
        if options["trials"] is not None:
            raw["trials"] = options["trials"]

        serializer = ExperimentConfigSerializer(data=raw)
        if not serializer.is_valid():
            raise usage_error(f"invalid config: {self._format_errors(serializer.errors)}")
        config = serializer.validated_data["config"]

        try:
            log = TrialEngine.run(config)
        except FileNotFoundError as exc:
            raise usage_error(str(exc)) from exc
        except ValueError as exc:
            raise usage_error(str(exc)) from exc

        if options["output"]:
            path = output_path(options["output"])
        else:
            path = output_path(TrialLogStore.build_filename(config.physics.kind, seed=config.seed, trials=config.trials))
        TrialLogStore.write(log, path, include_hidden=options["include_hidden"])

        summary = {"log_file": str(path), "meta": log.meta}
        audit = ReportService.audit_log(log)
        if audit is not None:
            summary["audit"] = audit.to_dict()
        sources = config.geometry.setting_source_events() if config.geometry is not None else {}
        if sources:
            summary["foc_exclusion"] = SpacetimeService.foc_exclusion_time(sources).to_dict()

        if options["json"]:
            self.stdout.write(dumps(summary))
            return
        self.stdout.write(f"[OK] {len(log)} trials ({config.physics.kind}, seed {config.seed}) -> {path}")
        if audit is not None:
            verdict = "PASS" if audit.passed else f"FAIL (conditions {', '.join(map(str, audit.failed_conditions))})"
            self.stdout.write(f"    locality audit: {verdict}")
        if "foc_exclusion" in summary:
            self.stdout.write(f"    freedom-of-choice exclusion: {summary['foc_exclusion']['exclusion_time']:g}")
        self.stdout.write("Done.")

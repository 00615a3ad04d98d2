from __future__ import annotations

from django.core.management.base import BaseCommand

from engine.logs import TrialLogStore
from engine.services import TrialEngine
from spacetime.services import SpacetimeEvent, SpacetimeService
from tooling.cliutils import data_error, dumps, load_json_file, usage_error


class Command(BaseCommand):
    help = "Check the six locality conditions for an event set, or for one trial of a trial log with geometry."

    @staticmethod
    def _load_sources(path: str) -> dict[str, list[SpacetimeEvent]]:
        raw = load_json_file(path, what="setting-source file", error=data_error)
        if not isinstance(raw, dict):
            raise data_error("setting-source file must map side -> list of events")
        try:
            return {side: SpacetimeService.load_events(items) for side, items in raw.items()}
        except ValueError as exc:
            raise data_error(str(exc)) from exc

    def add_arguments(self, parser):
        parser.add_argument("--events", default=None, help="JSON array of labeled events (t, x, y, z).")
        parser.add_argument("--log", default=None, help="Trial log (path) with event coordinates.")
        parser.add_argument("--trial", type=int, default=0, help="Row of the trial log to audit (default 0).")
        parser.add_argument("--sources", default=None, help="JSON {side: [events]} of setting-source emissions.")
        parser.add_argument("--json", action="store_true", help="Print the report as JSON.")

    def handle(self, *args, **options):
        if bool(options["events"]) == bool(options["log"]):
            raise usage_error("give exactly one of --events or --log")

        try:
            if options["events"]:
                raw = load_json_file(options["events"], what="event-set file", error=data_error)
                report = SpacetimeService.check_events(SpacetimeService.load_events(raw))
            else:
                log = TrialLogStore.read(options["log"])
                report = SpacetimeService.check_locality_arrangement(**TrialEngine.trial_events(log, options["trial"]))
        except FileNotFoundError as exc:
            raise data_error(str(exc)) from exc
        except ValueError as exc:
            raise data_error(str(exc)) from exc

        payload = report.to_dict()
        if options["sources"]:
            exclusion = SpacetimeService.foc_exclusion_time(self._load_sources(options["sources"]))
            payload["foc_exclusion"] = exclusion.to_dict()

        if options["json"]:
            self.stdout.write(dumps(payload))
            return
        for verdict in report.verdicts:
            tag = "[OK]" if verdict.passed else "[FAIL]"
            self.stdout.write(f"{tag} ({verdict.number}) {verdict.description}")
            for interval in verdict.violations:
                self.stdout.write(
                    f"       {interval.first} -> {interval.second}: s2 = {interval.s2:.6g} ({interval.classification})"
                )
        self.stdout.write(f"locality arrangement: {'PASS' if report.passed else 'FAIL'}")
        if "foc_exclusion" in payload:
            exclusion = payload["foc_exclusion"]
            self.stdout.write(
                f"freedom-of-choice exclusion: {exclusion['exclusion_time']:g} "
                f"(latest common cause {exclusion['latest_common_cause']:g})"
            )
        self.stdout.write("Done.")

"""Run a historical scenario preset at simulation scale.

Each preset pairs an ideal entangled state with the geometry, setting source
and detection efficiency of one experiment class, then prints the estimated S
next to the published value together with the locality audit verdict.
"""

from __future__ import annotations

from django.core.management.base import BaseCommand

from engine.logs import TrialLogStore
from stats.estimators import InsufficientDataError
from tooling.cliutils import (
    data_error,
    dumps,
    fmt,
    output_path,
    parse_convention,
    parse_seed,
    parse_trials,
    usage_error,
)
from tooling.presets import PRESETS, get_preset
from tooling.services import ReportService


class Command(BaseCommand):
    help = "Run a scenario preset (freedman-clauser, aspect, weihs, nist-ions, delft, cosmic-vienna, cosmic-quasar)."

    def add_arguments(self, parser):
        parser.add_argument("name", nargs="?", default=None, help="Preset name; omit to list presets.")
        parser.add_argument("--seed", type=int, default=None, help="Master seed (default: settings.BELL_DEFAULT_SEED).")
        parser.add_argument("--trials", type=int, default=None, help="Trials per run (default: settings.BELL_DEFAULT_TRIALS).")
        parser.add_argument("--convention", default="discard_nulls", help="discard_nulls|null_as_minus (aliases discard|minus).")
        parser.add_argument("--replications", type=int, default=1, help="Independent replications with derived seeds.")
        parser.add_argument("--jobs", type=int, default=1, help="Worker threads for replications.")
        parser.add_argument("--output", default=None, help="Write the (first) trial log CSV here.")
        parser.add_argument("--record", action="store_true", help="Store the result as an ExperimentRun.")
        parser.add_argument("--json", action="store_true", help="Print the report as JSON.")

    def _list_presets(self, as_json: bool):
        if as_json:
            self.stdout.write(dumps([preset.to_dict() for preset in PRESETS.values()]))
            return
        for preset in PRESETS.values():
            self.stdout.write(f"{preset.name:<17} published: {preset.reference_label:<14} {preset.title}")

    def handle(self, *args, **options):
        if not options["name"]:
            self._list_presets(options["json"])
            return
        try:
            preset = get_preset(options["name"])
        except KeyError:
            raise usage_error(f"unknown scenario {options['name']!r}; choose from {', '.join(PRESETS)}") from None

        seed = parse_seed(options["seed"])
        trials = parse_trials(options["trials"])
        convention = parse_convention(options["convention"])
        replications = int(options["replications"])
        jobs = int(options["jobs"])
        if replications < 1 or jobs < 1:
            raise usage_error("--replications and --jobs must be >= 1")

        try:
            report, logs = ReportService.run_scenario(
                preset, seed=seed, trials=trials, convention=convention, replications=replications, jobs=jobs
            )
        except InsufficientDataError as exc:
            raise data_error(str(exc)) from exc
        except ValueError as exc:
            raise usage_error(str(exc)) from exc

        if options["output"]:
            path = TrialLogStore.write(logs[0], output_path(options["output"]))
            report["log_file"] = str(path)
        if options["record"]:
            run = ReportService.record_run(report, name=preset.name, source="scenario", seed=seed)
            report["run_id"] = run.pk

        if options["json"]:
            self.stdout.write(dumps(report))
            return
        self._write_report(report)
        self.stdout.write("Done.")

    def _write_report(self, report: dict):
        w = self.stdout.write
        w(
            f"[OK] {report['scenario']}: S = {fmt(report['S'])} ± {fmt(report['se'])} "
            f"({report['convention']}, {report['trials_scored']} trials scored, seed {report['seed']})"
        )
        reference = report["reference"]
        w(f"    published: {reference['label']} (difference: {reference['difference']})")
        significance = report["significance"]
        p_note = " (underflow)" if significance["underflow"] else ""
        w(
            f"    sigma above 2: {fmt(report['sigma'], 1)}; martingale p = {report['p']:.3g}{p_note}, "
            f"log10 p = {significance['log10_martingale_p']:.1f}"
        )
        w(f"    p as sigma: one-sided {fmt(report['sigma_one_sided'], 2)}, two-sided {fmt(report['sigma_two_sided'], 2)}")
        balance = report["setting_balance"]
        w(f"    settings: {report['source']} ({report['source_label']}), epsilon = {report['epsilon']:.4f}")
        detection = report.get("detection")
        if detection:
            state = "OPEN" if detection["loophole_open"] else "closed"
            w(f"    detection: eta = {detection['eta']:g}, local bound = {fmt(detection['bound'], 3)}, loophole {state}")
        if "event_ready" in report:
            w(f"    event-ready: kept {report['event_ready']['kept']} of {report['event_ready']['total']} trials")

        audit = report.get("audit")
        if audit is not None:
            if audit["pass"]:
                w("    locality audit: PASS")
            else:
                failed = ", ".join(str(c) for c in audit["failed_conditions"])
                w(f"    locality audit: FAIL (conditions {failed})")
        if balance["predictable"]:
            w(f"[WARN] {report['source']} setting source flagged predictable")

        exclusion = report.get("foc_exclusion")
        if exclusion:
            w(f"    freedom-of-choice exclusion: {exclusion['exclusion_time']:g} {exclusion['units']}")
        if "freedman_delta" in report:
            delta = report["freedman_delta"]
            w(f"    freedman delta: {fmt(delta['delta'])} ± {fmt(delta['std_error'])}")
        for row in report.get("replications", []):
            w(f"    replication seed={row['seed']}: S = {fmt(row['S'])} ± {fmt(row['std_error'])}")
        if "log_file" in report:
            w(f"[OK] trial log -> {report['log_file']}")
        if "run_id" in report:
            w(f"[OK] recorded run #{report['run_id']}")

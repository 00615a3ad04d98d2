from __future__ import annotations

from pathlib import Path

from django.core.management.base import BaseCommand

from engine.logs import TrialLogStore
from quantum.services import SETTING_PAIRS
from stats.estimators import renormalized_correlation
from tooling.cliutils import data_error, dumps, fmt, parse_convention
from tooling.services import ReportService


class Command(BaseCommand):
    help = "Estimate S, significance and setting balance from a trial log CSV."

    @staticmethod
    def _resolve(value: str) -> Path:
        path = Path(value)
        if path.exists():
            return path
        try:
            return TrialLogStore.resolve_path(value)
        except (FileNotFoundError, ValueError) as exc:
            raise data_error(str(exc)) from exc

    def add_arguments(self, parser):
        parser.add_argument("--log", required=True, help="Trial log path, or a log name under RESULTS_DIR.")
        parser.add_argument("--convention", default="discard_nulls", help="discard_nulls|null_as_minus (aliases discard|minus).")
        parser.add_argument("--renormalized", action="store_true", help="Also report E' over double + single detections.")
        parser.add_argument("--record", action="store_true", help="Store the result as an ExperimentRun.")
        parser.add_argument("--json", action="store_true", help="Print the report as JSON.")

    def handle(self, *args, **options):
        convention = parse_convention(options["convention"])
        path = self._resolve(options["log"])
        try:
            log = TrialLogStore.read(path)
            report = ReportService.analyze_log(log, convention=convention)
            if options["renormalized"]:
                report["renormalized"] = {
                    f"{a}{b}": renormalized_correlation(log, (a, b)).to_dict() for a, b in SETTING_PAIRS
                }
        except ValueError as exc:
            raise data_error(str(exc)) from exc
        report["log"] = path.name

        audit = ReportService.audit_log(log)
        report["audit"] = audit.to_dict() if audit is not None else None
        if options["record"]:
            run = ReportService.record_run(report, name=path.stem, source="analyze", seed=log.meta.get("seed"))
            report["run_id"] = run.pk

        if options["json"]:
            self.stdout.write(dumps(report))
            return
        self.stdout.write(
            f"[OK] {path.name}: S = {fmt(report['S'])} ± {fmt(report['se'])} "
            f"({report['convention']}, {report['trials_scored']} trials scored)"
        )
        self.stdout.write(f"    sigma above 2: {fmt(report['sigma'], 1)}; martingale p = {report['p']:.3g}")
        self.stdout.write(
            f"    p as sigma: one-sided {fmt(report['sigma_one_sided'], 2)}, two-sided {fmt(report['sigma_two_sided'], 2)}"
        )
        self.stdout.write(f"    setting balance: epsilon = {report['epsilon']:.4f}")
        if report["setting_balance"]["predictable"]:
            self.stdout.write("[WARN] setting source flagged predictable")
        if report.get("signals_distant_setting"):
            self.stdout.write("[WARN] log produced by a model that signals the distant setting")
        for key, item in report.get("renormalized", {}).items():
            self.stdout.write(f"    E'({key}) = {fmt(item['E_prime'])}, E'/E = {fmt(item['ratio'])}")
        if audit is not None:
            self.stdout.write(f"    locality audit: {'PASS' if audit.passed else 'FAIL'}")
        if "run_id" in report:
            self.stdout.write(f"[OK] recorded run #{report['run_id']}")
        self.stdout.write("Done.")

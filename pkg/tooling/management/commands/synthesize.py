from __future__ import annotations

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from quantum.services import SETTING_PAIRS
from synthesize.services import MIN_RESTARTS, AdversaryReport, SynthesisService
from tooling.cliutils import dumps, infeasible_error, load_json_file, usage_error


class Command(BaseCommand):
    help = (
        "Synthesize a local adversary: `efficiency --eta` (max S under detection efficiency) or "
        "`foc --targets` (min setting/hidden-variable mutual information)."
    )

    @staticmethod
    def _parse_targets(value: str) -> dict[tuple[int, int], float]:
        """`tsirelson`, or a JSON file {"00": E, "10": E, "01": E, "11": E} keyed by setting pair a b."""
        if (value or "").strip().lower() == "tsirelson":
            return SynthesisService.tsirelson_targets()
        raw = load_json_file(value, what="targets file")
        if not isinstance(raw, dict):
            raise usage_error("targets file must hold a JSON object keyed by setting pair")
        targets = {}
        for a, b in SETTING_PAIRS:
            key = f"{a}{b}"
            if key not in raw:
                raise usage_error(f"targets file is missing pair {key}")
            try:
                targets[(a, b)] = float(raw[key])
            except (TypeError, ValueError) as exc:
                raise usage_error(f"target {key} must be a number") from exc
        return targets

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=["efficiency", "foc"], help="Which adversary to build.")
        parser.add_argument("--eta", type=float, default=None, help="Detection efficiency (efficiency only).")
        parser.add_argument("--convention", default="discard_nulls", help="discard_nulls|null_as_minus (efficiency only).")
        parser.add_argument("--targets", default="tsirelson", help="tsirelson or a targets JSON file (foc only).")
        parser.add_argument("--restarts", type=int, default=None, help="Restarts (default: settings.MI_RESTARTS, at least 32).")
        parser.add_argument("--max-iterations", type=int, default=3000, help="Iterations per restart (foc only).")
        parser.add_argument("--seed", type=int, default=0, help="Seed for restarts and verification.")
        parser.add_argument("--jobs", type=int, default=1, help="Worker threads for restarts.")
        parser.add_argument("--verify", type=int, default=None, metavar="N", help="Simulate N trials with the adversary.")
        parser.add_argument("--output", default=None, help="Write the full report (with model fixture) as JSON.")
        parser.add_argument("--json", action="store_true", help="Print the report as JSON.")

    def _build(self, options) -> AdversaryReport:
        if options["kind"] == "efficiency":
            if options["eta"] is None:
                raise usage_error("--eta is required for the efficiency adversary")
            try:
                return SynthesisService.max_chsh_given_efficiency(
                    options["eta"], convention=(options["convention"] or "").strip().lower()
                )
            except ValueError as exc:
                raise usage_error(str(exc)) from exc

        restarts = max(MIN_RESTARTS, options["restarts"] or settings.MI_RESTARTS)
        if options["jobs"] < 1 or options["max_iterations"] < 1:
            raise usage_error("--jobs and --max-iterations must be >= 1")
        targets = self._parse_targets(options["targets"])
        try:
            return SynthesisService.min_mutual_information(
                targets,
                restarts=restarts,
                seed=options["seed"],
                max_iterations=options["max_iterations"],
                jobs=options["jobs"],
            )
        except ValueError as exc:
            raise usage_error(str(exc)) from exc

    def handle(self, *args, **options):
        report = self._build(options)
        if not report.is_optimal:
            raise infeasible_error(f"{report.kind} adversary is infeasible (status {report.status})")

        payload = report.to_dict()
        verification = None
        if options["verify"]:
            if options["verify"] < 1:
                raise usage_error("--verify must be >= 1")
            verification = SynthesisService.verify_adversary(report, trials=options["verify"], seed=options["seed"])
            payload["verification"] = verification.to_dict()
        if options["output"]:
            path = Path(options["output"])
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(dumps(payload) + "\n", encoding="utf-8")

        if options["json"]:
            self.stdout.write(dumps(payload))
            return
        if report.kind == "efficiency":
            eta = report.parameters["eta"]
            line = f"[OK] efficiency adversary eta={eta:g}: S = {report.achieved_S:.6f} (4/eta - 2 = {4 / eta - 2:.6f})"
            if report.achieved_S_prime is not None:
                line += f", S' = {report.achieved_S_prime:.6f}"
        else:
            line = (
                f"[OK] freedom-of-choice adversary: I = {report.achieved_I:.4f} bits, S = {report.achieved_S:.6f}, "
                f"method {report.parameters.get('method')}, restarts {report.parameters.get('restarts')}"
            )
        self.stdout.write(line)
        self.stdout.write(f"    residual {report.max_residual:.2e}, support {len(report.model.lambda_support)} strategies")
        if verification is not None:
            tag = "[OK]" if verification.passed else "[FAIL]"
            self.stdout.write(
                f"{tag} verify: S_emp = {verification.empirical_S:.4f} ± {verification.std_error:.4f}, "
                f"expected {verification.expected_S:.4f} (z = {verification.z_score:.2f})"
            )
        if options["output"]:
            self.stdout.write(f"[OK] report -> {options['output']}")
        self.stdout.write("Done.")

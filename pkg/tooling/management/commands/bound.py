from __future__ import annotations

from django.core.management.base import BaseCommand

from stats.estimators import efficiency_bound, required_efficiency
from synthesize.services import SynthesisService
from tooling.cliutils import dumps, infeasible_error, usage_error


class Command(BaseCommand):
    help = "Print the local CHSH ceiling 4/eta - 2 for detection efficiency eta (optionally with the LP adversary)."

    def add_arguments(self, parser):
        parser.add_argument("--eta", type=float, required=True, help="Symmetric detection efficiency in (0, 1].")
        parser.add_argument("--adversary", action="store_true", help="Also solve for the optimal local adversary.")
        parser.add_argument("--target-s", type=float, default=None, help="Also print the efficiency needed for this S.")
        parser.add_argument("--json", action="store_true", help="Print the result as JSON.")

    def handle(self, *args, **options):
        try:
            bound = efficiency_bound(options["eta"])
            payload = bound.to_dict()
            if options["target_s"] is not None:
                payload["target_S"] = options["target_s"]
                payload["required_eta"] = required_efficiency(options["target_s"])
        except ValueError as exc:
            raise usage_error(str(exc)) from exc

        if options["adversary"]:
            report = SynthesisService.max_chsh_given_efficiency(bound.eta)
            if not report.is_optimal:
                raise infeasible_error(f"efficiency adversary ended with status {report.status}")
            payload["adversary"] = {
                "achieved_S": report.achieved_S,
                "achieved_S_prime": report.achieved_S_prime,
                "max_residual": report.max_residual,
                "iterations": report.iterations,
            }

        if options["json"]:
            self.stdout.write(dumps(payload))
            return
        state = "OPEN" if bound.loophole_open else "closed"
        self.stdout.write(
            f"bound(eta={bound.eta:g}) = 4/eta - 2 = {bound.bound:.6f}; "
            f"critical eta = {bound.critical_eta:.6f}; detection loophole {state}"
        )
        if "required_eta" in payload:
            self.stdout.write(f"S = {payload['target_S']:g} needs eta >= {payload['required_eta']:.6f}")
        if "adversary" in payload:
            adversary = payload["adversary"]
            self.stdout.write(
                f"[OK] local adversary: S = {adversary['achieved_S']:.6f}, S' = {adversary['achieved_S_prime']:.6f}"
            )
        self.stdout.write("Done.")

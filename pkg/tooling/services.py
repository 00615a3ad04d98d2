from __future__ import annotations

import dataclasses
import logging
from typing import Optional

from engine.services import ExperimentConfig, TrialEngine, TrialLog
from quantum.services import TSIRELSON_BOUND
from spacetime.services import ArrangementReport, SpacetimeService
from stats.estimators import (
    efficiency_bound,
    estimate_S,
    freedman_delta,
    normalize_convention,
    setting_balance,
)
from stats.significance import gaussian_significance, martingale_pvalue, sigma_from_log10_pvalue

from .presets import UNMODELED_NOTE, ScenarioPreset

logger = logging.getLogger(__name__)

MAX_DB_SEED = 2**63 - 1


class ReportService:
    """Builds the JSON-ready reports shared by the management commands and the API."""

    @staticmethod
    def analyze_log(log: TrialLog, *, convention: str = "discard_nulls") -> dict:
        """S, significance, setting balance and detection bound for one log.

        Logs with unheralded trials are scored on the heralded subset only.
        """
        convention = normalize_convention(convention)
        report: dict = {"convention": convention, "trials_total": len(log)}
        scored = ReportService._scored(log)
        if scored is not log:
            log = scored
            report["event_ready"] = {"kept": log.meta["heralded_kept"], "total": log.meta["heralded_total"]}

        estimate = estimate_S(log, convention)
        try:
            sigma = gaussian_significance(estimate.S, estimate.std_error)
        except ValueError:
            sigma = None
        significance = martingale_pvalue(log, convention=convention)
        sigma_one_sided, sigma_two_sided = sigma_from_log10_pvalue(significance.log10_martingale_p)
        balance = setting_balance(log)

        report.update(
            {
                "trials_scored": len(log),
                "S": estimate.S,
                "se": estimate.std_error,
                "sigma": sigma,
                "p": significance.martingale_p,
                "sigma_one_sided": sigma_one_sided,
                "sigma_two_sided": sigma_two_sided,
                "epsilon": balance.epsilon,
                "estimate": estimate.to_dict(),
                "significance": significance.to_dict(),
                "setting_balance": {**balance.to_dict(), "predictable": balance.predictable},
            }
        )
        etas = [log.meta.get(k) for k in ("efficiency_a", "efficiency_b") if log.meta.get(k) is not None]
        if etas:
            report["detection"] = efficiency_bound(min(etas)).to_dict()
        if log.meta.get("signals_distant_setting"):
            report["signals_distant_setting"] = True
        return report

    @staticmethod
    def audit_log(log: TrialLog) -> Optional[ArrangementReport]:
        """Locality audit of the first trial; every trial repeats it shifted in time."""
        if not log.has_events or len(log) == 0:
            return None
        return SpacetimeService.check_locality_arrangement(**TrialEngine.trial_events(log, 0))

    @staticmethod
    def _config_for(preset: ScenarioPreset, *, seed: int, trials: int) -> ExperimentConfig:
        return dataclasses.replace(preset.config, seed=int(seed), trials=int(trials))

    @staticmethod
    def run_scenario(
        preset: ScenarioPreset,
        *,
        seed: int,
        trials: int,
        convention: str = "discard_nulls",
        replications: int = 1,
        jobs: int = 1,
    ) -> tuple[dict, list[TrialLog]]:
        """Run a preset and compare against its reference value.

        Returns the report and the raw logs (one per replication). With
        replications > 1 the headline numbers are those of the first replication
        and every replication's S is listed.
        """
        if replications < 1:
            raise ValueError("replications must be >= 1")
        config = ReportService._config_for(preset, seed=seed, trials=trials)
        if replications == 1:
            logs = [TrialEngine.run(config)]
        else:
            logs = TrialEngine.run_batch(config, replications, jobs=jobs)

        report = ReportService.analyze_log(logs[0], convention=convention)
        report.update(
            {
                "scenario": preset.name,
                "title": preset.title,
                "seed": int(logs[0].meta["seed"]),
                "reference": {
                    "S": preset.reference_S,
                    "std_error": preset.reference_se,
                    "label": preset.reference_label,
                    "difference": UNMODELED_NOTE,
                },
                "within_3se_of_tsirelson": abs(report["S"] - TSIRELSON_BOUND) <= 3 * report["se"],
                "closes": list(preset.closes),
                "opens": list(preset.opens),
                "notes": preset.notes,
                "source": config.source.kind,
                "source_label": config.source.label,
            }
        )

        audit = ReportService.audit_log(logs[0])
        report["audit"] = audit.to_dict() if audit is not None else None
        if preset.setting_sources:
            exclusion = SpacetimeService.foc_exclusion_time(preset.setting_sources)
            report["foc_exclusion"] = {**exclusion.to_dict(), "units": preset.setting_source_units}
        else:
            report["foc_exclusion"] = None
        if preset.name == "freedman-clauser":
            delta, delta_se = freedman_delta(logs[0], report["convention"])
            report["freedman_delta"] = {"delta": delta, "std_error": delta_se}

        if replications > 1:
            rows = []
            for log in logs:
                estimate = estimate_S(ReportService._scored(log), report["convention"])
                rows.append({"seed": int(log.meta["seed"]), "S": estimate.S, "std_error": estimate.std_error})
            report["replications"] = rows
        logger.info("scenario %s: S=%.4f ± %.4f (%d trials)", preset.name, report["S"], report["se"], trials)
        return report, logs

    @staticmethod
    def _scored(log: TrialLog) -> TrialLog:
        return log if log.frame["heralded"].all() else TrialEngine.event_ready_filter(log)

    @staticmethod
    def record_run(report: dict, *, name: str, source: str, seed: Optional[int]):
        """Store the headline numbers of a report as an ExperimentRun row."""
        from domain.models import ExperimentRun

        audit = report.get("audit")
        reference = report.get("reference") or {}
        return ExperimentRun.objects.create(
            name=name[:100],
            source=source,
            seed=seed if seed is not None and seed <= MAX_DB_SEED else None,
            trials=int(report["trials_total"]),
            convention=report["convention"],
            s_value=float(report["S"]),
            std_error=float(report["se"]),
            sigma=report.get("sigma"),
            p_value=report["p"],
            epsilon=float(report["epsilon"]),
            reference=reference.get("label") if reference.get("S") is not None else None,
            audit_passed=audit["pass"] if audit else None,
        )

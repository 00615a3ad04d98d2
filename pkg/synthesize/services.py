from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from lhv.services import LhvService
from lhv.strategies import (
    ALPHABET_PM,
    ALPHABET_PMN,
    DeterministicStrategy,
    HiddenVariableModel,
    clean_distribution,
    uniform_setting_distribution,
    validate_setting_distribution,
)
from quantum.services import CHSH_SIGNS, SETTING_PAIRS, QuantumService

from .simplex import STATUS_INFEASIBLE, STATUS_OPTIMAL, LinearProgram, lp_solve, vertex_enumeration_max

logger = logging.getLogger(__name__)

EFFICIENCY_CONVENTIONS = ("discard_nulls", "null_as_minus")
MIN_RESTARTS = 32
CORRELATION_TOLERANCE = 1e-6
SUPPORT_CUTOFF = 1e-12


class InfeasibleProblemError(ValueError):
    """Raised when a caller asks for a hard failure on an infeasible optimization."""


@dataclass
class AdversaryReport:
    kind: str
    status: str
    model: Optional[HiddenVariableModel]
    achieved_S: Optional[float]
    achieved_I: Optional[float] = None
    achieved_S_prime: Optional[float] = None
    residuals: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    tolerance: float = 1e-9
    parameters: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def raise_for_status(self) -> "AdversaryReport":
        if not self.is_optimal:
            raise InfeasibleProblemError(f"{self.kind} optimization ended with status {self.status}")
        return self

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "achieved_S": self.achieved_S,
            "achieved_S_prime": self.achieved_S_prime,
            "achieved_I": self.achieved_I,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
            "tolerance": self.tolerance,
            "parameters": dict(self.parameters),
            "model": self.model.to_dict() if self.model is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AdversaryReport":
        model = data.get("model")
        return cls(
            kind=str(data["kind"]),
            status=str(data["status"]),
            model=HiddenVariableModel.from_dict(model) if model else None,
            achieved_S=data.get("achieved_S"),
            achieved_I=data.get("achieved_I"),
            achieved_S_prime=data.get("achieved_S_prime"),
            residuals=dict(data.get("residuals") or {}),
            iterations=int(data.get("iterations") or 0),
            tolerance=float(data.get("tolerance") or 1e-9),
            parameters=dict(data.get("parameters") or {}),
        )


@dataclass(frozen=True)
class VerificationResult:
    empirical_S: float
    std_error: float
    expected_S: float
    z_score: float
    trials: int
    seed: int
    convention: str

    @property
    def passed(self) -> bool:
        return abs(self.empirical_S - self.expected_S) < 4.0 * self.std_error or math.isclose(
            self.empirical_S, self.expected_S, abs_tol=1e-12
        )

    def to_dict(self) -> dict:
        return {
            "empirical_S": self.empirical_S,
            "std_error": self.std_error,
            "expected_S": self.expected_S,
            "z_score": self.z_score,
            "trials": self.trials,
            "seed": self.seed,
            "convention": self.convention,
            "passed": self.passed,
        }


TargetsLike = Union[Mapping[tuple[int, int], float], np.ndarray]


def _targets_table(targets: TargetsLike) -> np.ndarray:
    if isinstance(targets, Mapping):
        table = np.zeros((2, 2))
        for pair in SETTING_PAIRS:
            if pair not in targets:
                raise ValueError(f"missing target correlation for {pair}")
            table[pair] = float(targets[pair])
        return table
    table = np.asarray(targets, dtype=float)
    if table.shape != (2, 2):
        raise ValueError("targets must be a 2x2 table E[a, b]")
    return table


def _validate_eta(eta: float) -> float:
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must be in (0, 1]")
    return eta


class SynthesisService:
    @staticmethod
    def _strategy_features(strategies: list[DeterministicStrategy], convention: str) -> dict[str, np.ndarray]:
        left = np.array([s.left_outputs for s in strategies], dtype=float)
        right = np.array([s.right_outputs for s in strategies], dtype=float)
        det_left = (left != 0).astype(float)
        det_right = (right != 0).astype(float)
        if convention == "null_as_minus":
            left_values = np.where(left == 0, -1.0, left)
            right_values = np.where(right == 0, -1.0, right)
        else:
            left_values, right_values = left, right
        score = np.zeros(len(strategies))
        for (a, b) in SETTING_PAIRS:
            score += CHSH_SIGNS[(a, b)] * left_values[:, a] * right_values[:, b]
        return {"det_left": det_left, "det_right": det_right, "score": score}

    @staticmethod
    def _efficiency_constraints(features: dict[str, np.ndarray], eta: float) -> tuple[np.ndarray, np.ndarray]:
        det_left, det_right = features["det_left"], features["det_right"]
        rows = [np.ones(det_left.shape[0])]
        rhs = [1.0]
        for a in (0, 1):
            rows.append(det_left[:, a])
            rhs.append(eta)
        for b in (0, 1):
            rows.append(det_right[:, b])
            rhs.append(eta)
        for (a, b) in SETTING_PAIRS:
            rows.append((1.0 - det_left[:, a]) * (1.0 - det_right[:, b]))
            rhs.append((1.0 - eta) ** 2)
        return np.vstack(rows), np.asarray(rhs)

    @staticmethod
    def max_chsh_given_efficiency(eta: float, *, convention: str = "discard_nulls") -> AdversaryReport:
        """Best local CHSH score when each side detects with probability eta at every setting.

        The LP runs over mixtures of the 81 null-capable deterministic strategies.
        Besides the per-side detection rates, the probability that both sides miss
        is fixed at (1 - eta)^2 for every setting pair, as for independent
        detectors, so coincidences occur at rate eta^2.

        Args:
            eta: Symmetric detection efficiency in (0, 1].
            convention: "discard_nulls" reports S on coincidences (and the
                renormalized S' over double + single detections);
                "null_as_minus" scores a missing detection as -1.
        Returns:
            AdversaryReport with the optimal mixture as a model fixture.
        """
        eta = _validate_eta(eta)
        if convention not in EFFICIENCY_CONVENTIONS:
            raise ValueError(f"convention must be one of {EFFICIENCY_CONVENTIONS}")
        strategies = LhvService.enumerate_deterministic_strategies(ALPHABET_PMN)
        features = SynthesisService._strategy_features(strategies, convention)
        a_eq, b_eq = SynthesisService._efficiency_constraints(features, eta)
        solution = lp_solve(LinearProgram(objective=features["score"], a_eq=a_eq, b_eq=b_eq, maximize=True))
        params = {"eta": eta, "convention": convention}
        if not solution.is_optimal:
            logger.warning("efficiency LP ended with status %s (eta=%g)", solution.status, eta)
            return AdversaryReport("efficiency", solution.status, None, None, iterations=solution.iterations, parameters=params)

        weights = np.where(solution.x > SUPPORT_CUTOFF, solution.x, 0.0)
        weights = weights / weights.sum()
        support = np.flatnonzero(weights)
        model = HiddenVariableModel.from_strategies(
            [strategies[i] for i in support],
            weights[support],
            alphabet=ALPHABET_PMN,
            notes={"kind": "efficiency", "eta": eta, "convention": convention},
        )
        numerator = float(features["score"] @ weights)
        if convention == "discard_nulls":
            achieved_s = numerator / eta**2
            achieved_s_prime = numerator / (eta * (2.0 - eta))
        else:
            achieved_s = numerator
            achieved_s_prime = None
        full = a_eq @ weights - b_eq
        residuals = {
            "normalization": float(abs(full[0])),
            "detection": float(np.abs(full[1:5]).max()),
            "double_null": float(np.abs(full[5:]).max()),
        }
        logger.info("efficiency adversary eta=%g S=%.9f iterations=%d", eta, achieved_s, solution.iterations)
        return AdversaryReport(
            kind="efficiency",
            status=STATUS_OPTIMAL,
            model=model,
            achieved_S=abs(achieved_s),
            achieved_S_prime=None if achieved_s_prime is None else abs(achieved_s_prime),
            residuals=residuals,
            iterations=solution.iterations,
            tolerance=1e-9,
            parameters=params,
        )

    @staticmethod
    def efficiency_vertex_oracle(eta: float, *, convention: str = "discard_nulls") -> float:
        """Optimal coincidence S for the efficiency LP, found by enumerating basic feasible solutions.

        Strategies are grouped by their 16 detection patterns; only the best
        strategy of each pattern can appear in an optimum.
        """
        eta = _validate_eta(eta)
        strategies = LhvService.enumerate_deterministic_strategies(ALPHABET_PMN)
        features = SynthesisService._strategy_features(strategies, convention)
        patterns: dict[tuple, int] = {}
        for i in range(len(strategies)):
            key = tuple(features["det_left"][i]) + tuple(features["det_right"][i])
            if key not in patterns or features["score"][i] > features["score"][patterns[key]]:
                patterns[key] = i
        chosen = sorted(patterns.values())
        reduced = {name: values[chosen] for name, values in features.items()}
        a_eq, b_eq = SynthesisService._efficiency_constraints(reduced, eta)
        best = vertex_enumeration_max(a_eq, b_eq, reduced["score"])
        return best / eta**2 if convention == "discard_nulls" else best

    @staticmethod
    def analytic_efficiency_model(eta: float) -> HiddenVariableModel:
        """Closed-form local model reaching S = 4/eta - 2 on coincidences, valid for eta >= 2/3.

        Mixes one full-detection strategy (weight 3 eta^2 - 2 eta), four strategies
        that each miss at exactly one setting (weight eta - eta^2 each) and the
        all-null strategy (weight (1 - eta)^2).
        """
        eta = _validate_eta(eta)
        full = 3 * eta**2 - 2 * eta
        if full < -1e-12:
            raise ValueError("the closed-form construction needs eta >= 2/3")
        single = eta - eta**2
        strategies = [
            DeterministicStrategy((1, 1), (1, -1)),
            DeterministicStrategy((1, 0), (1, -1)),
            DeterministicStrategy((0, 1), (1, 1)),
            DeterministicStrategy((1, 1), (1, 0)),
            DeterministicStrategy((-1, 1), (0, 1)),
            DeterministicStrategy((0, 0), (0, 0)),
        ]
        weights = [max(full, 0.0), single, single, single, single, (1 - eta) ** 2]
        return HiddenVariableModel.from_strategies(
            strategies, weights, alphabet=ALPHABET_PMN, notes={"kind": "efficiency_analytic", "eta": eta}
        )

    @staticmethod
    def _sign_groups() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        strategies = LhvService.enumerate_deterministic_strategies(ALPHABET_PM)
        products = np.zeros((2, 2, len(strategies)))
        for idx, s in enumerate(strategies):
            for (a, b) in SETTING_PAIRS:
                products[a, b, idx] = s.left(a) * s.right(b)
        plus_idx = np.zeros((2, 2, 8), dtype=np.int64)
        minus_idx = np.zeros((2, 2, 8), dtype=np.int64)
        for (a, b) in SETTING_PAIRS:
            plus_idx[a, b] = np.flatnonzero(products[a, b] > 0)
            minus_idx[a, b] = np.flatnonzero(products[a, b] < 0)
        return products, plus_idx, minus_idx

    @staticmethod
    def project_to_scaled_simplex(values: np.ndarray, totals: np.ndarray) -> np.ndarray:
        """Euclidean projection of each last-axis row onto {x >= 0, sum(x) = total}."""
        values = np.asarray(values, dtype=float)
        totals = np.asarray(totals, dtype=float)
        ordered = -np.sort(-values, axis=-1)
        cumulative = np.cumsum(ordered, axis=-1) - totals[..., None]
        ks = np.arange(1, values.shape[-1] + 1)
        positive = ordered - cumulative / ks > 0
        rho = np.maximum((positive * ks).max(axis=-1), 1)
        theta = np.take_along_axis(cumulative, (rho - 1)[..., None], axis=-1)[..., 0] / rho
        projected = np.maximum(values - theta[..., None], 0.0)
        return np.where(totals[..., None] > 0, projected, 0.0)

    @staticmethod
    def _mi_objective(x: np.ndarray, weights: np.ndarray) -> float:
        marginal = np.einsum("ab,abl->l", weights, x)
        safe_marginal = np.broadcast_to(np.where(marginal > 0, marginal, 1.0), x.shape)
        ratio = np.where(x > 0, x / safe_marginal, 1.0)
        return float((weights[:, :, None] * x * np.log2(ratio)).sum())

    @staticmethod
    def _mi_gradient(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
        marginal = np.einsum("ab,abl->l", weights, x)
        floor = 1e-16
        return weights[:, :, None] * (np.log2(np.maximum(x, floor)) - np.log2(np.maximum(marginal, floor)))

    @staticmethod
    def _run_restart(
        index: int,
        seed_seq: np.random.SeedSequence,
        weights: np.ndarray,
        plus_idx: np.ndarray,
        minus_idx: np.ndarray,
        plus_mass: np.ndarray,
        minus_mass: np.ndarray,
        max_iterations: int,
    ) -> tuple[float, int, np.ndarray, int]:
        """One accelerated projected-gradient run from a random feasible start."""
        rng = np.random.Generator(np.random.Philox(seed_seq))
        rows = np.arange(2)[:, None, None]
        cols = np.arange(2)[None, :, None]

        def project(point: np.ndarray) -> np.ndarray:
            out = np.zeros_like(point)
            out[rows, cols, plus_idx] = SynthesisService.project_to_scaled_simplex(point[rows, cols, plus_idx], plus_mass)
            out[rows, cols, minus_idx] = SynthesisService.project_to_scaled_simplex(point[rows, cols, minus_idx], minus_mass)
            return out

        x = np.zeros((2, 2, 16))
        x[rows, cols, plus_idx] = plus_mass[..., None] * rng.dirichlet(np.ones(8), size=(2, 2))
        x[rows, cols, minus_idx] = minus_mass[..., None] * rng.dirichlet(np.ones(8), size=(2, 2))

        objective = SynthesisService._mi_objective
        gradient = SynthesisService._mi_gradient
        f_x = objective(x, weights)
        y, t, step = x.copy(), 1.0, 1.0
        stall = 0
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            g = gradient(y, weights)
            f_y = objective(y, weights)
            while True:
                z = project(y - step * g)
                d = z - y
                f_z = objective(z, weights)
                if f_z <= f_y + float((g * d).sum()) + float((d * d).sum()) / (2.0 * step) + 1e-15:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if f_z > f_x:
                # Momentum overshot; restart from the last accepted point.
                y, t = x.copy(), 1.0
                stall += 1
                if stall > 50:
                    break
                continue
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = z + ((t - 1.0) / t_next) * (z - x)
            improvement = f_x - f_z
            x, f_x, t = z, f_z, t_next
            step *= 1.5
            if improvement < 1e-15:
                stall += 1
                if stall > 50:
                    break
            else:
                stall = 0
        return f_x, index, x, iterations

    @staticmethod
    def min_mutual_information(
        targets: TargetsLike,
        *,
        setting_distribution: Optional[np.ndarray] = None,
        restarts: int = MIN_RESTARTS,
        seed: int = 0,
        max_iterations: int = 3000,
        jobs: int = 1,
    ) -> AdversaryReport:
        """Setting-dependent mixture of the 16 deterministic strategies reproducing `targets`.

        If an unconditional mixture already reproduces the targets (checked by LP),
        the result has I = 0. Otherwise each restart runs accelerated projected
        gradient descent on I over the set of p(lambda|a,b) whose correlations
        equal the targets; the best restart wins, ties going to the lower index.
        """
        table = _targets_table(targets)
        weights = (
            uniform_setting_distribution()
            if setting_distribution is None
            else validate_setting_distribution(setting_distribution)
        )
        restarts = max(int(restarts), MIN_RESTARTS)
        params = {
            "targets": table.tolist(),
            "setting_distribution": weights.tolist(),
            "restarts": restarts,
            "seed": int(seed),
        }
        if (np.abs(table) > 1.0 + 1e-12).any():
            logger.warning("targets outside [-1, 1]: %s", table.tolist())
            return AdversaryReport("freedom_of_choice", STATUS_INFEASIBLE, None, None, parameters=params)
        table = np.clip(table, -1.0, 1.0)

        strategies = LhvService.enumerate_deterministic_strategies(ALPHABET_PM)
        products, plus_idx, minus_idx = SynthesisService._sign_groups()

        a_eq = np.vstack([np.ones(16)] + [products[a, b] for (a, b) in SETTING_PAIRS])
        b_eq = np.concatenate([[1.0], [table[a, b] for (a, b) in SETTING_PAIRS]])
        feasibility = lp_solve(LinearProgram(objective=np.zeros(16), a_eq=a_eq, b_eq=b_eq))
        if feasibility.is_optimal and feasibility.max_residual <= 1e-9:
            prior = clean_distribution(feasibility.x)
            model = HiddenVariableModel.from_strategies(strategies, prior, notes={"kind": "freedom_of_choice"})
            residual = float(np.abs(a_eq @ prior - b_eq).max())
            logger.info("targets are reachable without setting dependence; I = 0")
            return AdversaryReport(
                kind="freedom_of_choice",
                status=STATUS_OPTIMAL,
                model=model,
                achieved_S=LhvService.model_chsh(model),
                achieved_I=0.0,
                residuals={"correlation": residual, "normalization": 0.0},
                iterations=feasibility.iterations,
                tolerance=CORRELATION_TOLERANCE,
                parameters={**params, "method": "lp_unconditional"},
            )

        plus_mass = (1.0 + table) / 2.0
        minus_mass = (1.0 - table) / 2.0
        children = np.random.SeedSequence(int(seed)).spawn(restarts)
        args = (weights, plus_idx, minus_idx, plus_mass, minus_mass, int(max_iterations))
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
                results = list(pool.map(lambda i: SynthesisService._run_restart(i, children[i], *args), range(restarts)))
        else:
            results = [SynthesisService._run_restart(i, children[i], *args) for i in range(restarts)]

        best_value, best_index, best_x, _ = min(results, key=lambda r: (r[0], r[1]))
        total_iterations = int(sum(r[3] for r in results))
        conditional = clean_distribution(best_x)
        model = HiddenVariableModel.from_strategies(strategies, conditional, notes={"kind": "freedom_of_choice"})
        achieved = {pair: float(conditional[pair] @ products[pair]) for pair in SETTING_PAIRS}
        residuals = {
            "correlation": max(abs(achieved[pair] - table[pair]) for pair in SETTING_PAIRS),
            "normalization": float(np.abs(best_x.sum(axis=-1) - 1.0).max()),
            "negativity": float(max(0.0, -best_x.min())),
        }
        status = STATUS_OPTIMAL if max(residuals.values()) <= CORRELATION_TOLERANCE else "tolerance_exceeded"
        achieved_i = LhvService.mutual_information(model, weights)
        logger.info(
            "min mutual information %.6f bits (best restart %d of %d, %d iterations)",
            achieved_i,
            best_index,
            restarts,
            total_iterations,
        )
        return AdversaryReport(
            kind="freedom_of_choice",
            status=status,
            model=model,
            achieved_S=LhvService.model_chsh(model),
            achieved_I=achieved_i,
            residuals=residuals,
            iterations=total_iterations,
            tolerance=CORRELATION_TOLERANCE,
            parameters={**params, "method": "projected_gradient", "best_restart": int(best_index)},
        )

    @staticmethod
    def tsirelson_targets() -> dict[tuple[int, int], float]:
        state = QuantumService.make_bell_state("+")
        return QuantumService.correlations(state, QuantumService.tsirelson_settings())

    @staticmethod
    def verify_adversary(report: AdversaryReport, *, trials: int, seed: int) -> VerificationResult:
        """Run the trial engine on the report's model and compare the estimated S."""
        from engine.services import ExperimentConfig, PhysicsSpec, TrialEngine
        from engine.sources import SettingSource
        from stats.estimators import estimate_S

        if report.model is None or report.achieved_S is None:
            raise ValueError(f"report has no model to verify (status {report.status})")
        table = report.parameters.get("setting_distribution")
        if table is not None and not np.allclose(table, 0.25):
            source = SettingSource(kind="biased", table=tuple(tuple(row) for row in table))
        else:
            source = SettingSource(kind="iid_uniform")
        config = ExperimentConfig(
            physics=PhysicsSpec.lhv(report.model),
            source=source,
            trials=int(trials),
            seed=int(seed),
        )
        log = TrialEngine.run(config)
        convention = str(report.parameters.get("convention") or "discard_nulls")
        estimate = estimate_S(log, convention=convention)
        se = estimate.std_error
        z = (estimate.S - report.achieved_S) / se if se > 0 else 0.0
        return VerificationResult(
            empirical_S=estimate.S,
            std_error=se,
            expected_S=float(report.achieved_S),
            z_score=float(z),
            trials=int(trials),
            seed=int(seed),
            convention=convention,
        )

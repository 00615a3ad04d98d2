from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from quantum.services import CHSH_SIGNS, SETTING_PAIRS, chsh_combination

from .memory import game_optimal_strategies
from .strategies import (
    ALPHABET_PM,
    DeterministicStrategy,
    HiddenVariableModel,
    normalize_alphabet,
    uniform_setting_distribution,
    validate_setting_distribution,
)

logger = logging.getLogger(__name__)

CONVENTIONS = ("strict", "discard_nulls", "null_as_minus")


@dataclass(frozen=True)
class CommunicationSampler:
    """Outcome sampler in which side B is told setting a.

    This is not a local model: it reproduces any four correlations by letting
    information about the distant setting reach B within the trial.
    """

    targets: tuple[tuple[float, float], tuple[float, float]]
    signals_distant_setting: bool = True

    def target(self, a: int, b: int) -> float:
        return float(self.targets[a][b])

    def sample(self, settings_a: np.ndarray, settings_b: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        settings_a = np.asarray(settings_a, dtype=np.int64)
        settings_b = np.asarray(settings_b, dtype=np.int64)
        n = settings_a.shape[0]
        table = np.asarray(self.targets, dtype=float)
        outcome_a = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        same = rng.random(n) < (1.0 + table[settings_a, settings_b]) / 2.0
        outcome_b = np.where(same, outcome_a, -outcome_a).astype(np.int8)
        return outcome_a, outcome_b

    def to_dict(self) -> dict:
        return {"targets": [list(row) for row in self.targets], "signals_distant_setting": True}


class LhvService:
    @staticmethod
    def enumerate_deterministic_strategies(alphabet: Sequence[int] = ALPHABET_PM) -> list[DeterministicStrategy]:
        """All |alphabet|^4 joint strategies in lexicographic order of (A(a), A(a'), B(b), B(b'))."""
        values = normalize_alphabet(alphabet)
        return [
            DeterministicStrategy((a0, a1), (b0, b1))
            for a0, a1, b0, b1 in itertools.product(values, repeat=4)
        ]

    @staticmethod
    def joint_table(model: HiddenVariableModel, a: int, b: int) -> np.ndarray:
        """p(A = alphabet[i], B = alphabet[j] | a, b) as a K x K table."""
        if a not in (0, 1) or b not in (0, 1):
            raise ValueError(f"unknown setting index pair: ({a}, {b})")
        weights = model.prior_given(a, b)
        return np.einsum("l,li,lj->ij", weights, model.left_response[:, a, :], model.right_response[:, b, :])

    @staticmethod
    def conditional_probability(model: HiddenVariableModel, A: int, B: int, a: int, b: int) -> float:
        """sum_lambda p(lambda|a,b) p(A|a,lambda) p(B|b,lambda)."""
        table = LhvService.joint_table(model, a, b)
        return float(table[model.outcome_index(A), model.outcome_index(B)])

    @staticmethod
    def _check_convention(model: HiddenVariableModel, convention: str) -> str:
        if convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if convention == "strict" and 0 in model.alphabet:
            raise ValueError("model alphabet includes nulls; choose discard_nulls or null_as_minus")
        return convention

    @staticmethod
    def model_correlation(model: HiddenVariableModel, a: int, b: int, *, convention: str = "strict") -> float:
        convention = LhvService._check_convention(model, convention)
        table = LhvService.joint_table(model, a, b)
        values = np.asarray(model.alphabet, dtype=float)
        if convention == "null_as_minus":
            values = np.where(values == 0, -1.0, values)
        products = np.outer(values, values)
        if convention == "discard_nulls":
            detected = np.outer(values != 0, values != 0)
            mass = float(table[detected].sum())
            if mass <= 0:
                raise ValueError(f"no jointly detected outcomes at setting pair ({a}, {b})")
            return float((products * table)[detected].sum() / mass)
        return float((products * table).sum())

    @staticmethod
    def model_correlations(model: HiddenVariableModel, *, convention: str = "strict") -> dict[tuple[int, int], float]:
        return {pair: LhvService.model_correlation(model, *pair, convention=convention) for pair in SETTING_PAIRS}

    @staticmethod
    def model_chsh(model: HiddenVariableModel, *, convention: str = "strict") -> float:
        return abs(chsh_combination(LhvService.model_correlations(model, convention=convention)))

    @staticmethod
    def strategy_chsh(strategy: DeterministicStrategy) -> float:
        """Signed CHSH combination of a single deterministic strategy."""
        return float(
            sum(CHSH_SIGNS[(a, b)] * strategy.left(a) * strategy.right(b) for (a, b) in SETTING_PAIRS)
        )

    @staticmethod
    def brute_force_max_chsh(alphabet: Sequence[int] = ALPHABET_PM) -> float:
        if normalize_alphabet(alphabet) != ALPHABET_PM:
            raise ValueError("brute-force CHSH maximum is defined over +/-1 strategies")
        return max(abs(LhvService.strategy_chsh(s)) for s in LhvService.enumerate_deterministic_strategies(alphabet))

    @staticmethod
    def maximizing_strategies() -> list[DeterministicStrategy]:
        best = LhvService.brute_force_max_chsh()
        return [
            s for s in LhvService.enumerate_deterministic_strategies()
            if abs(LhvService.strategy_chsh(s)) == best
        ]

    @staticmethod
    def game_optimal_strategies() -> list[DeterministicStrategy]:
        return game_optimal_strategies()

    @staticmethod
    def mutual_information(model: HiddenVariableModel, setting_distribution: Optional[np.ndarray] = None) -> float:
        """I(lambda; a, b) in bits for p(a,b) and the model's p(lambda|a,b).

        Notes:
            p(lambda) is computed internally; terms with p(lambda|a,b) = 0 contribute 0.
        """
        weights = (
            uniform_setting_distribution()
            if setting_distribution is None
            else validate_setting_distribution(setting_distribution)
        )
        if not model.is_conditional:
            return 0.0
        conditional = model.prior
        if (conditional < 0).any():
            raise ValueError("conditional prior has negative probabilities")
        marginal = np.einsum("ab,abl->l", weights, conditional)
        mask = (conditional > 0) & (weights[:, :, None] > 0)
        ratio = np.ones_like(conditional)
        denom = np.broadcast_to(marginal, conditional.shape)
        ratio[mask] = conditional[mask] / denom[mask]
        terms = weights[:, :, None] * conditional * np.log2(ratio)
        return max(0.0, float(terms.sum()))

    @staticmethod
    def one_bit_communication_model(targets: Mapping[tuple[int, int], float]) -> CommunicationSampler:
        table = [[0.0, 0.0], [0.0, 0.0]]
        for (a, b) in SETTING_PAIRS:
            if (a, b) not in targets:
                raise ValueError(f"missing target correlation for ({a}, {b})")
            value = float(targets[(a, b)])
            if abs(value) > 1.0:
                raise ValueError(f"target correlation |E({a},{b})| = {abs(value):g} exceeds 1")
            table[a][b] = value
        return CommunicationSampler(targets=(tuple(table[0]), tuple(table[1])))

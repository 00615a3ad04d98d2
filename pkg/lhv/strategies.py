"""Local-realist model types and their JSON fixture schema.

A model fixture is a JSON object::

    {
      "alphabet": [1, -1] | [1, -1, 0],
      "lambda_support": ["l0", "l1", ...],
      "prior": [p(l0), p(l1), ...]                      (unconditional), or
      "conditional_prior": [[[..L..], [..L..]], [[..L..], [..L..]]]   (indexed [a][b]),
      "left_response":  [L][2][K]   p(A = alphabet[k] | a, lambda),
      "right_response": [L][2][K]   p(B = alphabet[k] | b, lambda)
    }

Exactly one of `prior` / `conditional_prior` is present. Response tables carry no
index for the distant setting or outcome, so every model is structurally local.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

ALPHABET_PM: tuple[int, ...] = (1, -1)
ALPHABET_PMN: tuple[int, ...] = (1, -1, 0)
VALID_OUTCOMES = frozenset({1, -1, 0})
NORMALIZATION_TOLERANCE = 1e-12


def normalize_alphabet(alphabet: Sequence[int]) -> tuple[int, ...]:
    values = tuple(int(v) for v in alphabet)
    if set(values) == {1, -1} and len(values) == 2:
        return ALPHABET_PM
    if set(values) == {1, -1, 0} and len(values) == 3:
        return ALPHABET_PMN
    raise ValueError("alphabet must be {+1,-1} or {+1,-1,0}")


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outputs per local setting index: left_outputs[a], right_outputs[b]."""

    left_outputs: tuple[int, int]
    right_outputs: tuple[int, int]

    def __post_init__(self):
        left = tuple(int(v) for v in self.left_outputs)
        right = tuple(int(v) for v in self.right_outputs)
        if len(left) != 2 or len(right) != 2:
            raise ValueError("a deterministic strategy needs one output per setting index (2 per side)")
        if not set(left + right) <= VALID_OUTCOMES:
            raise ValueError("strategy outputs must be in {+1,-1,0}")
        object.__setattr__(self, "left_outputs", left)
        object.__setattr__(self, "right_outputs", right)

    def left(self, a: int) -> int:
        if a not in (0, 1):
            raise ValueError(f"unknown setting index: {a}")
        return self.left_outputs[a]

    def right(self, b: int) -> int:
        if b not in (0, 1):
            raise ValueError(f"unknown setting index: {b}")
        return self.right_outputs[b]

    @property
    def emits_nulls(self) -> bool:
        return 0 in self.left_outputs or 0 in self.right_outputs

    @property
    def label(self) -> str:
        def fmt(values: tuple[int, int]) -> str:
            return "".join({1: "+", -1: "-", 0: "0"}[v] for v in values)

        return f"A{fmt(self.left_outputs)}B{fmt(self.right_outputs)}"


@dataclass
class HiddenVariableModel:
    """Finite lambda-space model with (optionally setting-dependent) prior.

    Shapes:
        prior: (L,) for p(lambda), or (2, 2, L) for p(lambda | a, b).
        left_response / right_response: (L, 2, K) with K = len(alphabet).
    """

    alphabet: tuple[int, ...]
    lambda_support: tuple[str, ...]
    prior: np.ndarray
    left_response: np.ndarray
    right_response: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alphabet = normalize_alphabet(self.alphabet)
        self.lambda_support = tuple(str(s) for s in self.lambda_support)
        self.prior = np.asarray(self.prior, dtype=float)
        self.left_response = np.asarray(self.left_response, dtype=float)
        self.right_response = np.asarray(self.right_response, dtype=float)
        self._validate()

    def _validate(self) -> None:
        n_lambda = len(self.lambda_support)
        k = len(self.alphabet)
        if n_lambda == 0:
            raise ValueError("lambda_support must not be empty")
        if len(set(self.lambda_support)) != n_lambda:
            raise ValueError("lambda_support labels must be unique")
        if self.prior.shape not in {(n_lambda,), (2, 2, n_lambda)}:
            raise ValueError(f"prior must have shape ({n_lambda},) or (2, 2, {n_lambda}), got {self.prior.shape}")
        for name, table in (("left_response", self.left_response), ("right_response", self.right_response)):
            if table.shape != (n_lambda, 2, k):
                raise ValueError(f"{name} must have shape ({n_lambda}, 2, {k}), got {table.shape}")
        for name, table in (
            ("prior", self.prior),
            ("left_response", self.left_response),
            ("right_response", self.right_response),
        ):
            if not np.all(np.isfinite(table)):
                raise ValueError(f"{name} must be finite")
            if (table < 0).any():
                raise ValueError(f"{name} has negative probabilities")
            sums = table.sum(axis=-1)
            if np.abs(sums - 1.0).max() > NORMALIZATION_TOLERANCE:
                raise ValueError(f"{name} does not sum to 1 (max deviation {np.abs(sums - 1.0).max():.3g})")

    @property
    def is_conditional(self) -> bool:
        return self.prior.ndim == 3

    @property
    def emits_nulls(self) -> bool:
        if 0 not in self.alphabet:
            return False
        k = self.alphabet.index(0)
        return bool((self.left_response[:, :, k] > 0).any() or (self.right_response[:, :, k] > 0).any())

    def prior_given(self, a: int, b: int) -> np.ndarray:
        if a not in (0, 1) or b not in (0, 1):
            raise ValueError(f"unknown setting index pair: ({a}, {b})")
        return self.prior[a, b] if self.is_conditional else self.prior

    def marginal_prior(self, setting_distribution: Optional[np.ndarray] = None) -> np.ndarray:
        """p(lambda) = sum_ab p(lambda|a,b) p(a,b)."""
        if not self.is_conditional:
            return self.prior.copy()
        weights = uniform_setting_distribution() if setting_distribution is None else np.asarray(setting_distribution)
        return np.einsum("ab,abl->l", weights, self.prior)

    def outcome_index(self, outcome: int) -> int:
        try:
            return self.alphabet.index(int(outcome))
        except ValueError as exc:
            raise ValueError(f"outcome {outcome} not in alphabet {self.alphabet}") from exc

    @classmethod
    def from_strategies(
        cls,
        strategies: Sequence[DeterministicStrategy],
        weights,
        *,
        alphabet: Optional[Sequence[int]] = None,
        labels: Optional[Sequence[str]] = None,
        notes: Optional[dict] = None,
    ) -> "HiddenVariableModel":
        """Model whose lambda picks one deterministic strategy.

        Args:
            strategies: Support of lambda.
            weights: (L,) mixture weights or (2, 2, L) conditional weights.
            alphabet: Defaults to {+1,-1,0} if any strategy emits nulls.
        """
        if not strategies:
            raise ValueError("at least one strategy is required")
        if alphabet is None:
            alphabet = ALPHABET_PMN if any(s.emits_nulls for s in strategies) else ALPHABET_PM
        alphabet = normalize_alphabet(alphabet)
        n_lambda = len(strategies)
        left = np.zeros((n_lambda, 2, len(alphabet)))
        right = np.zeros((n_lambda, 2, len(alphabet)))
        for i, strategy in enumerate(strategies):
            for setting in (0, 1):
                left[i, setting, alphabet.index(strategy.left(setting))] = 1.0
                right[i, setting, alphabet.index(strategy.right(setting))] = 1.0
        support = tuple(labels) if labels is not None else tuple(s.label for s in strategies)
        return cls(alphabet, support, clean_distribution(weights), left, right, notes=dict(notes or {}))

    def to_dict(self) -> dict:
        data: dict = {
            "alphabet": list(self.alphabet),
            "lambda_support": list(self.lambda_support),
            "left_response": self.left_response.tolist(),
            "right_response": self.right_response.tolist(),
        }
        if self.is_conditional:
            data["conditional_prior"] = self.prior.tolist()
        else:
            data["prior"] = self.prior.tolist()
        if self.notes:
            data["notes"] = dict(self.notes)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "HiddenVariableModel":
        has_prior = data.get("prior") is not None
        has_conditional = data.get("conditional_prior") is not None
        if has_prior == has_conditional:
            raise ValueError("model fixture needs exactly one of 'prior' or 'conditional_prior'")
        try:
            return cls(
                alphabet=tuple(data["alphabet"]),
                lambda_support=tuple(data["lambda_support"]),
                prior=np.asarray(data["prior"] if has_prior else data["conditional_prior"], dtype=float),
                left_response=np.asarray(data["left_response"], dtype=float),
                right_response=np.asarray(data["right_response"], dtype=float),
                notes=dict(data.get("notes") or {}),
            )
        except KeyError as exc:
            raise ValueError(f"model fixture missing key {exc.args[0]!r}") from exc


def uniform_setting_distribution() -> np.ndarray:
    return np.full((2, 2), 0.25)


def validate_setting_distribution(setting_distribution) -> np.ndarray:
    table = np.asarray(setting_distribution, dtype=float)
    if table.shape != (2, 2):
        raise ValueError("setting distribution must be a 2x2 table p(a,b)")
    if (table < 0).any():
        raise ValueError("setting distribution has negative probabilities")
    if abs(table.sum() - 1.0) > 1e-9:
        raise ValueError("setting distribution must sum to 1")
    return table / table.sum()


def clean_distribution(weights, *, tolerance: float = 1e-9) -> np.ndarray:
    """Clip round-off negatives and renormalize along the last axis."""
    table = np.asarray(weights, dtype=float)
    if (table < -tolerance).any():
        raise ValueError("weights have negative entries")
    table = np.clip(table, 0.0, None)
    sums = table.sum(axis=-1, keepdims=True)
    if (sums <= 0).any():
        raise ValueError("weights must have positive mass")
    return table / sums

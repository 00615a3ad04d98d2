from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd

from engine.services import TrialLog
from quantum.services import SETTING_PAIRS, TSIRELSON_BOUND, chsh_combination

logger = logging.getLogger(__name__)

NULL_CONVENTIONS = ("discard_nulls", "null_as_minus")
CONVENTION_ALIASES = {"discard": "discard_nulls", "minus": "null_as_minus"}
CRITICAL_EFFICIENCY = 2.0 * (math.sqrt(2.0) - 1.0)
HOLT_PIPKIN_LHV_BOUND = 0.25
HOLT_PIPKIN_QM_PREDICTION = math.sqrt(2.0) / 4.0
OUTCOME_SYMBOLS = {1: "+", -1: "-", 0: "0"}

LogLike = Union[TrialLog, pd.DataFrame]


class InsufficientDataError(ValueError):
    """Not enough usable trials for the requested estimate."""


def normalize_convention(convention: str) -> str:
    value = CONVENTION_ALIASES.get((convention or "").strip().lower(), (convention or "").strip().lower())
    if value not in NULL_CONVENTIONS:
        raise ValueError(f"convention must be one of {NULL_CONVENTIONS} (or discard/minus)")
    return value


def as_frame(log: LogLike) -> pd.DataFrame:
    return log.frame if isinstance(log, TrialLog) else log


@dataclass(frozen=True)
class CorrelationEstimate:
    pair: tuple[int, int]
    value: float
    std_error: float
    n_used: int
    counts: dict[str, int]
    convention: str

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "value": self.value,
            "std_error": self.std_error,
            "n_used": self.n_used,
            "counts": dict(self.counts),
            "convention": self.convention,
        }


@dataclass(frozen=True)
class ChshEstimate:
    S: float
    signed: float
    std_error: float
    correlations: dict[tuple[int, int], CorrelationEstimate]
    convention: str

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "signed": self.signed,
            "std_error": self.std_error,
            "convention": self.convention,
            "correlations": {f"{a}{b}": est.to_dict() for (a, b), est in self.correlations.items()},
        }


@dataclass(frozen=True)
class RenormalizedCorrelation:
    pair: tuple[int, int]
    E: float
    E_prime: float
    ratio: float
    ratio_std_error: float
    expected_ratio: Optional[float]
    n_double: int
    n_single: int

    @property
    def consistent(self) -> Optional[bool]:
        if self.expected_ratio is None:
            return None
        if self.ratio_std_error == 0:
            return math.isclose(self.ratio, self.expected_ratio, abs_tol=1e-12)
        return abs(self.ratio - self.expected_ratio) < 4.0 * self.ratio_std_error

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "E": self.E,
            "E_prime": self.E_prime,
            "ratio": self.ratio,
            "ratio_std_error": self.ratio_std_error,
            "expected_ratio": self.expected_ratio,
            "consistent": self.consistent,
            "n_double": self.n_double,
            "n_single": self.n_single,
        }


@dataclass(frozen=True)
class EfficiencyBound:
    eta: float
    bound: float
    critical_eta: float = CRITICAL_EFFICIENCY

    @property
    def loophole_open(self) -> bool:
        return self.bound >= TSIRELSON_BOUND - 1e-12

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "bound": self.bound,
            "critical_eta": self.critical_eta,
            "loophole_open": self.loophole_open,
        }


@dataclass(frozen=True)
class HoltPipkinResult:
    value: float
    lhv_bound: float = HOLT_PIPKIN_LHV_BOUND
    qm_prediction: float = HOLT_PIPKIN_QM_PREDICTION
    std_error: Optional[float] = None

    @property
    def sigma_above_bound(self) -> Optional[float]:
        if not self.std_error:
            return None
        return (self.value - self.lhv_bound) / self.std_error

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lhv_bound": self.lhv_bound,
            "qm_prediction": self.qm_prediction,
            "std_error": self.std_error,
            "sigma_above_bound": self.sigma_above_bound,
        }


@dataclass(frozen=True)
class SettingBalance:
    frequencies: np.ndarray
    epsilon: float
    trials: int
    source_label: Optional[str] = None

    @property
    def predictable(self) -> bool:
        return self.source_label == "predictable"

    def to_dict(self) -> dict:
        return {
            "frequencies": self.frequencies.tolist(),
            "epsilon": self.epsilon,
            "trials": self.trials,
            "source_label": self.source_label,
        }


def pair_counts(log: LogLike, pair: tuple[int, int]) -> dict[str, int]:
    """N^{AB} at the setting pair for A, B in {+1, -1, 0}, keyed like "+-" or "0+"."""
    frame = as_frame(log)
    a, b = pair
    sub = frame[(frame["setting_a"] == a) & (frame["setting_b"] == b)]
    table = pd.crosstab(sub["outcome_a"], sub["outcome_b"]).reindex(
        index=[1, -1, 0], columns=[1, -1, 0], fill_value=0
    )
    return {
        OUTCOME_SYMBOLS[A] + OUTCOME_SYMBOLS[B]: int(table.loc[A, B])
        for A in (1, -1, 0)
        for B in (1, -1, 0)
    }


def estimate_correlation(log: LogLike, pair: tuple[int, int], convention: str = "discard_nulls") -> CorrelationEstimate:
    convention = normalize_convention(convention)
    if tuple(pair) not in SETTING_PAIRS:
        raise ValueError(f"unknown setting pair: {pair}")
    counts = pair_counts(log, tuple(pair))
    if convention == "discard_nulls":
        plus = counts["++"] + counts["--"]
        minus = counts["+-"] + counts["-+"]
    else:
        # Missing detections count as -1.
        plus = counts["++"] + counts["--"] + counts["-0"] + counts["0-"] + counts["00"]
        minus = counts["+-"] + counts["-+"] + counts["+0"] + counts["0+"]
    n = plus + minus
    if n == 0:
        raise InsufficientDataError(f"no usable trials at setting pair {tuple(pair)} ({convention})")
    value = (plus - minus) / n
    std_error = math.sqrt(max(0.0, 1.0 - value * value) / n)
    return CorrelationEstimate(tuple(pair), float(value), float(std_error), int(n), counts, convention)


def estimate_S(log: LogLike, convention: str = "discard_nulls") -> ChshEstimate:
    """CHSH value from a trial log with the std error of the four correlations added in quadrature."""
    convention = normalize_convention(convention)
    correlations = {pair: estimate_correlation(log, pair, convention) for pair in SETTING_PAIRS}
    signed = chsh_combination({pair: est.value for pair, est in correlations.items()})
    std_error = math.sqrt(sum(est.std_error**2 for est in correlations.values()))
    return ChshEstimate(abs(signed), float(signed), float(std_error), correlations, convention)


def renormalized_correlation(log: LogLike, pair: tuple[int, int], eta: Optional[float] = None) -> RenormalizedCorrelation:
    """E' over double plus single detections, where singles contribute a zero product.

    E'/E equals N_double / (N_double + N_single), compared against eta/(2 - eta)
    when a symmetric efficiency is known (argument or log metadata).
    """
    counts = pair_counts(log, tuple(pair))
    plus = counts["++"] + counts["--"]
    minus = counts["+-"] + counts["-+"]
    n_double = plus + minus
    n_single = counts["+0"] + counts["-0"] + counts["0+"] + counts["0-"]
    n_observed = n_double + n_single
    if n_double == 0:
        raise InsufficientDataError(f"no double detections at setting pair {tuple(pair)}")
    E = (plus - minus) / n_double
    E_prime = (plus - minus) / n_observed
    ratio = n_double / n_observed
    ratio_se = math.sqrt(ratio * (1.0 - ratio) / n_observed)

    if eta is None and isinstance(log, TrialLog):
        eta_a, eta_b = log.meta.get("efficiency_a"), log.meta.get("efficiency_b")
        if eta_a is not None and eta_a == eta_b:
            eta = float(eta_a)
    expected = None if eta is None else float(eta) / (2.0 - float(eta))
    return RenormalizedCorrelation(tuple(pair), float(E), float(E_prime), float(ratio), float(ratio_se), expected, n_double, n_single)


def efficiency_bound(eta: float) -> EfficiencyBound:
    """Local-realist CHSH ceiling 4/eta - 2 when only coincidences are kept."""
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must be in (0, 1]")
    return EfficiencyBound(eta=eta, bound=4.0 / eta - 2.0)


def required_efficiency(S: float) -> float:
    """Smallest eta for which an observed S cannot be explained by a local model."""
    S = float(S)
    if S <= 2.0:
        raise ValueError("S must exceed 2")
    return 4.0 / (S + 2.0)


def freedman_delta_to_S(delta: float, std_error: float = 0.0) -> tuple[float, float]:
    return abs(4.0 * float(delta) + 2.0), 4.0 * abs(float(std_error))


def freedman_delta(log: LogLike, convention: str = "discard_nulls") -> tuple[float, float]:
    """Delta = (C - 2)/4 from a log taken at the a=0, b=phi, a'=2 phi, b'=3 phi schedule."""
    estimate = estimate_S(log, convention)
    return (estimate.signed - 2.0) / 4.0, estimate.std_error / 4.0


def holt_pipkin_statistic(r_phi: float, r_3phi: float, r_0: float, std_error: Optional[float] = None) -> HoltPipkinResult:
    if not r_0 > 0:
        raise ValueError("R_0 must be > 0")
    return HoltPipkinResult(value=abs(float(r_phi) - float(r_3phi)) / float(r_0), std_error=std_error)


def setting_balance(log: LogLike) -> SettingBalance:
    frame = as_frame(log)
    n = len(frame)
    if n == 0:
        raise InsufficientDataError("setting balance needs at least one trial")
    table = pd.crosstab(frame["setting_a"], frame["setting_b"]).reindex(index=[0, 1], columns=[0, 1], fill_value=0)
    frequencies = table.to_numpy(dtype=float) / n
    label = log.meta.get("source_label") if isinstance(log, TrialLog) else None
    return SettingBalance(frequencies, float(np.abs(frequencies - 0.25).max()), n, label)

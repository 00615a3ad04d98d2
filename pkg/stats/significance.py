"""Significance reporting: Gaussian sigma counts and a history-robust p-value.

The martingale p-value treats each trial as a round of the CHSH game. Any local
strategy, even one that adapts to the whole past record, wins a round with
probability at most 3/4 when the settings are fresh fair coins, so the running
excess of wins over 3/4 is a supermartingale with bounded increments and the
Azuma-Hoeffding inequality bounds its tail.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.special import ndtri_exp
from scipy.stats import norm

from lhv.memory import DEFAULT_WIN_RULE

from .estimators import InsufficientDataError, LogLike, as_frame, normalize_convention

logger = logging.getLogger(__name__)

LOCAL_WIN_PROBABILITY = 0.75
P_VALUE_FLOOR = 1e-323


@dataclass(frozen=True)
class SignificanceReport:
    martingale_p: float
    log10_martingale_p: float
    underflow: bool
    gaussian_p: float
    gaussian_sigma: float
    trials: int
    wins: int
    win_rule: dict[tuple[int, int], int]
    convention: str

    @property
    def win_rate(self) -> float:
        return self.wins / self.trials

    def describe_win_rule(self) -> str:
        return ", ".join(f"({a},{b}): A*B={target:+d}" for (a, b), target in sorted(self.win_rule.items()))

    def to_dict(self) -> dict:
        return {
            "martingale_p": self.martingale_p,
            "log10_martingale_p": self.log10_martingale_p,
            "underflow": self.underflow,
            "gaussian_p": self.gaussian_p,
            "gaussian_sigma": self.gaussian_sigma,
            "trials": self.trials,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "win_rule": self.describe_win_rule(),
            "convention": self.convention,
        }


def gaussian_significance(S: float, std_error: float, bound: float = 2.0) -> float:
    """Number of standard errors by which S exceeds `bound` (negative below it)."""
    if not std_error > 0:
        raise ValueError("std_error must be > 0")
    return (float(S) - float(bound)) / float(std_error)


def sigma_from_pvalue(p: float) -> tuple[float, float]:
    """(one-sided, two-sided) Gaussian sigma equivalents of a p-value."""
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    return float(norm.isf(p)), float(norm.isf(p / 2.0))


def pvalue_from_sigma(sigma: float, *, two_sided: bool = False) -> float:
    tail = float(norm.sf(abs(float(sigma)) if two_sided else float(sigma)))
    return min(1.0, 2.0 * tail) if two_sided else tail


def sigma_from_log10_pvalue(log10_p: float) -> tuple[Optional[float], Optional[float]]:
    """(one-sided, two-sided) sigma equivalents from log10 p, finite even when p underflows.

    An unbounded equivalent (one-sided at p = 1) comes back as None.
    """
    log_p = float(log10_p) * math.log(10.0)
    if not log_p <= 0.0:
        raise ValueError("log10 p must be <= 0")
    one_sided = -float(ndtri_exp(log_p))
    two_sided = -float(ndtri_exp(log_p - math.log(2.0)))
    return tuple(v if math.isfinite(v) else None for v in (one_sided, two_sided))


def hoeffding_pvalue(wins: int, trials: int) -> tuple[float, float, bool]:
    """(p, log10 p, underflow) for `wins` out of `trials` against win probability 3/4."""
    if trials < 1:
        raise InsufficientDataError("no scored trials")
    excess = max(0.0, wins / trials - LOCAL_WIN_PROBABILITY)
    log_p = -2.0 * trials * excess * excess
    p = math.exp(log_p)
    underflow = p < P_VALUE_FLOOR
    return (P_VALUE_FLOOR if underflow else p), log_p / math.log(10.0), underflow


def game_wins(
    log: LogLike,
    win_rule: Optional[Mapping[tuple[int, int], int]] = None,
    convention: str = "discard_nulls",
) -> np.ndarray:
    """Boolean win flag per scored trial, in trial order."""
    rule = dict(win_rule or DEFAULT_WIN_RULE)
    convention = normalize_convention(convention)
    frame = as_frame(log)
    a = frame["setting_a"].to_numpy(dtype=np.int64)
    b = frame["setting_b"].to_numpy(dtype=np.int64)
    out_a = frame["outcome_a"].to_numpy(dtype=np.int64)
    out_b = frame["outcome_b"].to_numpy(dtype=np.int64)
    if convention == "discard_nulls":
        keep = (out_a != 0) & (out_b != 0)
        a, b, out_a, out_b = a[keep], b[keep], out_a[keep], out_b[keep]
    else:
        out_a = np.where(out_a == 0, -1, out_a)
        out_b = np.where(out_b == 0, -1, out_b)
    targets = np.zeros((2, 2), dtype=np.int64)
    for (i, j), target in rule.items():
        targets[i, j] = target
    return out_a * out_b == targets[a, b]


def martingale_pvalue(
    log: LogLike,
    win_rule: Optional[Mapping[tuple[int, int], int]] = None,
    convention: str = "discard_nulls",
) -> SignificanceReport:
    wins = game_wins(log, win_rule, convention)
    n = int(wins.size)
    if n == 0:
        raise InsufficientDataError("martingale p-value needs at least one scored trial")
    k = int(wins.sum())
    p, log10_p, underflow = hoeffding_pvalue(k, n)
    z = (k / n - LOCAL_WIN_PROBABILITY) / math.sqrt(LOCAL_WIN_PROBABILITY * (1 - LOCAL_WIN_PROBABILITY) / n)
    if underflow:
        logger.debug("martingale p-value clamped at %g (log10 p = %.1f)", P_VALUE_FLOOR, log10_p)
    return SignificanceReport(
        martingale_p=p,
        log10_martingale_p=log10_p,
        underflow=underflow,
        gaussian_p=float(norm.sf(z)),
        gaussian_sigma=float(z),
        trials=n,
        wins=k,
        win_rule=dict(win_rule or DEFAULT_WIN_RULE),
        convention=normalize_convention(convention),
    )

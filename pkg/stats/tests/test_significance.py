import math

import numpy as np
import pandas as pd
import pytest

from engine.services import ExperimentConfig, PhysicsSpec, TrialEngine
from lhv.memory import DEFAULT_WIN_RULE, game_optimal_strategies
from lhv.strategies import HiddenVariableModel
from quantum.services import QuantumService
from stats.estimators import InsufficientDataError
from stats.significance import (
    P_VALUE_FLOOR,
    gaussian_significance,
    hoeffding_pvalue,
    martingale_pvalue,
    pvalue_from_sigma,
    sigma_from_log10_pvalue,
    sigma_from_pvalue,
)


def _winning_log(n):
    a = np.arange(n) % 2
    b = (np.arange(n) // 2) % 2
    target = np.array([DEFAULT_WIN_RULE[(int(i), int(j))] for i, j in zip(a, b)])
    return pd.DataFrame(
        {
            "trial": np.arange(n),
            "setting_a": a,
            "setting_b": b,
            "outcome_a": np.ones(n, dtype=int),
            "outcome_b": target,
            "heralded": True,
        }
    )


def test_gaussian_significance_examples():
    assert gaussian_significance(2.388, 0.072) == pytest.approx(5.39, abs=0.01)
    assert gaussian_significance(2.73, 0.02) == pytest.approx(36.5)
    assert gaussian_significance(2.0, 0.1) == 0.0
    assert gaussian_significance(1.9, 0.1) < 0
    with pytest.raises(ValueError):
        gaussian_significance(2.5, 0.0)


def test_sigma_from_pvalue_one_and_two_sided():
    one, two = sigma_from_pvalue(7.87e-4)
    assert one == pytest.approx(3.16, abs=0.01)
    assert two == pytest.approx(3.36, abs=0.01)
    assert pvalue_from_sigma(one) == pytest.approx(7.87e-4, rel=1e-6)
    assert pvalue_from_sigma(two, two_sided=True) == pytest.approx(7.87e-4, rel=1e-6)
    with pytest.raises(ValueError):
        sigma_from_pvalue(0.0)


def test_sigma_from_log10_pvalue_matches_linear_form_and_survives_underflow():
    one, two = sigma_from_log10_pvalue(math.log10(7.87e-4))
    assert (one, two) == (pytest.approx(sigma_from_pvalue(7.87e-4)[0]), pytest.approx(sigma_from_pvalue(7.87e-4)[1]))
    one, two = sigma_from_log10_pvalue(-400.0)
    assert math.isfinite(one) and math.isfinite(two)
    assert one > 42 and two > one
    assert sigma_from_log10_pvalue(0.0) == (None, pytest.approx(0.0, abs=1e-12))
    with pytest.raises(ValueError):
        sigma_from_log10_pvalue(0.5)


def test_all_trials_won():
    report = martingale_pvalue(_winning_log(100))
    assert report.wins == 100
    assert report.martingale_p == pytest.approx(math.exp(-12.5))
    assert report.martingale_p == pytest.approx(3.7e-6, rel=0.01)
    assert not report.underflow


def test_three_quarter_win_rate_gives_p_one():
    p, log10_p, underflow = hoeffding_pvalue(75, 100)
    assert p == 1.0
    assert log10_p == 0.0
    assert not underflow
    assert hoeffding_pvalue(10, 100)[0] == 1.0


def test_quantum_run_underflows_and_is_flagged():
    config = ExperimentConfig(
        physics=PhysicsSpec.quantum(QuantumService.make_bell_state("+"), QuantumService.tsirelson_settings()),
        trials=1_000_000,
        seed=9,
    )
    report = martingale_pvalue(TrialEngine.run(config))
    assert report.win_rate == pytest.approx(math.cos(math.pi / 8) ** 2, abs=0.002)
    assert report.underflow
    assert report.martingale_p == P_VALUE_FLOOR
    assert report.log10_martingale_p < -300


def test_martingale_p_is_never_below_gaussian_tail():
    rng = np.random.default_rng(21)
    for _ in range(200):
        n = int(rng.integers(10, 5000))
        k = int(rng.integers(0, n + 1))
        p, _, _ = hoeffding_pvalue(k, n)
        z = (k / n - 0.75) / math.sqrt(0.1875 / n)
        assert p >= pvalue_from_sigma(z) or p == P_VALUE_FLOOR


def test_martingale_report_is_conservative_on_supercritical_log():
    report = martingale_pvalue(_winning_log(400))
    assert report.martingale_p >= report.gaussian_p


def test_empty_log_raises():
    log = _winning_log(8).iloc[0:0]
    with pytest.raises(InsufficientDataError):
        martingale_pvalue(log)


def test_nulls_follow_convention():
    log = _winning_log(8)
    log.loc[0, "outcome_b"] = 0
    assert martingale_pvalue(log, convention="discard").trials == 7
    assert martingale_pvalue(log, convention="minus").trials == 8


def test_false_rejection_rate_under_best_local_strategy():
    model = HiddenVariableModel.from_strategies(game_optimal_strategies()[:1], [1.0])
    config = ExperimentConfig(physics=PhysicsSpec.lhv(model), trials=1000, seed=31)
    rejections = sum(martingale_pvalue(log).martingale_p <= 0.05 for log in TrialEngine.run_batch(config, 1000))
    assert rejections <= 70


@pytest.mark.parametrize("strategy", ["lose_shift", "frequency_exploit", "sequence_predict"])
def test_false_rejection_rate_under_memory_strategies(strategy):
    config = ExperimentConfig(physics=PhysicsSpec.memory_strategy({"kind": strategy}), trials=1000, seed=37)
    rejections = sum(martingale_pvalue(log).martingale_p <= 0.05 for log in TrialEngine.run_batch(config, 1000))
    assert rejections <= 70

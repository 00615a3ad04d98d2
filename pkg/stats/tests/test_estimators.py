import math

import numpy as np
import pandas as pd
import pytest

from engine.services import ExperimentConfig, PhysicsSpec, TrialEngine
from engine.sources import SettingSource
from lhv.memory import game_optimal_strategies
from lhv.strategies import HiddenVariableModel
from quantum.services import QuantumService, SettingsQuad
from stats.estimators import (
    CRITICAL_EFFICIENCY,
    InsufficientDataError,
    efficiency_bound,
    estimate_correlation,
    estimate_S,
    freedman_delta,
    freedman_delta_to_S,
    holt_pipkin_statistic,
    normalize_convention,
    renormalized_correlation,
    required_efficiency,
    setting_balance,
)
from stats.significance import gaussian_significance


def _log_from_counts(pair, counts):
    rows = []
    for (A, B), n in counts.items():
        rows.extend([(pair[0], pair[1], A, B)] * n)
    frame = pd.DataFrame(rows, columns=["setting_a", "setting_b", "outcome_a", "outcome_b"])
    frame.insert(0, "trial", np.arange(len(frame)))
    frame["heralded"] = True
    return frame


def _quantum_config(settings, *, trials, seed, **kwargs):
    return ExperimentConfig(
        physics=PhysicsSpec.quantum(QuantumService.make_bell_state("+"), settings),
        trials=trials,
        seed=seed,
        **kwargs,
    )


def test_anticorrelated_counts_give_minus_one():
    log = _log_from_counts((0, 0), {(1, -1): 500, (-1, 1): 500})
    estimate = estimate_correlation(log, (0, 0))
    assert estimate.value == -1.0
    assert estimate.std_error == 0.0
    assert estimate.counts["+-"] == 500


def test_balanced_counts_give_zero():
    log = _log_from_counts((1, 0), {(1, 1): 10, (1, -1): 10, (-1, 1): 10, (-1, -1): 10})
    assert estimate_correlation(log, (1, 0)).value == 0.0


def test_null_conventions_differ():
    log = _log_from_counts((0, 0), {(1, 1): 6, (1, 0): 2, (0, -1): 2})
    assert estimate_correlation(log, (0, 0), "discard").value == pytest.approx(1.0)
    # +0 -> (+,-) loses, 0- -> (-,-) wins.
    assert estimate_correlation(log, (0, 0), "minus").value == pytest.approx((8 - 2) / 10)
    with pytest.raises(ValueError):
        normalize_convention("strict")


def test_empty_pair_raises_insufficient_data():
    log = _log_from_counts((0, 0), {(1, 0): 5})
    with pytest.raises(InsufficientDataError):
        estimate_correlation(log, (0, 0), "discard_nulls")
    with pytest.raises(InsufficientDataError):
        estimate_correlation(log, (1, 1))


def test_quantum_run_matches_closed_form_correlation():
    settings = SettingsQuad(0.0, 0.0, math.pi / 8, math.pi / 8)
    log = TrialEngine.run(_quantum_config(settings, trials=1_000_000, seed=101))
    estimate = estimate_correlation(log, (0, 0))
    assert abs(estimate.value + math.sqrt(2) / 2) < 4 * estimate.std_error


def test_quantum_tsirelson_run_reaches_two_root_two():
    log = TrialEngine.run(_quantum_config(QuantumService.tsirelson_settings(), trials=1_000_000, seed=2024))
    estimate = estimate_S(log)
    assert estimate.std_error == pytest.approx(0.0028, abs=0.0003)
    assert abs(estimate.S - 2 * math.sqrt(2)) <= 3 * estimate.std_error
    values = {pair: est.value for pair, est in estimate.correlations.items()}
    assert estimate.signed == pytest.approx(values[(0, 0)] + values[(1, 0)] - values[(0, 1)] + values[(1, 1)], abs=1e-12)


def test_deterministic_optimal_strategy_gives_exactly_two():
    model = HiddenVariableModel.from_strategies(game_optimal_strategies()[:1], [1.0])
    log = TrialEngine.run(ExperimentConfig(physics=PhysicsSpec.lhv(model), trials=4000, seed=3))
    estimate = estimate_S(log)
    assert estimate.S == 2.0
    assert estimate.std_error == 0.0


def test_missing_setting_pair_raises():
    model = HiddenVariableModel.from_strategies(game_optimal_strategies()[:1], [1.0])
    config = ExperimentConfig(
        physics=PhysicsSpec.lhv(model),
        source=SettingSource(kind="quasi_periodic", period_a=1, period_b=1),
        trials=100,
    )
    with pytest.raises(InsufficientDataError):
        estimate_S(TrialEngine.run(config))


def test_local_mixtures_stay_below_bound_in_replications():
    model = HiddenVariableModel.from_strategies(game_optimal_strategies(), np.full(8, 1 / 8))
    config = ExperimentConfig(physics=PhysicsSpec.lhv(model), trials=10_000, seed=77)
    logs = TrialEngine.run_batch(config, 500)
    below = 0
    for log in logs:
        estimate = estimate_S(log)
        if estimate.S <= 2.0 + 4.0 * estimate.std_error:
            below += 1
    assert below >= 495


def test_renormalized_correlation_without_losses_is_unchanged():
    log = _log_from_counts((0, 0), {(1, -1): 40, (-1, 1): 40, (1, 1): 20})
    result = renormalized_correlation(log, (0, 0), eta=1.0)
    assert result.E_prime == result.E
    assert result.consistent is True


def test_renormalized_correlation_half_efficiency_fixture():
    log = _log_from_counts((0, 0), {(1, -1): 50, (-1, 1): 50, (1, 0): 50, (0, -1): 50, (-1, 0): 50, (0, 1): 50})
    result = renormalized_correlation(log, (0, 0), eta=0.5)
    assert result.E == pytest.approx(-1.0)
    assert result.E_prime == pytest.approx(-1 / 3)
    assert result.expected_ratio == pytest.approx(1 / 3)
    assert result.consistent


def test_renormalized_ratio_from_lossy_quantum_run():
    settings = SettingsQuad(0.0, 0.0, 0.0, 0.0)
    config = _quantum_config(settings, trials=1_000_000, seed=8, efficiency_a=0.8, efficiency_b=0.8)
    result = renormalized_correlation(TrialEngine.run(config), (0, 0))
    assert result.expected_ratio == pytest.approx(0.8 / 1.2)
    assert abs(result.ratio - 0.8 / 1.2) < 4 * result.ratio_std_error
    assert result.E_prime / result.E == pytest.approx(result.ratio)


def test_renormalized_without_known_eta_reports_ratio_only():
    log = _log_from_counts((0, 0), {(1, -1): 10, (1, 0): 5})
    result = renormalized_correlation(log, (0, 0))
    assert result.expected_ratio is None
    assert result.consistent is None


def test_efficiency_bound_examples():
    assert efficiency_bound(1.0).bound == 2.0
    assert not efficiency_bound(1.0).loophole_open
    assert CRITICAL_EFFICIENCY == pytest.approx(0.828427, abs=1e-6)
    at_critical = efficiency_bound(CRITICAL_EFFICIENCY)
    assert at_critical.bound == pytest.approx(2 * math.sqrt(2))
    assert at_critical.loophole_open
    assert efficiency_bound(0.5).bound == pytest.approx(6.0)
    assert efficiency_bound(0.75).bound == pytest.approx(10 / 3)
    with pytest.raises(ValueError):
        efficiency_bound(0.0)
    with pytest.raises(ValueError):
        efficiency_bound(1.2)


def test_required_efficiency_inverts_bound():
    assert required_efficiency(2 * math.sqrt(2)) == pytest.approx(CRITICAL_EFFICIENCY)
    assert efficiency_bound(required_efficiency(2.4)).bound == pytest.approx(2.4)
    with pytest.raises(ValueError):
        required_efficiency(2.0)


def test_freedman_delta_conversions():
    S, se = freedman_delta_to_S(-1.097, 0.018)
    assert S == pytest.approx(2.388)
    assert se == pytest.approx(0.072)
    assert gaussian_significance(S, se) == pytest.approx(5.39, abs=0.05)

    S, se = freedman_delta_to_S(0.104, 0.026)
    assert S == pytest.approx(2.416)
    assert se == pytest.approx(0.104)
    assert gaussian_significance(S, se) == pytest.approx(4.0, abs=0.05)

    assert freedman_delta_to_S(0.0) == (2.0, 0.0)


def test_freedman_delta_agrees_with_chsh_estimate():
    config = _quantum_config(QuantumService.freedman_settings(math.pi / 8), trials=200_000, seed=10)
    log = TrialEngine.run(config)
    delta, delta_se = freedman_delta(log)
    estimate = estimate_S(log)
    S, se = freedman_delta_to_S(delta, delta_se)
    assert S == pytest.approx(estimate.S)
    assert se == pytest.approx(estimate.std_error)
    assert delta < -1.0


def test_holt_pipkin_statistic():
    phi = math.pi / 8
    ideal = holt_pipkin_statistic(QuantumService.holt_pipkin_rate(phi), QuantumService.holt_pipkin_rate(3 * phi), 1.0)
    assert ideal.value == pytest.approx(math.sqrt(2) / 4)
    assert ideal.lhv_bound == 0.25

    clauser = holt_pipkin_statistic(0.2885, 0.0, 1.0, std_error=0.0093)
    assert clauser.sigma_above_bound == pytest.approx(4.1, abs=0.05)

    assert holt_pipkin_statistic(0.3, 0.3, 2.0).value == 0.0
    with pytest.raises(ValueError):
        holt_pipkin_statistic(0.3, 0.1, 0.0)


def test_setting_balance_sources():
    strategy = game_optimal_strategies()[:1]
    model = HiddenVariableModel.from_strategies(strategy, [1.0])

    iid = TrialEngine.run(ExperimentConfig(physics=PhysicsSpec.lhv(model), trials=1_000_000, seed=4))
    assert setting_balance(iid).epsilon < 0.002

    periodic = TrialEngine.run(
        ExperimentConfig(physics=PhysicsSpec.lhv(model), source=SettingSource(kind="quasi_periodic"), trials=4000)
    )
    balance = setting_balance(periodic)
    assert balance.epsilon == 0.0
    assert balance.predictable

    biased = TrialEngine.run(
        ExperimentConfig(
            physics=PhysicsSpec.lhv(model),
            source=SettingSource(kind="biased", table=((0.4, 0.2), (0.2, 0.2))),
            trials=100_000,
            seed=5,
        )
    )
    assert setting_balance(biased).epsilon == pytest.approx(0.15, abs=0.01)

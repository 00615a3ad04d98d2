import math

import numpy as np
import pytest

from quantum.services import (
    TSIRELSON_BOUND,
    AnalyzerAngle,
    PolarizationState,
    QuantumService,
    SettingsQuad,
)


def test_bell_states_have_expected_amplitudes():
    plus = QuantumService.make_bell_state("+")
    minus = QuantumService.make_bell_state("-")
    amp = 1 / math.sqrt(2)
    assert np.allclose(plus.vector, [0, amp, amp, 0])
    assert np.allclose(minus.vector, [0, amp, -amp, 0])
    assert plus.norm == pytest.approx(1.0, abs=1e-12)


def test_eberhard_state_normalization_and_limits():
    assert np.allclose(QuantumService.make_eberhard_state(1.0).vector, QuantumService.make_bell_state("+").vector)
    assert np.allclose(QuantumService.make_eberhard_state(0.5).vector, [0, 2 / math.sqrt(5), 1 / math.sqrt(5), 0])
    assert QuantumService.make_eberhard_state(0.3).is_normalized()
    with pytest.raises(ValueError):
        QuantumService.make_eberhard_state(0.0)
    with pytest.raises(ValueError):
        QuantumService.make_eberhard_state(1.2)


def test_rotated_eigenstates():
    h, v = QuantumService.rotated_eigenstates(0.0)
    assert np.allclose(h, [1, 0]) and np.allclose(v, [0, 1])
    h, v = QuantumService.rotated_eigenstates(math.pi / 2)
    assert np.allclose(h, [0, 1]) and np.allclose(v, [-1, 0])
    for phi in np.linspace(0, math.pi, 17):
        h, v = QuantumService.rotated_eigenstates(phi)
        assert float(h @ v) == pytest.approx(0.0, abs=1e-15)


def test_analyzer_angle_is_canonical():
    assert AnalyzerAngle(math.pi).radians == pytest.approx(0.0)
    assert AnalyzerAngle(-math.pi / 4).radians == pytest.approx(3 * math.pi / 4)
    assert AnalyzerAngle.from_degrees(225).degrees == pytest.approx(45.0)


def test_joint_distribution_examples():
    bell = QuantumService.make_bell_state("+")
    p = QuantumService.joint_distribution(bell, 0.0, 0.0)
    assert p[0, 1] == pytest.approx(0.5) and p[1, 0] == pytest.approx(0.5)
    assert p[0, 0] == pytest.approx(0.0, abs=1e-15) and p[1, 1] == pytest.approx(0.0, abs=1e-15)

    p = QuantumService.joint_distribution(bell, 0.0, math.pi / 4)
    assert np.allclose(p, 0.25, atol=1e-12)


def test_joint_distribution_rejects_unnormalized_state():
    with pytest.raises(ValueError):
        QuantumService.joint_distribution(PolarizationState((0, 1, 1, 0)), 0.0, 0.0)


def test_correlation_closed_form_on_grid():
    bell = QuantumService.make_bell_state("+")
    grid = np.linspace(0, math.pi, 100, endpoint=False)
    worst = 0.0
    for alpha in grid:
        for beta in grid:
            value = QuantumService.correlation(bell, alpha, beta)
            worst = max(worst, abs(value + math.cos(2 * (alpha - beta))))
    assert worst < 1e-10


def test_correlation_examples():
    bell = QuantumService.make_bell_state("+")
    assert QuantumService.correlation(bell, 0.3, 0.3) == pytest.approx(-1.0)
    assert QuantumService.correlation(bell, math.pi / 2, 0.0) == pytest.approx(1.0)
    assert QuantumService.correlation(bell, math.pi / 8, 0.0) == pytest.approx(-math.sqrt(2) / 2)


def test_chsh_value_examples():
    bell = QuantumService.make_bell_state("+")
    assert QuantumService.chsh_value(bell, QuantumService.tsirelson_settings()) == pytest.approx(
        TSIRELSON_BOUND, abs=1e-9
    )
    assert QuantumService.chsh_value(bell, SettingsQuad.from_degrees(0, 45, 0, 90)) <= 2.0 + 1e-12
    assert QuantumService.chsh_value(bell, SettingsQuad(0.2, 0.2, 0.2, 0.2)) == pytest.approx(2.0)


def test_tsirelson_settings_are_canonical():
    quad = QuantumService.tsirelson_settings()
    assert (quad.a.radians, quad.a_prime.radians, quad.b.radians, quad.b_prime.radians) == pytest.approx(
        (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
    )
    assert all(0 <= angle.radians < math.pi for angle in (quad.a, quad.a_prime, quad.b, quad.b_prime))


def test_random_states_respect_bounds():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        raw = rng.normal(size=4) + 1j * rng.normal(size=4)
        state = PolarizationState(tuple(raw / np.linalg.norm(raw)))
        quad = SettingsQuad(*rng.uniform(0, math.pi, size=4))
        assert QuantumService.chsh_value(state, quad) <= TSIRELSON_BOUND + 1e-9
    for _ in range(200):
        raw = rng.normal(size=4) + 1j * rng.normal(size=4)
        state = PolarizationState(tuple(raw / np.linalg.norm(raw)))
        alpha, beta = rng.uniform(0, math.pi, size=2)
        p = QuantumService.joint_distribution(state, alpha, beta)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert (p >= 0).all()
        assert abs(QuantumService.correlation(state, alpha, beta)) <= 1.0


def test_bell_marginals_are_uniform():
    for state in (QuantumService.make_bell_state("+"), QuantumService.make_bell_state("-")):
        for alpha in np.linspace(0, math.pi, 13):
            p = QuantumService.joint_distribution(state, alpha, 0.7)
            assert p[0].sum() == pytest.approx(0.5, abs=1e-12)
            assert p[:, 0].sum() == pytest.approx(0.5, abs=1e-12)


def test_freedman_settings_reduce_to_tsirelson_at_22_5_degrees():
    quad = QuantumService.freedman_settings(math.pi / 8)
    bell = QuantumService.make_bell_state("+")
    assert QuantumService.chsh_value(bell, quad) == pytest.approx(TSIRELSON_BOUND)


def test_holt_pipkin_rate_matches_ideal_curve():
    assert QuantumService.holt_pipkin_rate(math.radians(22.5)) == pytest.approx(0.4268, abs=1e-4)
    assert QuantumService.holt_pipkin_rate(math.radians(67.5)) == pytest.approx(0.0732, abs=1e-4)


def test_settings_quad_round_trip():
    quad = QuantumService.tsirelson_settings()
    assert SettingsQuad.from_dict(quad.to_dict()) == quad
    deg = SettingsQuad.from_dict({"unit": "deg", "a": 0, "a_prime": 45, "b": 22.5, "b_prime": 67.5})
    assert deg.b.radians == pytest.approx(math.pi / 8)

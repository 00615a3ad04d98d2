import numpy as np
import pytest

from spacetime.services import LIGHTLIKE, SPACELIKE, TIMELIKE, SpacetimeEvent, SpacetimeService


def _event(label, t, x=0.0):
    return SpacetimeEvent(label, t, (x, 0.0, 0.0))


def _arrangement(choice_t=0.4, choice_x=0.5, outcome_t=0.6, outcome_x=0.6, late_b=None):
    return dict(
        choose_a=_event("choose_a", choice_t, choice_x),
        choose_b=_event("choose_b", choice_t, -choice_x),
        emission=_event("emission", 0.0),
        outcome_a=_event("outcome_a", outcome_t, outcome_x),
        outcome_b=_event("outcome_b", late_b if late_b is not None else outcome_t, -outcome_x),
    )


def test_interval_classification_examples():
    origin = _event("o", 0.0)
    assert SpacetimeService.interval(origin, _event("p", 1.0, 0.5)).classification == TIMELIKE
    assert SpacetimeService.interval(origin, _event("p", 1.0, 2.0)).classification == SPACELIKE
    light = SpacetimeService.interval(origin, _event("p", 1.0, 1.0))
    assert light.classification == LIGHTLIKE
    assert light.s2 == pytest.approx(0.0)


def test_interval_is_symmetric():
    rng = np.random.default_rng(11)
    for _ in range(200):
        e1 = SpacetimeEvent("a", rng.normal(), tuple(rng.normal(size=3)))
        e2 = SpacetimeEvent("b", rng.normal(), tuple(rng.normal(size=3)))
        forward = SpacetimeService.interval(e1, e2)
        backward = SpacetimeService.interval(e2, e1)
        assert forward.s2 == backward.s2
        assert forward.classification == backward.classification


def test_lightlike_tolerance_scales_with_cosmological_coordinates():
    far = SpacetimeService.interval(_event("star", -1.2e10, 1.2e10), _event("lab", 0.0))
    assert far.classification == LIGHTLIKE


def test_boost_preserves_classification():
    rng = np.random.default_rng(12)
    checked = 0
    for _ in range(500):
        e1 = SpacetimeEvent("a", rng.uniform(-5, 5), (rng.uniform(-5, 5), 0.0, 0.0))
        e2 = SpacetimeEvent("b", rng.uniform(-5, 5), (rng.uniform(-5, 5), 0.0, 0.0))
        before = SpacetimeService.interval(e1, e2)
        if abs(before.s2) < 1e-6:
            continue
        v = rng.uniform(-0.9, 0.9)
        after = SpacetimeService.interval(SpacetimeService.boost_x(e1, v), SpacetimeService.boost_x(e2, v))
        assert after.classification == before.classification
        assert after.s2 == pytest.approx(before.s2, abs=1e-9 * 100)
        checked += 1
    assert checked > 400


def test_boost_rejects_superluminal_velocity():
    with pytest.raises(ValueError):
        SpacetimeService.boost_x(_event("a", 0.0), 1.0)


def test_symmetric_arrangement_passes():
    report = SpacetimeService.check_locality_arrangement(**_arrangement())
    assert report.passed
    assert report.failed_conditions == []
    assert len(report.to_dict()["intervals"]) == 10


def test_choices_close_to_source_fail_only_emission_condition():
    report = SpacetimeService.check_locality_arrangement(
        **_arrangement(choice_t=0.4, choice_x=0.35, outcome_t=1.0, outcome_x=0.6)
    )
    assert not report.passed
    assert report.failed_conditions == [6]


def test_choices_before_emission_fail_emission_condition():
    report = SpacetimeService.check_locality_arrangement(**_arrangement(choice_t=-1.0, choice_x=0.5))
    assert 6 in report.failed_conditions


def test_late_measurement_fails_outcome_separation():
    report = SpacetimeService.check_locality_arrangement(**_arrangement(late_b=2.0))
    assert 3 in report.failed_conditions


def test_duplicate_labels_rejected():
    events = _arrangement()
    events["choose_b"] = _event("choose_a", 0.4, -0.5)
    with pytest.raises(ValueError):
        SpacetimeService.check_locality_arrangement(**events)


def test_check_events_from_json_payload():
    payload = [e.to_dict() for e in _arrangement().values()]
    report = SpacetimeService.check_events(SpacetimeService.load_events(payload))
    assert report.passed
    with pytest.raises(ValueError):
        SpacetimeService.check_events(SpacetimeService.load_events(payload[:4]))


def test_latest_common_cause_examples():
    same = _event("a", 3.0, 1.0)
    assert SpacetimeService.latest_common_cause(same, _event("b", 3.0, 1.0)) == pytest.approx(3.0)
    stars = SpacetimeService.latest_common_cause(_event("s1", -600.0, 600.0), _event("s2", -1930.0, -1930.0))
    assert stars == pytest.approx(-2530.0)
    assert SpacetimeService.latest_common_cause(_event("l", 0.0, 1.0), _event("r", 0.0, -1.0)) == pytest.approx(-1.0)


def test_latest_common_cause_never_exceeds_either_time():
    rng = np.random.default_rng(13)
    for _ in range(200):
        e1 = SpacetimeEvent("a", rng.normal(), tuple(rng.normal(size=3)))
        e2 = SpacetimeEvent("b", rng.normal(), tuple(rng.normal(size=3)))
        assert SpacetimeService.latest_common_cause(e1, e2) <= min(e1.t, e2.t)
    inside = SpacetimeService.latest_common_cause(_event("a", 0.0), _event("b", 2.0, 1.0))
    assert inside == pytest.approx(0.0)


def test_foc_exclusion_time_examples():
    stars = SpacetimeService.foc_exclusion_time(
        {"a": [_event("star_a", -600.0, 600.0)], "b": [_event("star_b", -1930.0, -1930.0)]}
    )
    assert stars.exclusion_time == pytest.approx(-600.0)
    assert stars.latest_common_cause == pytest.approx(-2530.0)

    quasars = SpacetimeService.foc_exclusion_time(
        {"a": [_event("q1", -7.78e9, 7.78e9)], "b": [_event("q2", -12.21e9, -12.21e9)]}
    )
    assert quasars.exclusion_time == pytest.approx(-7.78e9)

    lab = SpacetimeService.foc_exclusion_time({"a": [_event("qrng_a", 0.0, 1e-6)], "b": [_event("qrng_b", 0.0, -1e-6)]})
    assert lab.exclusion_time == pytest.approx(0.0)


def test_foc_exclusion_time_requires_events():
    with pytest.raises(ValueError):
        SpacetimeService.foc_exclusion_time({})
    with pytest.raises(ValueError):
        SpacetimeService.foc_exclusion_time({"a": []})


def test_non_finite_coordinates_rejected():
    with pytest.raises(ValueError):
        SpacetimeEvent("bad", float("nan"))


def _shifted(events, t0):
    return {key: SpacetimeEvent(e.label, e.t + t0, e.x) for key, e in events.items()}


@pytest.mark.parametrize("t0", [0.0, 1e3, 1e4, 1e5, 1e8, -1e8])
def test_arrangement_verdict_is_invariant_under_time_shift(t0):
    base = _arrangement()
    report = SpacetimeService.check_locality_arrangement(**_shifted(base, t0))
    assert report.passed
    reference = SpacetimeService.check_locality_arrangement(**base)
    assert [i.classification for i in report.intervals] == [i.classification for i in reference.intervals]


@pytest.mark.parametrize("t0", [0.0, 1e5, 1e8])
def test_failing_arrangement_keeps_its_failures_under_time_shift(t0):
    base = _arrangement(choice_t=0.4, choice_x=0.35, outcome_t=1.0, outcome_x=0.6)
    report = SpacetimeService.check_locality_arrangement(**_shifted(base, t0))
    assert report.failed_conditions == [6]


def test_causal_past_tolerance_is_in_time_units():
    emission = _event("emission", 1e6)
    # Same worldline, 1 ms earlier.
    outcome = _event("outcome", 1e6 - 1e-3)
    assert not SpacetimeService.in_causal_past(emission, outcome)
    assert SpacetimeService.in_causal_past(emission, _event("outcome", 1e6 + 1e-3))

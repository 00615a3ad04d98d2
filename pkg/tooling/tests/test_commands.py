import json
import math
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from domain.models import ExperimentRun
from engine.logs import TrialLogStore
from engine.services import ExperimentConfig, PhysicsSpec, TrialEngine
from quantum.services import QuantumService


def _run(*args, **kwargs) -> str:
    out = StringIO()
    call_command(*args, stdout=out, stderr=StringIO(), **kwargs)
    return out.getvalue()


def _returncode(*args, **kwargs) -> int:
    with pytest.raises(CommandError) as exc_info:
        _run(*args, **kwargs)
    return exc_info.value.returncode


def _event(label, t, x):
    return {"label": label, "t": t, "x": x, "y": 0.0, "z": 0.0}


def _events(choice_x=0.5, outcome_t=0.6):
    return [
        _event("choose_a", 0.4, choice_x),
        _event("choose_b", 0.4, -choice_x),
        _event("emission", 0.0, 0.0),
        _event("outcome_a", outcome_t, 0.6),
        _event("outcome_b", outcome_t, -0.6),
    ]


def _write_quantum_log(path, *, trials=4000, seed=3, efficiency=1.0):
    config = ExperimentConfig(
        physics=PhysicsSpec.quantum(QuantumService.make_bell_state("+"), QuantumService.tsirelson_settings()),
        efficiency_a=efficiency,
        efficiency_b=efficiency,
        trials=trials,
        seed=seed,
    )
    return TrialLogStore.write(TrialEngine.run(config), path)


def test_scenario_lists_presets():
    out = _run("scenario")
    for name in ("freedman-clauser", "aspect", "weihs", "nist-ions", "delft", "cosmic-vienna", "cosmic-quasar"):
        assert name in out


def test_scenario_weihs_prints_reference_and_audit():
    out = _run("scenario", "weihs", "--trials", "20000", "--seed", "5")
    assert out.startswith("[OK] weihs: S = ")
    assert "published: 2.73 ± 0.02 (difference: apparatus fidelity, unmodeled)" in out
    assert "locality audit: PASS" in out
    assert "p as sigma: one-sided " in out
    assert out.rstrip().endswith("Done.")


def test_scenario_json_report():
    report = json.loads(_run("scenario", "weihs", "--trials", "20000", "--seed", "5", "--json"))
    assert abs(report["S"] - 2 * math.sqrt(2)) < 4 * report["se"]
    assert report["reference"]["S"] == 2.73
    assert report["audit"]["pass"] is True
    assert {"se", "p", "epsilon", "sigma_one_sided", "sigma_two_sided"} <= set(report)


def test_scenario_seed_determines_report():
    first = _run("scenario", "aspect", "--trials", "4000", "--seed", "11", "--json")
    second = _run("scenario", "aspect", "--trials", "4000", "--seed", "11", "--json")
    assert first == second


def test_scenario_aspect_flags_predictable_source():
    out = _run("scenario", "aspect", "--trials", "4000")
    assert "[WARN] quasi_periodic setting source flagged predictable" in out


def test_scenario_cosmic_vienna_prints_exclusion_time():
    out = _run("scenario", "cosmic-vienna", "--trials", "4000")
    assert "freedom-of-choice exclusion: -600 years" in out


def test_scenario_unknown_name_is_usage_error():
    with pytest.raises(CommandError) as exc_info:
        _run("scenario", "bohm")
    assert exc_info.value.returncode == 2
    assert "weihs" in str(exc_info.value)


def test_scenario_rejects_bad_flags():
    assert _returncode("scenario", "weihs", "--trials", "0") == 2
    assert _returncode("scenario", "weihs", "--convention", "strict") == 2
    assert _returncode("scenario", "weihs", "--replications", "0") == 2


@pytest.mark.django_db
def test_scenario_record_and_output(settings, tmp_path):
    settings.RESULTS_DIR = tmp_path
    out = _run("scenario", "nist-ions", "--trials", "4000", "--seed", "8", "--record", "--output", "nist.csv")
    run = ExperimentRun.objects.get()
    assert run.name == "nist-ions"
    assert run.source == "scenario"
    assert run.seed == 8
    assert run.reference == "2.25 ± 0.03"
    assert run.audit_passed is False
    assert (tmp_path / "nist.csv").exists()
    assert (tmp_path / "nist.csv.meta.json").exists()
    assert f"recorded run #{run.pk}" in out


def test_simulate_is_deterministic(tmp_path):
    config_path = tmp_path / "c.json"
    config = ExperimentConfig(
        physics=PhysicsSpec.quantum(QuantumService.make_bell_state("+"), QuantumService.tsirelson_settings()),
        efficiency_a=0.9,
        trials=3000,
    )
    config_path.write_text(json.dumps(config.to_dict()))
    _run("simulate", "--config", str(config_path), "--seed", "7", "--output", str(tmp_path / "one.csv"))
    _run("simulate", "--config", str(config_path), "--seed", "7", "--output", str(tmp_path / "two.csv"))
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
    meta = json.loads((tmp_path / "one.csv.meta.json").read_text())
    assert meta["seed"] == 7


def test_simulate_default_output_goes_to_results_dir(settings, tmp_path):
    settings.RESULTS_DIR = tmp_path
    config_path = tmp_path / "c.json"
    config_path.write_text(json.dumps({"physics": {"kind": "memory", "strategy": {"kind": "lose_shift"}}, "trials": 50}))
    summary = json.loads(_run("simulate", "--config", str(config_path), "--seed", "3", "--json"))
    assert summary["log_file"] == str(tmp_path / "memory_seed3_n50.csv")
    assert summary["meta"]["trials"] == 50


def test_simulate_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"physics": {"kind": "quantum"}}))
    assert _returncode("simulate", "--config", str(bad)) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert _returncode("simulate", "--config", str(broken)) == 2
    assert _returncode("simulate", "--config", str(tmp_path / "missing.json")) == 2
    efficiency = tmp_path / "eta.json"
    efficiency.write_text(json.dumps({"physics": {"kind": "memory"}, "efficiency_a": 1.5}))
    assert _returncode("simulate", "--config", str(efficiency)) == 2


def test_analyze_log_json_report(tmp_path):
    path = _write_quantum_log(tmp_path / "run.csv", efficiency=0.8)
    report = json.loads(_run("analyze", "--log", str(path), "--convention", "discard", "--renormalized", "--json"))
    assert report["convention"] == "discard_nulls"
    assert set(report) >= {"S", "se", "sigma", "p", "epsilon", "convention", "significance", "setting_balance", "detection"}
    assert report["sigma"] == pytest.approx((report["S"] - 2) / report["se"])
    assert report["p"] == report["significance"]["martingale_p"]
    assert report["epsilon"] == report["setting_balance"]["epsilon"]
    assert "sigma_one_sided" in report and "sigma_two_sided" in report
    assert set(report["renormalized"]) == {"00", "10", "01", "11"}
    assert report["log"] == "run.csv"


def test_analyze_resolves_names_in_results_dir(settings, tmp_path):
    settings.RESULTS_DIR = tmp_path
    _write_quantum_log(tmp_path / "named.csv")
    out = _run("analyze", "--log", "named")
    assert out.startswith("[OK] named.csv: S = ")


def test_analyze_data_errors(settings, tmp_path):
    settings.RESULTS_DIR = tmp_path
    assert _returncode("analyze", "--log", "nope") == 3
    broken = tmp_path / "broken.csv"
    broken.write_text("trial,setting_a\n0,1\n")
    assert _returncode("analyze", "--log", str(broken)) == 3
    one_pair = tmp_path / "one_pair.csv"
    one_pair.write_text("trial,setting_a,setting_b,outcome_a,outcome_b,heralded\n0,0,0,1,-1,1\n1,0,0,1,1,1\n")
    assert _returncode("analyze", "--log", str(one_pair)) == 3
    assert _returncode("analyze", "--log", str(one_pair), "--convention", "nulls") == 2


@pytest.mark.django_db
def test_analyze_record(tmp_path):
    path = _write_quantum_log(tmp_path / "rec.csv", seed=12)
    _run("analyze", "--log", str(path), "--record")
    run = ExperimentRun.objects.get()
    assert run.source == "analyze"
    assert run.name == "rec"
    assert run.seed == 12
    assert run.trials == 4000
    assert run.reference is None


def test_audit_events_pass_and_fail(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_events()))
    out = _run("audit", "--events", str(good))
    assert "[OK] (1) outcome_a spacelike from choose_b" in out
    assert "locality arrangement: PASS" in out

    late = tmp_path / "late.json"
    late.write_text(json.dumps(_events(choice_x=0.35, outcome_t=1.0)))
    report = json.loads(_run("audit", "--events", str(late), "--json"))
    assert report["pass"] is False
    assert report["failed_conditions"] == [6]


def test_audit_setting_sources(tmp_path):
    events = tmp_path / "events.json"
    events.write_text(json.dumps(_events()))
    sources = tmp_path / "sources.json"
    sources.write_text(
        json.dumps({"a": [_event("star_a", -600.0, 600.0)], "b": [_event("star_b", -1930.0, -1930.0)]})
    )
    report = json.loads(_run("audit", "--events", str(events), "--sources", str(sources), "--json"))
    assert report["foc_exclusion"]["exclusion_time"] == pytest.approx(-600.0)


def test_audit_log_with_geometry(tmp_path):
    _run("scenario", "weihs", "--trials", "10", "--output", str(tmp_path / "w.csv"))
    out = _run("audit", "--log", str(tmp_path / "w.csv"), "--trial", "3")
    assert "locality arrangement: PASS" in out


def test_audit_errors(tmp_path):
    assert _returncode("audit") == 2
    duplicate = tmp_path / "dup.json"
    duplicate.write_text(json.dumps(_events() + [_event("emission", 0.1, 0.0)]))
    assert _returncode("audit", "--events", str(duplicate)) == 3
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps(_events()[:4]))
    assert _returncode("audit", "--events", str(missing)) == 3
    assert _returncode("audit", "--events", str(tmp_path / "absent.json")) == 3


def test_bound_examples():
    out = _run("bound", "--eta", "0.75")
    assert "= 3.333333" in out
    assert "detection loophole OPEN" in out
    assert "detection loophole closed" in _run("bound", "--eta", "1")
    payload = json.loads(_run("bound", "--eta", "0.9", "--target-s", "2.8284271247", "--json"))
    assert payload["required_eta"] == pytest.approx(0.828427, abs=1e-6)


def test_bound_with_adversary():
    payload = json.loads(_run("bound", "--eta", "0.75", "--adversary", "--json"))
    assert payload["adversary"]["achieved_S"] == pytest.approx(4 / 0.75 - 2, abs=1e-7)


def test_bound_rejects_bad_eta():
    assert _returncode("bound", "--eta", "0") == 2
    assert _returncode("bound", "--eta", "1.2") == 2


def test_synthesize_efficiency(tmp_path):
    out_path = tmp_path / "adv.json"
    payload = json.loads(_run("synthesize", "efficiency", "--eta", "0.9", "--output", str(out_path), "--json"))
    assert payload["achieved_S"] == pytest.approx(4 / 0.9 - 2, abs=1e-7)
    assert json.loads(out_path.read_text())["model"]["alphabet"] == [1, -1, 0]


def test_synthesize_efficiency_with_verification():
    out = _run("synthesize", "efficiency", "--eta", "0.9", "--verify", "100000", "--seed", "4")
    assert "[OK] verify" in out


def test_synthesize_foc_local_targets_need_no_information(tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"00": -0.5, "10": -0.5, "01": 0.5, "11": -0.5}))
    payload = json.loads(_run("synthesize", "foc", "--targets", str(targets), "--json"))
    assert payload["achieved_I"] == 0.0
    assert payload["parameters"]["method"] == "lp_unconditional"
    assert payload["parameters"]["restarts"] == 32


def test_synthesize_errors(tmp_path):
    assert _returncode("synthesize", "efficiency") == 2
    assert _returncode("synthesize", "efficiency", "--eta", "0.9", "--convention", "strict") == 2
    impossible = tmp_path / "impossible.json"
    impossible.write_text(json.dumps({"00": 1.2, "10": 0.0, "01": 0.0, "11": 0.0}))
    assert _returncode("synthesize", "foc", "--targets", str(impossible)) == 4
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"00": 0.1}))
    assert _returncode("synthesize", "foc", "--targets", str(partial)) == 2

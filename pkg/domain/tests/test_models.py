import pytest

from domain.models import ExperimentRun


@pytest.mark.django_db
def test_experiment_run_str_and_defaults():
    run = ExperimentRun.objects.create(name="weihs", trials=1000, s_value=2.7312, std_error=0.0204, sigma=35.8)
    assert str(run) == "weihs S=2.731 ± 0.020"
    assert run.source == ExperimentRun.Source.SCENARIO
    assert run.convention == "discard_nulls"
    assert run.p_value is None
    assert run.audit_passed is None


@pytest.mark.django_db
def test_experiment_runs_are_listed_newest_first():
    first = ExperimentRun.objects.create(name="aspect", trials=10, s_value=2.0, std_error=0.1, sigma=0.0)
    second = ExperimentRun.objects.create(name="delft", trials=10, s_value=2.4, std_error=0.2, sigma=2.0)
    assert list(ExperimentRun.objects.all()) == [second, first]

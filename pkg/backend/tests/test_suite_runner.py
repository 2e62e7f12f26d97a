from app.models import ExperimentConfig
from app.settings import DEFAULT_QUADRATURE, LayerSettings
from app.suite_runner import SuiteRunner, suite_report


def _config(name, **overrides):
    data = {
        "name": name,
        "experiment": "kernels",
        "kernel": {"family": "laplace"},
        "n_nodes": 64,
        "ladder": [32, 64],
    }
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


def test_outcomes_keep_config_order():
    runner = SuiteRunner(settings=LayerSettings(threads=2, out_dir="out", quadrature=DEFAULT_QUADRATURE))
    configs = [_config("first"), _config("second"), _config("third")]
    outcomes = runner.run_sync(configs)
    assert [o.report.name for o in outcomes] == ["first", "second", "third"]


def test_errors_become_failed_criteria():
    # n=3 kernels are rejected before any work is done
    runner = SuiteRunner(settings=LayerSettings(threads=1, out_dir="out", quadrature=DEFAULT_QUADRATURE))
    outcomes = runner.run_sync([_config("bad", kernel={"family": "yukawa", "n": 3})])
    report = suite_report(outcomes, seed=None)
    assert not report.passed
    assert outcomes[0].report.criteria[0].name == "completed"
    assert outcomes[0].report.criteria[0].detail.startswith("ValueError")

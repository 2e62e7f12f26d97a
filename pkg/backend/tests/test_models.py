import pytest
from pydantic import ValidationError

from app.models import ExperimentConfig, ExperimentReport, CriterionResult, SuiteConfig


def _config(**overrides):
    data = {"name": "circle", "experiment": "identities"}
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


def test_defaults():
    config = _config()
    assert config.kernel.family == "laplace"
    assert config.ladder == [128, 256]
    assert config.seed == 7
    assert config.coefficients().n == 2


@pytest.mark.parametrize("ladder", [[], [64, 64], [128, 64], [15, 32], [33, 64]])
def test_ladder_rejected(ladder):
    with pytest.raises(ValidationError):
        _config(ladder=ladder)


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        _config(nodes=64)
    with pytest.raises(ValidationError):
        _config(curve={"kind": "ellipse", "radius": 2.0})


def test_odd_node_count_rejected():
    with pytest.raises(ValidationError):
        _config(n_nodes=129)


def test_scan_and_point_ordering():
    with pytest.raises(ValidationError):
        _config(scan={"k_min": 6, "k_max": 4})
    with pytest.raises(ValidationError):
        _config(points={"exterior_min": 2.5, "exterior_max": 2.0})


def test_suite_names_must_be_unique():
    with pytest.raises(ValidationError):
        SuiteConfig.model_validate(
            {"experiments": [{"name": "a", "experiment": "kernels"}, {"name": "a", "experiment": "identities"}]}
        )


def test_config_hash_is_stable_and_sensitive():
    a = _config(seed=3)
    b = ExperimentConfig.model_validate(a.model_dump())
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != _config(seed=4).config_hash()


def test_explicit_operator_takes_precedence():
    config = _config(
        operator={"a2": [[2.0, 0.5], [0.5, 1.0]], "a1": [0.5, [0.0, 1.0]], "a0": -1.0},
        kernel={"family": "yukawa", "k": 3.0},
    )
    c = config.coefficients()
    assert c.a2[0, 1] == pytest.approx(0.5)
    assert c.a1[1] == pytest.approx(1j)
    assert c.a0 == pytest.approx(-1.0)


def test_report_passed_ignores_unasserted():
    config = _config()
    report = ExperimentReport.build(
        config,
        [
            CriterionResult(name="identity", passed=True, value=1e-12, threshold=1e-8),
            CriterionResult(name="lipschitz", passed=False, asserted=False),
        ],
    )
    assert report.passed
    assert report.config_hash == config.config_hash()

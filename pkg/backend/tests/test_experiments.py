import math

import numpy as np
import pytest

from app.experiments import (
    _order_criterion,
    exterior_points,
    failed_outcome,
    interior_points,
    run_experiment,
    scan_centers,
    validate_setup,
)
from app.geometry import classify_points, make_curve
from app.models import ExperimentConfig
from app.settings import DEFAULT_QUADRATURE


def _config(**overrides):
    data = {
        "name": "small_circle",
        "experiment": "identities",
        "curve": {"kind": "ellipse", "a": 1.0, "b": 1.0},
        "n_nodes": 64,
        "ladder": [32, 64],
        "points": {"count": 3, "interior_scale": 0.6, "exterior_min": 2.0, "exterior_max": 3.0},
        "tolerances": {"near": 1e-4},
    }
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


def _criteria(outcome):
    return {c.name: c for c in outcome.report.criteria}


def test_point_helpers_stay_on_their_side():
    _, frame = make_curve("star", 256, r0=1.0, eps=0.2, k=5)
    inside = interior_points(frame.curve, 4, 0.7)
    outside = exterior_points(frame.curve, 4, 1.3, 3.0)
    assert inside.shape == (16, 2)
    assert np.all(classify_points(frame, inside)["inside"])
    assert not np.any(classify_points(frame, outside)["inside"])


def test_validate_setup_rejects_three_dimensional_surface_work():
    config = _config(kernel={"family": "yukawa", "n": 3})
    with pytest.raises(ValueError):
        validate_setup(config, DEFAULT_QUADRATURE)
    pde = _config(experiment="pde-residual", kernel={"family": "yukawa", "n": 3})
    assert validate_setup(pde, DEFAULT_QUADRATURE).coefficients.n == 3


def test_validate_setup_merges_quadrature_overrides():
    setup = validate_setup(_config(quadrature={"near_ratio": 5.0}), DEFAULT_QUADRATURE)
    assert setup.quadrature.near_ratio == 5.0
    assert setup.quadrature.upsample_cap == DEFAULT_QUADRATURE.upsample_cap
    frame, mu = setup.at(32)
    assert frame.n == 32
    assert mu.values.shape == (32,)


def test_identity_suite_on_circle():
    outcome = run_experiment(_config(), DEFAULT_QUADRATURE)
    criteria = _criteria(outcome)
    for name in (
        "grad_single_two_path",
        "grad_double_two_path",
        "gauss_identity",
        "log_potential",
        "exterior_reduction",
        "single_layer_continuity",
        "double_layer_jump_uniform",
        "grad_double_boundary_form",
    ):
        assert criteria[name].passed, criteria[name]
    assert [row["n_nodes"] for row in outcome.report.tables["defects"]] == [32, 64]

    jump = criteria["double_layer_jump_constant"]
    assert not jump.asserted
    assert jump.value < 1e-5
    rows = outcome.report.tables["jump_profile"]
    assert len(rows) == 8
    assert rows[0]["double_ratio"] == pytest.approx(-1.0, abs=1e-6)


def test_identity_suite_reports_failure_for_tight_tolerance():
    outcome = run_experiment(_config(tolerances={"gauss": 1e-30}), DEFAULT_QUADRATURE)
    assert not _criteria(outcome)["gauss_identity"].passed
    assert not outcome.report.passed


def test_finite_difference_threshold_has_its_own_tolerance():
    loose = _criteria(run_experiment(_config(tolerances={"second_derivative": 1e-30}), DEFAULT_QUADRATURE))
    assert loose["grad_double_finite_difference"].threshold == pytest.approx(1e-6)
    tight = _criteria(run_experiment(_config(tolerances={"finite_difference": 1e-30}), DEFAULT_QUADRATURE))
    assert not tight["grad_double_finite_difference"].passed


def test_scan_centers_include_kinks():
    config = _config(
        experiment="modulus-scan",
        density={"preset": "lipschitz_hat", "center": 1.0, "width": 0.5},
        scan={"centers": 8},
    )
    centers = scan_centers(config)
    for kink in (1.0, 0.5, 1.5):
        assert np.min(np.abs(centers - kink)) < 1e-12
    assert np.all(np.diff(centers) > 0)
    assert centers.size == 11


def test_blend_curve_adds_its_junctions():
    config = _config(experiment="modulus-scan", curve={"kind": "c11_blend", "r0": 1.0, "c": 0.1}, scan={"centers": 3})
    centers = scan_centers(config)
    assert np.min(np.abs(centers - math.pi)) < 1e-12
    assert centers[0] == 0.0


def test_kernel_suite_for_yukawa():
    config = _config(
        experiment="kernels",
        kernel={"family": "yukawa", "k": 1.0},
        density={"preset": "lipschitz_hat", "center": 0.0, "width": 1.0},
        ladder=[64, 128],
    )
    outcome = run_experiment(config, DEFAULT_QUADRATURE)
    criteria = _criteria(outcome)
    for name in ("J1_homogeneity", "J1_odd", "J2_homogeneity", "J2_odd", "remainder_decreasing"):
        assert criteria[name].passed, criteria[name]
    decay = outcome.report.tables["remainder_decay"]
    assert len(decay) == 20
    assert decay[-1]["remainder"] < decay[0]["remainder"]
    assert [row["samples"] for row in outcome.report.tables["class_norm"]] == [32, 64, 128]


def test_pde_residual_criteria():
    config = _config(experiment="pde-residual", kernel={"family": "yukawa", "k": 2.0})
    outcome = run_experiment(config, DEFAULT_QUADRATURE)
    criteria = _criteria(outcome)
    assert set(criteria) >= {
        "kernel_residual",
        "kernel_residual_absolute",
        "kernel_gradient",
        "single_layer_residual",
        "double_layer_residual",
    }
    assert not criteria["kernel_residual_absolute"].asserted
    assert len(outcome.report.tables["kernel_residuals"]) == 100


def test_modulus_scan_records_every_scale():
    config = _config(
        experiment="modulus-scan",
        n_nodes=256,
        density={"preset": "lipschitz_hat", "center": 1.0, "width": 0.8},
        scan={"field": "grad_single", "k_min": 3, "k_max": 5, "centers": 8, "moduli": ["omega1", "lipschitz"]},
    )
    outcome = run_experiment(config, DEFAULT_QUADRATURE)
    assert [r.h for r in outcome.scan.records] == [0.125, 0.0625, 0.03125]
    assert set(outcome.scan.bounded) == {"omega1", "lipschitz"}
    assert outcome.report.scan == outcome.scan
    assert not _criteria(outcome)["scan_lipschitz_bounded"].asserted
    assert outcome.plotdata["scan"][0]["pairs"] == outcome.scan.records[0].pairs


def test_failed_outcome_carries_the_error():
    outcome = failed_outcome(_config(), ArithmeticError("overflow"))
    assert not outcome.report.passed
    assert outcome.report.criteria[0].detail == "ArithmeticError: overflow"


def test_order_is_saturated_when_fine_defect_reaches_the_floor():
    # spectrally converged: the coarse defect is barely above roundoff
    result = _order_criterion("order", [2.14e-12, 4.44e-16], [128, 256], scale=1.0, minimum=3.0)
    assert result.passed
    assert result.detail == "saturated"

    result = _order_criterion("order", [7.61e-12, 2.78e-16], [128, 256], scale=1.7, minimum=3.0)
    assert result.passed


def test_order_is_measured_above_the_floor():
    converging = _order_criterion("order", [1e-4, 1e-7], [64, 128], scale=1.0, minimum=3.0)
    assert converging.passed
    assert converging.value == pytest.approx(math.log2(1e3))

    stalled = _order_criterion("order", [1e-4, 5e-5], [64, 128], scale=1.0, minimum=3.0)
    assert not stalled.passed
    assert stalled.value == pytest.approx(1.0)

    single = _order_criterion("order", [1e-4], [64], scale=1.0, minimum=3.0)
    assert not single.asserted

import math

import numpy as np
import pytest
from scipy.integrate import quad

from app.geometry import CapabilityError, circle_frame, make_curve, make_density
from app.kernels import SingularityError, fundamental_solution
from app.operators import OperatorCoefficients
from app.potentials import single_layer_kernel
from app.quadrature import (
    LogSplit,
    PrecisionError,
    choose_upsample_factor,
    integrate_log_singular,
    integrate_smooth,
    log_product_rule,
    log_product_weights,
    near_singular_upsample,
    principal_double_layer_diagonal,
    single_layer_log_split,
    trapezoid_rule,
)
from app.settings import QuadratureSettings


def test_trapezoid_rule_integrates_arc_length():
    _, frame = make_curve("star", 256, r0=1.0, eps=0.2, k=5)
    assert integrate_smooth(frame, np.ones(frame.n)).real == pytest.approx(frame.curve.length(), rel=1e-12)
    rule = trapezoid_rule(frame)
    assert rule.apply(np.ones(frame.n)) == pytest.approx(frame.length)
    with pytest.raises(ValueError):
        integrate_smooth(frame, np.ones(3))


@pytest.mark.parametrize("m", [0, 1, 5, 15])
def test_log_product_weights_on_fourier_modes(m):
    n = 32
    t = 2 * math.pi * np.arange(n) / n
    R = log_product_weights(n, 0)
    # int_0^2pi ln(4 sin^2(t / 2)) cos(m t) dt = -2 pi / m (0 for m = 0).
    expected = 0.0 if m == 0 else -2 * math.pi / m
    assert R @ np.cos(m * t) == pytest.approx(expected, abs=1e-12)


def test_log_product_weights_shift_with_target():
    n = 16
    np.testing.assert_allclose(log_product_weights(n, 3), np.roll(log_product_weights(n, 0), 3))
    rule = log_product_rule(circle_frame(1.0, n), 3)
    assert rule.target_index == 3
    with pytest.raises(ValueError):
        log_product_weights(15, 0)


def test_log_singular_integral_matches_adaptive_quadrature():
    n = 64
    t = 2 * math.pi * np.arange(n) / n
    frame = circle_frame(1.0, n)
    split = LogSplit(index=5, A=np.exp(np.cos(t)), B=np.sin(t) ** 2)
    t0 = t[5]

    def integrand(s):
        return math.exp(math.cos(s)) * math.log(4 * math.sin(0.5 * (t0 - s)) ** 2) + math.sin(s) ** 2

    ref, _ = quad(integrand, 0.0, 2 * math.pi, points=[t0], limit=400, epsabs=1e-13)
    assert integrate_log_singular(frame, split).real == pytest.approx(ref, abs=1e-10)
    with pytest.raises(CapabilityError):
        integrate_log_singular(frame, (np.ones(n), np.ones(n)))


def test_single_layer_of_constant_on_circle():
    # v[1] = R ln R on the circle of radius R.
    R = 2.0
    frame = circle_frame(R, 64)
    fs = fundamental_solution(OperatorCoefficients.laplace())
    mu = make_density(frame, "constant")
    for i in (0, 17):
        value = integrate_log_singular(frame, single_layer_log_split(fs, frame, mu, i))
        assert value.real == pytest.approx(R * math.log(R), abs=1e-12)


def test_double_layer_diagonal_on_circle():
    c = OperatorCoefficients.laplace()
    frame = circle_frame(2.0, 32)
    diag = principal_double_layer_diagonal(c, fundamental_solution(c), frame)
    np.testing.assert_allclose(diag, 1 / (8 * math.pi))
    drift = OperatorCoefficients(np.eye(2), np.array([1.0, 0.0]), 0.0)
    with pytest.raises(CapabilityError):
        principal_double_layer_diagonal(drift, fundamental_solution(drift), frame)


def test_upsample_factor_is_a_capped_power_of_two():
    frame = circle_frame(1.0, 64)
    settings = QuadratureSettings(upsample_cap=48, near_ratio=3.0)
    assert choose_upsample_factor(frame, 10.0, settings) == 1
    f = choose_upsample_factor(frame, 0.01, settings)
    assert f & (f - 1) == 0
    assert frame.max_spacing / f <= 0.01 / 3.0 or f == 32
    assert choose_upsample_factor(frame, 1e-9, settings) == 32


def test_near_singular_upsample_resolves_close_target():
    frame = circle_frame(1.0, 64)
    fs = fundamental_solution(OperatorCoefficients.laplace())
    mu = make_density(frame, "constant")
    x = np.array([0.0, 0.98])
    result = near_singular_upsample(frame, mu, x, single_layer_kernel(fs))
    # Inside the unit circle v[1] = ln 1 = 0.
    assert abs(result.value) < 1e-8
    assert result.factor > 1
    assert result.distance == pytest.approx(0.02, abs=1e-12)


def test_near_singular_errors():
    frame = circle_frame(1.0, 64)
    fs = fundamental_solution(OperatorCoefficients.laplace())
    mu = make_density(frame, "constant")
    with pytest.raises(SingularityError):
        near_singular_upsample(frame, mu, frame.points[3], single_layer_kernel(fs))
    with pytest.raises(PrecisionError) as info:
        near_singular_upsample(frame, mu, np.array([0.0, 1.0 - 1e-8]), single_layer_kernel(fs))
    assert info.value.distance == pytest.approx(1e-8, rel=1e-3)
    with pytest.raises(ValueError):
        near_singular_upsample(frame, mu, np.array([0.0, 0.5]), single_layer_kernel(fs), factor=3)

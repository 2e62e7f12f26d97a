import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ellipe

from app.geometry import (
    BoundaryDensity,
    CapabilityError,
    CurveConstructionError,
    TWO_PI,
    circle_frame,
    classify_point,
    classify_points,
    conormal_weight_density,
    make_curve,
    make_density,
    normal_density,
    reversed_frame,
    spectral_param_derivative,
    tangential_derivative,
    tangential_derivative_from_extension,
    trig_interpolate,
)


def test_circle_frame_geometry():
    frame = circle_frame(2.0, 64)
    np.testing.assert_allclose(np.linalg.norm(frame.points, axis=1), 2.0)
    # Outward normal on a counterclockwise circle.
    np.testing.assert_allclose(frame.normals, frame.points / 2.0, atol=1e-14)
    np.testing.assert_allclose(frame.curvature, 0.5)
    assert frame.length == pytest.approx(4.0 * math.pi)
    assert frame.max_spacing == pytest.approx(2.0 * 2.0 * math.sin(math.pi / 64))


def test_ellipse_length_matches_elliptic_integral():
    a, b = 2.0, 1.0
    curve, frame = make_curve("ellipse", 128, a=a, b=b)
    expected = 4.0 * a * ellipe(1.0 - (b / a) ** 2)
    assert frame.length == pytest.approx(expected, rel=1e-12)
    assert curve.length() == pytest.approx(expected, rel=1e-10)


def test_star_and_blend_presets():
    curve, frame = make_curve("star", 256, r0=1.0, eps=0.2, k=5)
    assert curve.smoothness == "analytic"
    assert curve.max_radius() == pytest.approx(1.2, rel=1e-6)
    blend, _ = make_curve("c11_blend", 128, r0=1.0, c=0.1)
    assert blend.smoothness == "c1_1"
    assert blend.normal_smoothness == "c01"


@pytest.mark.parametrize(
    "kind,params",
    [
        ("ellipse", {"a": -1.0, "b": 1.0}),
        ("star", {"r0": 1.0, "eps": 1.5, "k": 3}),
        ("c11_blend", {"r0": 0.1, "c": 1.0}),
        ("spiral", {}),
    ],
)
def test_invalid_curves_raise(kind, params):
    with pytest.raises(CurveConstructionError):
        make_curve(kind, 64, **params)


def test_odd_node_count_rejected():
    with pytest.raises(ValueError):
        make_curve("ellipse", 63)


def test_reversed_curve_flips_normals():
    frame = circle_frame(1.0, 32)
    rev = reversed_frame(frame)
    idx = (-np.arange(32)) % 32
    np.testing.assert_allclose(rev.points, frame.points[idx], atol=1e-14)
    np.testing.assert_allclose(rev.normals, -frame.normals[idx], atol=1e-14)


def test_spectral_derivative_is_exact_for_trig_polynomials():
    t = TWO_PI * np.arange(32) / 32
    values = np.cos(3 * t) + 0.5 * np.sin(7 * t)
    expected = -3 * np.sin(3 * t) + 3.5 * np.cos(7 * t)
    np.testing.assert_allclose(spectral_param_derivative(values), expected, atol=1e-12)


def test_trig_interpolate_off_grid():
    t = TWO_PI * np.arange(16) / 16
    s = np.array([0.1, 1.3, 4.0])
    np.testing.assert_allclose(trig_interpolate(np.cos(2 * t), s), np.cos(2 * s), atol=1e-12)


def test_density_presets_and_regularity():
    frame = circle_frame(1.0, 64)
    assert make_density(frame, "cos", m=2).smoothness == "analytic"
    assert make_density(frame, "lipschitz_hat", center=1.0, width=0.5).smoothness == "c01"
    hat = make_density(frame, "c11_hat", center=0.0, width=1.0)
    assert hat.smoothness == "c11"
    assert hat.at(0.0)[0] == pytest.approx(1.0)
    assert hat.at(1.0)[0] == pytest.approx(0.0)
    # Derivative continuous across the kinks at +-width/2.
    left, right = hat.derivative(np.array([0.5 - 1e-9, 0.5 + 1e-9]))
    assert left == pytest.approx(right, abs=1e-6)
    with pytest.raises(ValueError):
        make_density(frame, "lipschitz_hat", width=4.0)


def test_density_algebra_tracks_regularity():
    frame = circle_frame(1.0, 32)
    mu = make_density(frame, "cos", m=1)
    hat = make_density(frame, "lipschitz_hat", center=0.0, width=1.0)
    combo = mu * hat + 2.0
    assert combo.smoothness == "c01"
    np.testing.assert_allclose(combo.values, mu.values * hat.values + 2.0)
    with pytest.raises(CapabilityError):
        combo.param_derivative()
    other = make_density(circle_frame(1.0, 64), "cos")
    with pytest.raises(ValueError):
        mu + other


def test_density_rejects_mismatched_callable():
    frame = circle_frame(1.0, 16)
    with pytest.raises(ValueError):
        BoundaryDensity(frame, np.zeros(16), "analytic", function=lambda t: np.cos(t))


def test_tangential_derivative_on_circle():
    frame = circle_frame(1.0, 64)
    mu = make_density(frame, "cos", m=1)
    m12 = tangential_derivative(mu, 1, 2)
    np.testing.assert_allclose(m12.values, -np.sin(frame.t), atol=1e-12)
    np.testing.assert_allclose(tangential_derivative(mu, 2, 1).values, np.sin(frame.t), atol=1e-12)
    np.testing.assert_allclose(tangential_derivative(mu, 1, 1).values, 0.0)
    with pytest.raises(CapabilityError):
        tangential_derivative(make_density(frame, "lipschitz_hat"), 1, 2)


def test_tangential_derivative_does_not_depend_on_extension():
    _, frame = make_curve("ellipse", 64, a=1.5, b=1.0)
    # f(x) = x1 x2 on the curve: mu(t) = 1.5 cos t sin t.
    mu = BoundaryDensity.from_function(
        frame,
        lambda t: 1.5 * np.cos(t) * np.sin(t),
        "analytic",
        lambda t: 1.5 * np.cos(2 * t),
    )
    intrinsic = tangential_derivative(mu, 1, 2).values
    ext_a = tangential_derivative_from_extension(frame, lambda p: np.stack([p[:, 1], p[:, 0]], axis=1), 1, 2)
    # Adding (x1^2 / 1.5^2 + x2^2 - 1) g(x) changes f only off the curve.
    def grad_b(p):
        phi = p[:, 0] ** 2 / 2.25 + p[:, 1] ** 2 - 1.0
        dphi = np.stack([2 * p[:, 0] / 2.25, 2 * p[:, 1]], axis=1)
        g = p[:, 0] + 3.0
        dg = np.stack([np.ones(len(p)), np.zeros(len(p))], axis=1)
        return np.stack([p[:, 1], p[:, 0]], axis=1) + dphi * g[:, None] + phi[:, None] * dg

    ext_b = tangential_derivative_from_extension(frame, grad_b, 1, 2)
    np.testing.assert_allclose(ext_a, intrinsic, atol=1e-12)
    np.testing.assert_allclose(ext_b, intrinsic, atol=1e-12)


def test_normal_and_conormal_densities():
    _, frame = make_curve("ellipse", 256, a=2.0, b=1.0)
    nu1 = normal_density(frame, 1)
    np.testing.assert_allclose(nu1.values, frame.normals[:, 0])
    a2 = np.array([[2.0, 0.5], [0.5, 1.0]])
    q = conormal_weight_density(frame, a2)
    expected = np.einsum("ij,jk,ik->i", frame.normals, a2, frame.normals)
    np.testing.assert_allclose(q.values, expected)
    # Exact derivative agrees with the spectral one.
    np.testing.assert_allclose(q.param_derivative().values, spectral_param_derivative(q.values.real), atol=1e-9)


def test_point_classification():
    frame = circle_frame(1.0, 128)
    assert classify_point(frame, [0.2, 0.1]).kind == "inside"
    assert classify_point(frame, [3.0, 0.0]).kind == "outside"
    near = classify_point(frame, [0.0, 1.01])
    assert near.kind == "near_boundary"
    assert near.distance == pytest.approx(0.01, abs=1e-10)
    out = classify_points(frame, np.array([[0.0, 0.99], [0.0, 1.001]]), delta_near=0.0)
    assert out["inside"].tolist() == [True, False]


def test_frame_csv_export(tmp_path):
    frame = circle_frame(1.0, 16)
    lines = frame.to_csv(tmp_path / "frame.csv").read_text().splitlines()
    assert lines[0] == "t,x1,x2,nu1,nu2,w"
    assert len(lines) == 17

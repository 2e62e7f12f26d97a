import math

import mpmath
import numpy as np
import pytest
from scipy.special import hankel1

from app.kernels import (
    HomogeneousKernel,
    SingularityError,
    difference_kernel,
    family_coefficients,
    fundamental_solution,
    homogeneity_parity_check,
    homogeneous_class_norm,
    k_row,
    kernel_class_norm,
    laplace_value,
    principal_gradient_kernel,
    principal_gradient_row,
    principal_value,
    yukawa_gradient,
    yukawa_value,
)
from app.operators import DerivativeJet, OperatorCoefficients, P_term_scale, apply_P, derivative_jet, factorize


RNG_SEED = 11

DRIFT = OperatorCoefficients(np.array([[1.0, 0.3], [0.3, 2.0]]), np.array([0.5, -0.25 + 0.1j]), -1.0 + 0.5j)
OPERATORS = {
    "laplace": OperatorCoefficients.laplace(),
    "anisotropic": OperatorCoefficients.anisotropic([[2.0, 0.5], [0.5, 1.0]]),
    "yukawa": OperatorCoefficients.yukawa(1.5),
    "helmholtz": OperatorCoefficients.helmholtz(2.0),
    "drift": DRIFT,
    "yukawa3": OperatorCoefficients.yukawa(1.0, 3),
}


def _points(n, count=20):
    rng = np.random.default_rng(RNG_SEED)
    r = np.exp(rng.uniform(math.log(0.05), math.log(5.0), count))
    d = rng.normal(size=(count, n))
    return r[:, None] * d / np.linalg.norm(d, axis=1)[:, None]


def test_family_inference():
    assert fundamental_solution(OPERATORS["laplace"]).family == "laplace"
    assert fundamental_solution(OPERATORS["anisotropic"]).family == "anisotropic_principal"
    assert fundamental_solution(OPERATORS["yukawa"]).family == "yukawa"
    assert fundamental_solution(OPERATORS["helmholtz"]).family == "helmholtz"
    assert fundamental_solution(DRIFT).family == "drift"
    with pytest.raises(ValueError):
        fundamental_solution(OPERATORS["laplace"], "yukawa")
    with pytest.raises(ValueError):
        family_coefficients("drift")


def test_laplace_and_yukawa_closed_forms():
    X = _points(2)
    np.testing.assert_allclose(fundamental_solution(OPERATORS["laplace"]).value(X), laplace_value(2, X), rtol=1e-14)
    fs = fundamental_solution(OPERATORS["yukawa"])
    np.testing.assert_allclose(fs.value(X), yukawa_value(1.5, 2, X), rtol=1e-13)
    np.testing.assert_allclose(fs.gradient(X), yukawa_gradient(1.5, 2, X), rtol=1e-12, atol=1e-15)


def test_yukawa_against_mpmath():
    for r in (1e-3, 0.3, 2.0, 7.5):
        expected = -float(mpmath.besselk(0, 1.5 * r)) / (2 * math.pi)
        assert yukawa_value(1.5, 2, [r, 0.0]) == pytest.approx(expected, rel=1e-13)
    expected3 = -float(mpmath.exp(-0.7)) / (4 * math.pi * 0.7)
    assert yukawa_value(1.0, 3, [0.0, 0.7, 0.0]) == pytest.approx(expected3, rel=1e-14)


def test_helmholtz_is_outgoing_hankel():
    fs = fundamental_solution(OPERATORS["helmholtz"])
    X = _points(2)
    r = np.linalg.norm(X, axis=1)
    np.testing.assert_allclose(fs.value(X), -0.25j * hankel1(0, 2.0 * r), rtol=1e-12)
    assert not fs.is_real


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_exact_jet_solves_the_pde(name):
    c = OPERATORS[name]
    fs = fundamental_solution(c)
    X = _points(c.n)
    jet = DerivativeJet(value=np.asarray(fs.value(X)), gradient=fs.gradient(X), hessian=fs.hessian(X))
    relative = np.abs(apply_P(c, jet)) / P_term_scale(c, jet)
    assert np.max(relative) < 1e-12


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_gradient_and_hessian_match_finite_differences(name):
    c = OPERATORS[name]
    fs = fundamental_solution(c)
    X = _points(c.n, count=8)
    jet = derivative_jet(lambda P: np.asarray(fs.value(P)), X)
    np.testing.assert_allclose(jet.gradient, fs.gradient(X), rtol=1e-7, atol=1e-9)
    H = fs.hessian(X)
    np.testing.assert_allclose(jet.hessian, H, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(H, np.swapaxes(H, -1, -2), atol=1e-12)


def test_origin_is_singular():
    fs = fundamental_solution(OPERATORS["laplace"])
    with pytest.raises(SingularityError):
        fs.value([0.0, 0.0])


def test_remainder_vanishes_for_principal_families_and_decays_for_yukawa():
    X = _points(2)
    assert np.all(fundamental_solution(OPERATORS["anisotropic"]).remainder_row(X) == 0)

    c = OPERATORS["yukawa"]
    fs = fundamental_solution(c)
    ray = np.array([[math.cos(0.4), math.sin(0.4)]])
    sizes = [float(np.linalg.norm(k_row(c, fs.factorization, fs, r * ray))) for r in 2.0 ** -np.arange(1, 21)]
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] < 1e-3


@pytest.mark.parametrize("name", ["laplace", "anisotropic", "yukawa", "drift"])
def test_principal_gradient_kernels_are_odd_and_homogeneous(name):
    fs = fundamental_solution(OPERATORS[name])
    for j in range(2):
        report = homogeneity_parity_check(principal_gradient_kernel(fs, j), tolerance=1e-12)
        assert report.accepted
        assert report.homogeneity_defect < 1e-12
        assert report.parity_defect < 1e-12


def test_even_mean_zero_class_rejects_nonzero_mean():
    good = HomogeneousKernel(degree=-2.0, parity="even_mean_zero", value=lambda x: (x[..., 0] ** 2 - x[..., 1] ** 2) / np.sum(x**2, axis=-1) ** 2)
    bad = HomogeneousKernel(degree=-2.0, parity="even_mean_zero", value=lambda x: 1.0 / np.sum(x**2, axis=-1))
    assert homogeneity_parity_check(good).accepted
    assert not homogeneity_parity_check(bad).accepted


def test_log_split_diagonal_is_the_limit_of_the_smooth_part():
    fs = fundamental_solution(OPERATORS["yukawa"])
    delta = 1e-4
    # Unit circle: |gamma(t) - gamma(0)|^2 = 4 sin^2(t / 2).
    x = np.array([math.cos(delta) - 1.0, math.sin(delta)])
    log_term = math.log(4.0 * math.sin(0.5 * delta) ** 2)
    smooth = fs.value(x) - fs.log_split_coefficient(x) * log_term
    assert smooth == pytest.approx(fs.log_split_diagonal([0.0, 1.0]), abs=1e-6)
    assert fs.log_split_diagonal([0.0, 1.0]) == pytest.approx((math.log(0.75) + float(np.euler_gamma)) / (2 * math.pi))


def test_homogeneous_class_norm_of_J1():
    fs = fundamental_solution(OPERATORS["laplace"])
    K = principal_gradient_kernel(fs, 0)
    low = homogeneous_class_norm(K, m=0, alpha=1.0, samples=128)
    high = homogeneous_class_norm(K, m=1, alpha=0.5, samples=256)
    # J_1 on the unit circle is cos(theta) / (2 pi).
    assert low == pytest.approx(1 / (2 * math.pi) + 1 / (2 * math.pi), rel=1e-2)
    assert high > low
    with pytest.raises(ValueError):
        homogeneous_class_norm(K, m=2)


def test_kernel_class_norm_is_stable_under_refinement():
    fs = fundamental_solution(OPERATORS["laplace"])
    K = difference_kernel(lambda d: fs.principal_gradient_row(d)[..., 0])
    totals = []
    for n in (32, 64):
        t = 2 * math.pi * np.arange(n) / n
        pts = np.stack([np.cos(t), np.sin(t)], axis=1)
        est = kernel_class_norm(K, pts, pts, 1.0, 2.0, 1.0)
        assert est.label == "estimate (lower bound)"
        totals.append(est.total)
    assert totals[1] / totals[0] < 2.0
    with pytest.raises(ValueError):
        kernel_class_norm(K, np.zeros((1, 2)), np.zeros((1, 2)), 1.0, 2.0, 1.0)


def test_principal_value_and_its_gradient_row():
    c = OperatorCoefficients.anisotropic([[4.0, 0.0], [0.0, 1.0]])
    fac = factorize(c)
    x = np.array([1.0, 1.0])
    # T = diag(2, 1): S_2(T^-1 x) / sqrt(det a2) with T^-1 x = (0.5, 1)
    assert principal_value(c, fac, x) == pytest.approx(math.log(math.sqrt(1.25)) / (2.0 * math.pi) / 2.0, rel=1e-14)

    h = 1e-5
    fd = np.array(
        [(principal_value(c, fac, x + h * e) - principal_value(c, fac, x - h * e)) / (2.0 * h) for e in np.eye(2)]
    )
    np.testing.assert_allclose(principal_gradient_row(c, fac, x), fd, atol=1e-8)

    fs = fundamental_solution(c)
    X = _points(2)
    np.testing.assert_allclose(fs.principal_value(X), principal_value(c, fac, X), rtol=1e-14)
    np.testing.assert_allclose(fs.gradient(X), principal_gradient_row(c, fac, X), rtol=1e-12, atol=1e-14)

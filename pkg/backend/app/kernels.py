"""Fundamental solutions, their principal/remainder split and kernel-class norms.

Every supported operator has the closed form

    S(x) = exp(-b.y / 2) G_kappa(|y|) / sqrt(det a2),   y = T^-1 x,

with a2 = T T^t, b = T^-1 a1 and kappa^2 = b.b / 4 - a0. G_0 is the Laplace
kernel of R^n; for kappa != 0, G = -K0(kappa r) / (2 pi) in the plane and
-exp(-kappa r) / (4 pi r) in space. Purely imaginary kappa is taken as -i k
so the Helmholtz kernel is the outgoing one.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
import math
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
from scipy.special import i0, iv, k0, k1, kv

from .moduli import ModulusFunction, SampledFunction, holder_seminorm
from .operators import Factorization, OperatorCoefficients, factorize
from .geometry import spectral_param_derivative


KernelFamily = Literal["laplace", "anisotropic_principal", "yukawa", "helmholtz", "drift"]
Parity = Literal["odd", "even", "even_mean_zero", "general"]

EULER_GAMMA = float(np.euler_gamma)


class SingularityError(ValueError):
    """A kernel was evaluated at its singular point."""


def surface_measure(n: int) -> float:
    """s_n, the measure of the unit sphere in R^n."""
    if n == 2:
        return 2.0 * math.pi
    if n == 3:
        return 4.0 * math.pi
    raise ValueError(f"dimension must be 2 or 3, got {n}")


def _points(x, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or (n is not None and arr.shape[-1] != n):
        raise ValueError(f"points must have trailing dimension {n}")
    if np.any(np.all(arr == 0, axis=-1)):
        raise SingularityError("kernel evaluated at the origin")
    return arr


def _scalar(out: np.ndarray):
    if np.ndim(out) == 0:
        return out.item()
    return out


def laplace_value(n: int, x) -> Union[float, np.ndarray]:
    """ln|x| / (2 pi) for n = 2, -1 / (4 pi |x|) for n = 3."""
    X = _points(x, n)
    r = np.linalg.norm(X, axis=-1)
    if n == 2:
        return _scalar(np.log(r) / (2.0 * math.pi))
    return _scalar(-1.0 / (4.0 * math.pi * r))


def laplace_gradient(n: int, x) -> np.ndarray:
    X = _points(x, n)
    r = np.linalg.norm(X, axis=-1)
    return X / (surface_measure(n) * r[..., None] ** n)


def yukawa_value(k: float, n: int, x) -> Union[float, np.ndarray]:
    """Fundamental solution of Delta - k^2."""
    X = _points(x, n)
    r = np.linalg.norm(X, axis=-1)
    if n == 2:
        return _scalar(-k0(k * r) / (2.0 * math.pi))
    return _scalar(-np.exp(-k * r) / (4.0 * math.pi * r))


def yukawa_gradient(k: float, n: int, x) -> np.ndarray:
    X = _points(x, n)
    r = np.linalg.norm(X, axis=-1)
    if n == 2:
        radial = k * k1(k * r) / (2.0 * math.pi)
    else:
        radial = np.exp(-k * r) * (k * r + 1.0) / (4.0 * math.pi * r**2)
    return X * (radial / r)[..., None]


def infer_family(c: OperatorCoefficients) -> KernelFamily:
    identity = np.array_equal(c.a2, np.eye(c.n))
    if c.has_drift:
        return "drift"
    if c.a0 == 0:
        return "laplace" if identity else "anisotropic_principal"
    if identity and c.a0.imag == 0:
        return "yukawa" if c.a0.real < 0 else "helmholtz"
    return "drift"


def _kappa(c: OperatorCoefficients, b: np.ndarray) -> complex:
    kappa_sq = complex(np.sum(b * b) / 4.0 - c.a0)
    if kappa_sq == 0:
        return 0j
    kappa = cmath.sqrt(kappa_sq)
    if kappa.real == 0 and kappa.imag > 0:
        kappa = -kappa
    return kappa


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    coefficients: OperatorCoefficients
    factorization: Factorization
    family: KernelFamily
    kappa: complex
    drift: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.coefficients.n

    @property
    def is_real(self) -> bool:
        return self.kappa.imag == 0

    @property
    def has_remainder(self) -> bool:
        return self.kappa != 0 or bool(np.any(self.drift != 0))

    def _reduced(self, x):
        X = _points(x, self.n)
        y = X @ self.factorization.T_inv.T
        rho = np.linalg.norm(y, axis=-1)
        return X, y, rho

    def _radial(self, rho: np.ndarray):
        """G(rho) and G'(rho)."""
        kappa = self.kappa
        if self.n == 2:
            if kappa == 0:
                return np.log(rho) / (2.0 * math.pi), 1.0 / (2.0 * math.pi * rho)
            if kappa.imag == 0:
                z = kappa.real * rho
                return -k0(z) / (2.0 * math.pi), kappa.real * k1(z) / (2.0 * math.pi)
            z = kappa * rho
            return -kv(0, z) / (2.0 * math.pi), kappa * kv(1, z) / (2.0 * math.pi)
        if kappa == 0:
            return -1.0 / (4.0 * math.pi * rho), 1.0 / (4.0 * math.pi * rho**2)
        e = np.exp(-kappa * rho)
        return -e / (4.0 * math.pi * rho), e * (kappa * rho + 1.0) / (4.0 * math.pi * rho**2)

    def _drift_factor(self, y: np.ndarray):
        if not np.any(self.drift != 0):
            return None
        return np.exp(-0.5 * (y @ self.drift))

    def value(self, x):
        _, y, rho = self._reduced(x)
        g, _ = self._radial(rho)
        out = g / self.factorization.sqrt_det
        damp = self._drift_factor(y)
        if damp is not None:
            out = damp * out
        return _scalar(np.asarray(out))

    def gradient(self, x) -> np.ndarray:
        _, y, rho = self._reduced(x)
        g, dg = self._radial(rho)
        grad_y = (dg / rho)[..., None] * y
        damp = self._drift_factor(y)
        if damp is not None:
            grad_y = damp[..., None] * (grad_y - 0.5 * g[..., None] * self.drift)
        return (grad_y @ self.factorization.T_inv) / self.factorization.sqrt_det

    def _radial_second(self, rho: np.ndarray):
        kappa = self.kappa
        if self.n == 2:
            if kappa == 0:
                return -1.0 / (2.0 * math.pi * rho**2)
            if kappa.imag == 0:
                z = kappa.real * rho
                return -(kappa.real**2) * (k0(z) + k1(z) / z) / (2.0 * math.pi)
            z = kappa * rho
            return -(kappa**2) * (kv(0, z) + kv(1, z) / z) / (2.0 * math.pi)
        if kappa == 0:
            return -1.0 / (2.0 * math.pi * rho**3)
        kr = kappa * rho
        return -np.exp(-kr) * (kr**2 + 2.0 * kr + 2.0) / (4.0 * math.pi * rho**3)

    def hessian(self, x) -> np.ndarray:
        """Second derivatives d_i d_j S, shape (..., n, n)."""
        _, y, rho = self._reduced(x)
        g, dg = self._radial(rho)
        ddg = self._radial_second(rho)
        u = y / rho[..., None]
        eye = np.eye(self.n)
        outer = u[..., :, None] * u[..., None, :]
        H_y = ddg[..., None, None] * outer + (dg / rho)[..., None, None] * (eye - outer)
        damp = self._drift_factor(y)
        if damp is not None:
            b = self.drift
            F = -0.5 * g[..., None] * b + dg[..., None] * u
            dF = H_y - 0.5 * dg[..., None, None] * u[..., :, None] * b[None, :]
            H_y = damp[..., None, None] * (-0.5 * b[:, None] * F[..., None, :] + dF)
        T_inv = self.factorization.T_inv
        return np.einsum("ai,...ab,bj->...ij", T_inv, H_y, T_inv) / self.factorization.sqrt_det

    def principal_value(self, x):
        return principal_value(self.coefficients, self.factorization, x)

    def principal_gradient_row(self, x) -> np.ndarray:
        return principal_gradient_row(self.coefficients, self.factorization, x)

    def remainder_row(self, x) -> np.ndarray:
        """k(x) = grad S(x) - J(x); identically zero for laplace/anisotropic."""
        if not self.has_remainder:
            X = _points(x, self.n)
            return np.zeros(X.shape, dtype=float)
        return self.gradient(x) - self.principal_gradient_row(x)

    def log_split_coefficient(self, x):
        """A(x) with S = A ln(4 sin^2((t - tau) / 2)) + smooth, in the plane."""
        if self.n != 2:
            raise ValueError("log splitting is defined for n = 2 only")
        _, y, rho = self._reduced(x)
        if self.kappa == 0:
            bessel = np.ones_like(rho)
        elif self.kappa.imag == 0:
            bessel = i0(self.kappa.real * rho)
        else:
            bessel = iv(0, self.kappa * rho)
        out = bessel / (4.0 * math.pi * self.factorization.sqrt_det)
        damp = self._drift_factor(y)
        if damp is not None:
            out = damp * out
        return _scalar(np.asarray(out))

    def log_split_diagonal(self, tangent) -> complex:
        """Limit of the smooth part on the diagonal for boundary tangent gamma'(t)."""
        if self.n != 2:
            raise ValueError("log splitting is defined for n = 2 only")
        tangent = np.asarray(tangent, dtype=float).reshape(2)
        value = complex(math.log(np.linalg.norm(self.factorization.T_inv @ tangent)))
        if self.kappa != 0:
            value += cmath.log(self.kappa / 2.0) + EULER_GAMMA
        out = value / (2.0 * math.pi * self.factorization.sqrt_det)
        return out.real if self.is_real else out


def fundamental_solution(c: OperatorCoefficients, family: Optional[KernelFamily] = None) -> FundamentalSolution:
    """Closed-form fundamental solution for c; an explicit family must match the coefficients."""
    inferred = infer_family(c)
    if family is not None and family != inferred:
        raise ValueError(f"coefficients describe family {inferred!r}, not {family!r}")
    fac = factorize(c)
    b = fac.T_inv @ c.a1
    return FundamentalSolution(
        coefficients=c,
        factorization=fac,
        family=inferred,
        kappa=_kappa(c, b),
        drift=b,
    )


def family_coefficients(
    family: KernelFamily,
    k: float = 1.0,
    n: int = 2,
    a2: Optional[Sequence[Sequence[float]]] = None,
) -> OperatorCoefficients:
    """Coefficients for a "kernel" config block."""
    if family == "laplace":
        return OperatorCoefficients.laplace(n)
    if family == "yukawa":
        return OperatorCoefficients.yukawa(k, n)
    if family == "helmholtz":
        return OperatorCoefficients.helmholtz(k, n)
    if family == "anisotropic_principal":
        if a2 is None:
            raise ValueError("anisotropic_principal needs a2")
        return OperatorCoefficients.anisotropic(a2)
    raise ValueError(f"family {family!r} needs explicit operator coefficients")


def principal_value(c: OperatorCoefficients, fac: Factorization, x):
    """S_n(T^-1 x) / sqrt(det a2)."""
    y = _points(x, c.n) @ fac.T_inv.T
    return _scalar(np.asarray(laplace_value(c.n, y)) / fac.sqrt_det)


def principal_gradient_row(c: OperatorCoefficients, fac: Factorization, x) -> np.ndarray:
    """J(x) = T^-T grad S_n(T^-1 x) / sqrt(det a2) = a2^-1 x / (s_n sqrt(det a2) |T^-1 x|^n)."""
    y = _points(x, c.n) @ fac.T_inv.T
    return (laplace_gradient(c.n, y) @ fac.T_inv) / fac.sqrt_det


def gradient_remainder(c: OperatorCoefficients, fac: Factorization, fs: FundamentalSolution, x) -> np.ndarray:
    """k_row(x) = grad S(x) - J(x)."""
    return fs.gradient(x) - principal_gradient_row(c, fac, x)


k_row = gradient_remainder


# --- homogeneous kernels ----------------------------------------------------


@dataclass(frozen=True)
class HomogeneousKernel:
    degree: float
    parity: Parity
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    n: int = 2
    m: int = 0
    alpha: float = 1.0
    label: str = ""


@dataclass(frozen=True)
class HomogeneityReport:
    homogeneity_defect: float
    parity_defect: float
    sphere_integral: float
    accepted: bool


def _unit_sphere(n: int, samples: int) -> np.ndarray:
    if n == 2:
        theta = 2.0 * math.pi * (np.arange(samples) + 0.25) / samples
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    i = np.arange(samples) + 0.5
    z = 1.0 - 2.0 * i / samples
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    rho = np.sqrt(1.0 - z**2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def homogeneity_parity_check(
    K: HomogeneousKernel,
    samples: int = 256,
    scales: Optional[Sequence[float]] = None,
    tolerance: float = 1e-10,
) -> HomogeneityReport:
    """Relative homogeneity and parity defects on the unit sphere, plus the sphere integral."""
    xi = _unit_sphere(K.n, samples)
    lambdas = np.geomspace(0.1, 10.0, 9) if scales is None else np.asarray(scales, dtype=float)

    base = np.asarray(K.value(xi))
    sup = max(float(np.max(np.abs(base))), np.finfo(float).tiny)

    homogeneity = 0.0
    for lam in lambdas:
        expected = lam**K.degree * base
        scaled = np.asarray(K.value(lam * xi))
        homogeneity = max(homogeneity, float(np.max(np.abs(scaled - expected))) / (lam**K.degree * sup))

    mirrored = np.asarray(K.value(-xi))
    if K.parity == "odd":
        parity = float(np.max(np.abs(mirrored + base))) / sup
    elif K.parity in ("even", "even_mean_zero"):
        parity = float(np.max(np.abs(mirrored - base))) / sup
    else:
        parity = 0.0

    sphere_integral = float(np.real(np.mean(base))) * surface_measure(K.n)
    accepted = homogeneity < tolerance and parity < tolerance
    if K.parity == "even_mean_zero":
        accepted = accepted and abs(sphere_integral) < tolerance * max(1.0, sup)

    return HomogeneityReport(
        homogeneity_defect=homogeneity,
        parity_defect=parity,
        sphere_integral=sphere_integral,
        accepted=bool(accepted),
    )


def principal_gradient_kernel(fs: FundamentalSolution, j: int) -> HomogeneousKernel:
    """x -> J_j(x): odd, homogeneous of degree 1 - n."""
    return HomogeneousKernel(
        degree=1.0 - fs.n,
        parity="odd",
        value=lambda x: fs.principal_gradient_row(x)[..., j],
        n=fs.n,
        label=f"J_{j + 1}",
    )


def homogeneous_class_norm(K: HomogeneousKernel, m: Optional[int] = None, alpha: Optional[float] = None, samples: int = 512) -> float:
    """C^{m,alpha} norm of the restriction of K to the unit circle (m in {0, 1})."""
    if K.n != 2:
        raise ValueError("homogeneous_class_norm samples the unit circle only")
    m = K.m if m is None else m
    alpha = K.alpha if alpha is None else alpha
    if m not in (0, 1):
        raise ValueError("only m in {0, 1} is supported")
    if samples % 2:
        raise ValueError("samples must be even")

    theta = 2.0 * math.pi * np.arange(samples) / samples
    xi = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    values = np.asarray(K.value(xi))
    omega = ModulusFunction.power(alpha)

    norm = float(np.max(np.abs(values)))
    top = values
    if m == 1:
        # Arc-length derivative on the unit circle.
        top = spectral_param_derivative(values)
        norm += float(np.max(np.abs(top)))
    norm += holder_seminorm(SampledFunction(xi, top, "boundary"), omega).seminorm
    return norm


# --- potential-type kernel classes ------------------------------------------


@dataclass(frozen=True)
class KernelClassNormEstimate:
    s1: float
    s2: float
    s3: float
    term1: float
    term2: float
    samples: str
    label: str = "estimate (lower bound)"

    @property
    def total(self) -> float:
        return self.term1 + self.term2


PairKernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def difference_kernel(k: Callable[[np.ndarray], np.ndarray]) -> PairKernel:
    """(x, y) -> k(x - y)."""
    return lambda x, y: k(np.asarray(x) - np.asarray(y))


def kernel_class_norm(
    K: PairKernel,
    X: np.ndarray,
    Y: np.ndarray,
    s1: float,
    s2: float,
    s3: float,
) -> KernelClassNormEstimate:
    """Sampled sup |x - y|^s1 |K(x, y)| plus the difference-quotient sup.

    term2 runs over triples (x', x'', y) with x' != x'' and
    |x' - y| >= 2 |x' - x''|, of |x' - y|^s2 / |x' - x''|^s3 |K(x', y) - K(x'', y)|.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))

    diff = X[:, None, :] - Y[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    off = dist > 0
    if not np.any(off):
        raise ValueError("no sample pair with x != y")

    xi, yi = np.nonzero(off)
    kv_pairs = np.asarray(K(X[xi], Y[yi]))
    term1 = float(np.max(dist[xi, yi] ** s1 * np.abs(kv_pairs)))

    # K on the full grid, NaN at coincident points.
    grid = np.full(dist.shape, np.nan, dtype=complex)
    grid[xi, yi] = kv_pairs

    term2 = -1.0
    for a in range(X.shape[0]):
        sep = np.linalg.norm(X - X[a], axis=1)
        admissible = (sep[:, None] > 0) & (dist[a][None, :] >= 2.0 * sep[:, None]) & off[a][None, :]
        if not np.any(admissible):
            continue
        quotient = dist[a][None, :] ** s2 / np.where(sep > 0, sep, 1.0)[:, None] ** s3
        jump = np.abs(grid[a][None, :] - grid)
        vals = np.where(admissible & ~np.isnan(jump), quotient * np.nan_to_num(jump), -1.0)
        term2 = max(term2, float(np.max(vals)))
    if term2 < 0:
        raise ValueError("no admissible triple for the difference term")

    return KernelClassNormEstimate(
        s1=s1,
        s2=s2,
        s3=s3,
        term1=term1,
        term2=term2,
        samples=f"|X|={X.shape[0]}, |Y|={Y.shape[0]}",
    )

"""Quadrature on closed planar curves: trapezoid, log-product and upsampled rules.

Kernels are passed to the near-singular path as callables
``kernel(X, frame) -> (m, M)`` or ``(m, M, k)`` arrays: one row per target
point, one column per node of ``frame`` (without density or weights).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Callable, Literal, Optional, Tuple, Union

import numpy as np

from .geometry import (
    BoundaryDensity,
    BoundaryFrame,
    CapabilityError,
    TWO_PI,
    boundary_distances,
    fine_frame,
)
from .kernels import FundamentalSolution, SingularityError
from .operators import OperatorCoefficients
from .settings import DEFAULT_QUADRATURE, QuadratureSettings


RuleKind = Literal["trapezoid", "log_product"]

# Kernel matrix entries evaluated per block (targets x nodes).
KERNEL_BLOCK = 1 << 18
NodeKernel = Callable[[np.ndarray, BoundaryFrame], np.ndarray]


class PrecisionError(ArithmeticError):
    """Target too close to the boundary for the upsampled rule."""

    def __init__(self, message: str, distance: float, estimate: float):
        super().__init__(message)
        self.distance = distance
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureRule:
    kind: RuleKind
    t: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    target_index: Optional[int] = None
    target: Optional[Tuple[float, ...]] = None

    def apply(self, values) -> complex:
        vals = np.asarray(values)
        if vals.shape[0] != self.weights.size:
            raise ValueError(f"rule has {self.weights.size} nodes, got {vals.shape[0]} values")
        return np.tensordot(self.weights, vals, axes=(0, 0))


def trapezoid_rule(frame: BoundaryFrame) -> QuadratureRule:
    """Weights 2 pi / N |gamma'(t_i)|, i.e. d sigma at the nodes."""
    return QuadratureRule(kind="trapezoid", t=frame.t, weights=frame.weights)


def integrate_smooth(frame: BoundaryFrame, values) -> complex:
    """Periodic trapezoid sum of f d sigma; values may carry trailing axes."""
    out = trapezoid_rule(frame).apply(values)
    if np.ndim(out) == 0:
        return complex(out)
    return out


# --- logarithmic product rule -----------------------------------------------


@lru_cache(maxsize=32)
def _log_weights_row(n_nodes: int) -> np.ndarray:
    if n_nodes % 2 or n_nodes < 4:
        raise ValueError(f"log-product weights need an even node count >= 4, got {n_nodes}")
    half = n_nodes // 2
    s = TWO_PI * np.arange(n_nodes) / n_nodes
    m = np.arange(1, half)
    row = -(TWO_PI / half) * (np.cos(np.outer(s, m)) @ (1.0 / m)) - (math.pi / half**2) * np.cos(half * s)
    row.setflags(write=False)
    return row


def log_product_weights(n_nodes: int, i: int) -> np.ndarray:
    """R_j with sum_j R_j q(t_j) = int ln(4 sin^2((t_i - t) / 2)) q(t) dt.

    Exact for trigonometric polynomials q of degree < N/2.
    """
    return np.roll(_log_weights_row(n_nodes), i)


def log_product_rule(frame: BoundaryFrame, i: int) -> QuadratureRule:
    return QuadratureRule(
        kind="log_product",
        t=frame.t,
        weights=log_product_weights(frame.n, i),
        target_index=i,
        target=tuple(float(v) for v in frame.points[i]),
    )


@dataclass(frozen=True)
class LogSplit:
    """Parameter-space integrand A(t) ln(4 sin^2((t_i - t) / 2)) + B(t) around node i."""

    index: int
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)


def integrate_log_singular(frame: BoundaryFrame, split: LogSplit) -> complex:
    if not isinstance(split, LogSplit):
        raise CapabilityError("log-singular integration needs an integrand factored as A ln(4 sin^2) + B")
    A = np.asarray(split.A)
    B = np.asarray(split.B)
    if A.shape[0] != frame.n or B.shape[0] != frame.n:
        raise ValueError("split parts must be sampled at every node")
    R = log_product_weights(frame.n, split.index)
    out = np.tensordot(R, A, axes=(0, 0)) + (TWO_PI / frame.n) * np.sum(B, axis=0)
    if np.ndim(out) == 0:
        return complex(out)
    return out


def single_layer_log_split(fs: FundamentalSolution, frame: BoundaryFrame, mu: BoundaryDensity, i: int) -> LogSplit:
    """Split of S(gamma(t_i) - gamma(t)) mu(t) |gamma'(t)| for the planar single layer."""
    if fs.n != 2:
        raise CapabilityError("log splitting is planar")
    n = frame.n
    others = np.arange(n) != i
    diff = frame.points[i] - frame.points[others]

    log_term = np.log(4.0 * np.sin(0.5 * (frame.t[i] - frame.t[others])) ** 2)
    A = np.empty(n, dtype=complex)
    B = np.empty(n, dtype=complex)
    A[others] = fs.log_split_coefficient(diff)
    A[i] = 1.0 / (4.0 * math.pi * fs.factorization.sqrt_det)
    B[others] = fs.value(diff) - A[others] * log_term
    B[i] = fs.log_split_diagonal(frame.curve.tangent(frame.t[i])[0])

    g = mu.values * frame.speeds
    return LogSplit(index=i, A=A * g, B=B * g)


def principal_double_layer_diagonal(c: OperatorCoefficients, fs: FundamentalSolution, frame: BoundaryFrame) -> np.ndarray:
    """Diagonal limit kappa sqrt(det a2) / (4 pi nu^t a2 nu) of the double-layer kernel."""
    if c.has_drift or fs.family == "drift":
        raise CapabilityError("diagonal limit is available for drift-free families only")
    q = np.einsum("ij,jk,ik->i", frame.normals, c.a2, frame.normals)
    return frame.curvature * fs.factorization.sqrt_det / (4.0 * math.pi * q)


# --- near-singular upsampling -----------------------------------------------


@dataclass(frozen=True)
class NearSingularResult:
    value: Union[complex, np.ndarray]
    estimate: float
    factor: int
    distance: float


def _power_of_two_floor(value: int) -> int:
    return 1 << (max(1, int(value)).bit_length() - 1)


def choose_upsample_factor(frame: BoundaryFrame, distance: float, settings: QuadratureSettings = DEFAULT_QUADRATURE) -> int:
    """Smallest power of two with fine spacing <= distance / near_ratio, capped."""
    cap = _power_of_two_floor(settings.upsample_cap)
    target = distance / settings.near_ratio
    factor = 1
    spacing = frame.max_spacing
    while spacing / factor > target and factor < cap:
        factor *= 2
    return factor


def _fine_density(density: BoundaryDensity, n_fine: int) -> np.ndarray:
    return np.asarray(density.resampled(n_fine))


def upsampled_sums(
    frame: BoundaryFrame,
    density: BoundaryDensity,
    X: np.ndarray,
    kernel: NodeKernel,
    factor: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoid sums on factor*N nodes and their difference with the half-resolution rule."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    fine = frame if factor == 1 else fine_frame(frame.curve, frame.n * factor)
    w = fine.weights * _fine_density(density, fine.n)
    step = max(1, KERNEL_BLOCK // fine.n)

    fulls, errs = [], []
    for start in range(0, X.shape[0], step):
        K = np.asarray(kernel(X[start:start + step], fine))
        subscripts = "mj,j->m" if K.ndim == 2 else "mjk,j->mk"
        full = np.einsum(subscripts, K, w)
        half = 2.0 * np.einsum(subscripts, K[:, ::2], w[::2])
        err = np.abs(full - half)
        fulls.append(full)
        errs.append(err if err.ndim == 1 else np.max(err, axis=1))
    return np.concatenate(fulls), np.concatenate(errs)


def near_singular_upsample(
    frame: BoundaryFrame,
    density: BoundaryDensity,
    x,
    kernel: NodeKernel,
    factor: Optional[int] = None,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
) -> NearSingularResult:
    """Integral of kernel(x, .) density d sigma with the geometry re-sampled on factor*N nodes."""
    point = np.asarray(x, dtype=float).reshape(1, -1)
    distance = float(boundary_distances(frame, point)[0][0])
    if distance == 0.0 or np.any(np.all(frame.points == point, axis=1)):
        raise SingularityError("target lies on the boundary")

    d_min = settings.d_min_relative * frame.curve.diameter()
    if factor is None:
        factor = choose_upsample_factor(frame, distance, settings)
    elif factor < 1 or factor & (factor - 1):
        raise ValueError(f"upsampling factor must be a power of two, got {factor}")

    value, err = upsampled_sums(frame, density, point, kernel, factor)
    if distance < d_min:
        raise PrecisionError(
            f"target at distance {distance:.3e} is below d_min={d_min:.3e}; use a boundary trace",
            distance=distance,
            estimate=float(err[0]),
        )
    out = value[0]
    return NearSingularResult(
        value=complex(out) if np.ndim(out) == 0 else out,
        estimate=float(err[0]),
        factor=int(factor),
        distance=distance,
    )

"""Closed planar boundaries, boundary frames and boundary densities.

Curves are 2*pi-periodic, counterclockwise parametrizations. Function spaces
on the boundary are realized through the parametrization: a density of class
C^{k,1} has k parameter-derivatives with the k-th Lipschitz.

Regularity is tracked as an integer rank: c0 -> -1, c01 -> 0, c11 -> 1,
c21 -> 2, ..., analytic -> 99.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
import math
from pathlib import Path
import re
from typing import Callable, Dict, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.signal import resample
from scipy.spatial.distance import cdist


TWO_PI = 2.0 * math.pi

ANALYTIC = 99
MIN_NODES = 16
DEFAULT_S_MIN = 1e-6

# Dense oversampling used for distances and validity checks.
DENSE_FACTOR = 16
SPEED_CHECK_FACTOR = 8
SIMPLICITY_MAX_NODES = 1024

CurveKind = Literal["ellipse", "star", "c11_blend"]
DensityPreset = Literal["constant", "cos", "sin", "lipschitz_hat", "c11_hat"]
ParamFn = Callable[[np.ndarray], np.ndarray]


class CurveConstructionError(ValueError):
    def __init__(self, message: str, min_speed: Optional[float] = None):
        super().__init__(message)
        self.min_speed = min_speed


class CapabilityError(ValueError):
    """An operation needs a representation (derivative, factoring) the input lacks."""


# --- regularity tags ------------------------------------------------------

_TAG_RE = re.compile(r"^c(\d+)_?1$")


def smoothness_rank(tag: str) -> int:
    if tag == "analytic":
        return ANALYTIC
    if tag == "c0":
        return -1
    match = _TAG_RE.match(tag)
    if match is None:
        raise ValueError(f"unknown smoothness tag: {tag!r}")
    return int(match.group(1))


def smoothness_tag(rank: int) -> str:
    if rank >= ANALYTIC:
        return "analytic"
    if rank < 0:
        return "c0"
    return f"c{rank}1"


def _min_tag(*tags: str) -> str:
    return smoothness_tag(min(smoothness_rank(t) for t in tags))


def lowered_rank(rank: int) -> int:
    """Rank after one differentiation; analytic stays analytic."""
    return ANALYTIC if rank >= ANALYTIC else rank - 1


# --- curves -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Parametrized closed curve t in [0, 2*pi) -> R^2.

    position/derivative/second_derivative map an (m,) parameter array to (m, 2).
    """

    kind: str
    position: ParamFn = field(repr=False)
    derivative: ParamFn = field(repr=False)
    second_derivative: ParamFn = field(repr=False)
    smoothness: str = "analytic"
    params: Mapping[str, float] = field(default_factory=dict)
    orientation: int = 1

    def points(self, t) -> np.ndarray:
        return self.position(np.atleast_1d(np.asarray(t, dtype=float)))

    def tangent(self, t) -> np.ndarray:
        return self.derivative(np.atleast_1d(np.asarray(t, dtype=float)))

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.tangent(t), axis=1)

    def normal(self, t) -> np.ndarray:
        """(gamma_2', -gamma_1') / |gamma'|; outward for counterclockwise curves."""
        d = self.tangent(t)
        s = np.linalg.norm(d, axis=1)
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / s[:, None]

    def normal_derivative(self, t) -> np.ndarray:
        """Parameter derivative of the unit normal."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        d = self.derivative(tt)
        dd = self.second_derivative(tt)
        s = np.linalg.norm(d, axis=1)
        rot = np.stack([d[:, 1], -d[:, 0]], axis=1)
        rot_dd = np.stack([dd[:, 1], -dd[:, 0]], axis=1)
        ds = np.einsum("ij,ij->i", d, dd) / s
        return rot_dd / s[:, None] - rot * (ds / s**2)[:, None]

    def curvature(self, t) -> np.ndarray:
        """Signed curvature; 1/R on a counterclockwise circle of radius R."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        d = self.derivative(tt)
        dd = self.second_derivative(tt)
        cross = d[:, 0] * dd[:, 1] - d[:, 1] * dd[:, 0]
        return cross / np.linalg.norm(d, axis=1) ** 3

    @property
    def normal_smoothness(self) -> str:
        return smoothness_tag(lowered_rank(smoothness_rank(self.smoothness)))

    def frame(self, n_nodes: int) -> "BoundaryFrame":
        return build_frame(self, n_nodes)

    def length(self) -> float:
        """Adaptive reference arc length."""
        value, _ = quad(lambda s: float(self.speed(s)[0]), 0.0, TWO_PI, limit=500, epsabs=1e-14, epsrel=1e-13)
        return float(value)

    def diameter(self, samples: int = 1024) -> float:
        pts = self.points(TWO_PI * np.arange(samples) / samples)
        return float(np.max(cdist(pts, pts)))

    def max_radius(self, samples: int = 2048) -> float:
        pts = self.points(TWO_PI * np.arange(samples) / samples)
        return float(np.max(np.linalg.norm(pts, axis=1)))

    def reversed(self) -> "BoundaryCurve":
        """Same point set traversed clockwise; its normal formula yields -nu."""
        pos, der, sec = self.position, self.derivative, self.second_derivative
        return BoundaryCurve(
            kind=f"{self.kind}:reversed",
            position=lambda t: pos(-t),
            derivative=lambda t: -der(-t),
            second_derivative=lambda t: sec(-t),
            smoothness=self.smoothness,
            params=dict(self.params),
            orientation=-self.orientation,
        )


def _readonly(*arrays: np.ndarray) -> None:
    for arr in arrays:
        arr.setflags(write=False)


@dataclass(frozen=True, eq=False)
class BoundaryFrame:
    curve: BoundaryCurve
    t: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    speeds: np.ndarray
    weights: np.ndarray
    curvature: np.ndarray

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))

    @property
    def max_spacing(self) -> float:
        nxt = np.roll(self.points, -1, axis=0)
        return float(np.max(np.linalg.norm(nxt - self.points, axis=1)))

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Columns t, x1, x2, nu1, nu2, w."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x1", "x2", "nu1", "nu2", "w"])
            for i in range(self.n):
                writer.writerow(
                    [
                        repr(float(self.t[i])),
                        repr(float(self.points[i, 0])),
                        repr(float(self.points[i, 1])),
                        repr(float(self.normals[i, 0])),
                        repr(float(self.normals[i, 1])),
                        repr(float(self.weights[i])),
                    ]
                )
        return path


def build_frame(curve: BoundaryCurve, n_nodes: int) -> BoundaryFrame:
    if n_nodes < 2:
        raise ValueError("a frame needs at least two nodes")
    t = TWO_PI * np.arange(n_nodes) / n_nodes
    points = curve.points(t)
    speeds = curve.speed(t)
    normals = curve.normal(t)
    weights = (TWO_PI / n_nodes) * speeds
    kappa = curve.curvature(t)
    _readonly(t, points, speeds, normals, weights, kappa)
    return BoundaryFrame(
        curve=curve,
        t=t,
        points=points,
        normals=normals,
        speeds=speeds,
        weights=weights,
        curvature=kappa,
    )


@lru_cache(maxsize=16)
def fine_frame(curve: BoundaryCurve, n_nodes: int) -> BoundaryFrame:
    """Cached frame of the exact curve; used by the near-singular path."""
    return build_frame(curve, n_nodes)


def _radial_curve(kind: str, r: ParamFn, dr: ParamFn, ddr: ParamFn, smoothness: str, params) -> BoundaryCurve:
    def position(t):
        rad = r(t)
        return np.stack([rad * np.cos(t), rad * np.sin(t)], axis=1)

    def derivative(t):
        c, s = np.cos(t), np.sin(t)
        rad, drad = r(t), dr(t)
        return np.stack([drad * c - rad * s, drad * s + rad * c], axis=1)

    def second_derivative(t):
        c, s = np.cos(t), np.sin(t)
        radial = ddr(t) - r(t)
        angular = 2.0 * dr(t)
        return np.stack([radial * c - angular * s, radial * s + angular * c], axis=1)

    return BoundaryCurve(
        kind=kind,
        position=position,
        derivative=derivative,
        second_derivative=second_derivative,
        smoothness=smoothness,
        params=params,
    )


def _ellipse(a: float, b: float) -> BoundaryCurve:
    if not (a > 0 and b > 0):
        raise CurveConstructionError(f"ellipse needs a, b > 0 (got a={a}, b={b})")
    return BoundaryCurve(
        kind="ellipse",
        position=lambda t: np.stack([a * np.cos(t), b * np.sin(t)], axis=1),
        derivative=lambda t: np.stack([-a * np.sin(t), b * np.cos(t)], axis=1),
        second_derivative=lambda t: np.stack([-a * np.cos(t), -b * np.sin(t)], axis=1),
        smoothness="analytic",
        params={"a": float(a), "b": float(b)},
    )


def _star(r0: float, eps: float, k: int) -> BoundaryCurve:
    if not (r0 > 0 and 0 < eps < r0) or int(k) != k or k < 1:
        raise CurveConstructionError(f"star needs 0 < eps < r0 and integer k >= 1 (got r0={r0}, eps={eps}, k={k})")
    k = int(k)
    return _radial_curve(
        "star",
        lambda t: r0 + eps * np.cos(k * t),
        lambda t: -eps * k * np.sin(k * t),
        lambda t: -eps * k * k * np.cos(k * t),
        "analytic",
        {"r0": float(r0), "eps": float(eps), "k": k},
    )


def _blend_q(t):
    s = np.mod(t, TWO_PI)
    first = s < math.pi
    q = np.where(first, 0.5 * s * (s - math.pi), -0.5 * (s - math.pi) * (s - TWO_PI))
    dq = np.where(first, s - 0.5 * math.pi, 1.5 * math.pi - s)
    ddq = np.where(first, 1.0, -1.0)
    return q, dq, ddq


def _c11_blend(r0: float, c: float) -> BoundaryCurve:
    """r(t) = r0 + c Q(t), Q piecewise quadratic with Q'' = +1 on [0, pi) and -1 on [pi, 2 pi)."""
    if r0 - abs(c) * math.pi**2 / 8.0 <= 0:
        raise CurveConstructionError(f"c11_blend radius must stay positive (r0={r0}, c={c})")
    return _radial_curve(
        "c11_blend",
        lambda t: r0 + c * _blend_q(t)[0],
        lambda t: c * _blend_q(t)[1],
        lambda t: c * _blend_q(t)[2],
        "c1_1",
        {"r0": float(r0), "c": float(c)},
    )


def _segments_intersect(pts: np.ndarray) -> bool:
    """True when two non-adjacent edges of the closed polygon cross."""
    a = pts
    b = np.roll(pts, -1, axis=0)
    m = a.shape[0]

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)

    idx = np.arange(m)
    gap = np.abs(idx[:, None] - idx[None, :])
    adjacent = (gap <= 1) | (gap == m - 1)
    return bool(np.any(crossing & ~adjacent))


def _validate_curve(curve: BoundaryCurve, n_nodes: int, s_min: float) -> None:
    dense = SPEED_CHECK_FACTOR * n_nodes
    t = TWO_PI * np.arange(dense) / dense
    speed = curve.speed(t)
    min_speed = float(np.min(speed))
    if min_speed < s_min:
        raise CurveConstructionError(
            f"irregular parametrization: min speed {min_speed:.3e} below {s_min:.3e}",
            min_speed=min_speed,
        )

    scale = max(1.0, float(np.max(np.abs(curve.points(t)))))
    ends = np.array([0.0, TWO_PI])
    if np.max(np.abs(np.diff(curve.points(ends), axis=0))) > 1e-12 * scale:
        raise CurveConstructionError("curve is not closed")
    if np.max(np.abs(np.diff(curve.tangent(ends), axis=0))) > 1e-12 * scale:
        raise CurveConstructionError("curve derivative is not periodic")
    if curve.smoothness == "analytic":
        second = curve.second_derivative(ends)
        if np.max(np.abs(np.diff(second, axis=0))) > 1e-12 * scale:
            raise CurveConstructionError("curve second derivative is not periodic")

    pts = curve.points(t)
    nxt = np.roll(pts, -1, axis=0)
    area = 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))
    if area <= 0:
        raise CurveConstructionError("curve must be counterclockwise (positive signed area)")

    step = max(1, n_nodes // SIMPLICITY_MAX_NODES)
    nodes = curve.points(TWO_PI * np.arange(0, n_nodes, step) / n_nodes)
    if _segments_intersect(nodes):
        raise CurveConstructionError("curve self-intersects on the node set")


def make_curve(
    kind: CurveKind,
    n_nodes: int,
    s_min: float = DEFAULT_S_MIN,
    **params: float,
) -> Tuple[BoundaryCurve, BoundaryFrame]:
    """Build a preset curve and its N-node frame.

    ellipse(a, b), star(r0, eps, k) with 0 < eps < r0, c11_blend(r0, c) with
    r0 - |c| pi^2 / 8 > 0.
    """
    if n_nodes < MIN_NODES or n_nodes % 2:
        raise ValueError(f"node count must be even and >= {MIN_NODES}, got {n_nodes}")

    if kind == "ellipse":
        curve = _ellipse(params.get("a", 1.0), params.get("b", 1.0))
    elif kind == "star":
        curve = _star(params.get("r0", 1.0), params.get("eps", 0.2), params.get("k", 5))
    elif kind == "c11_blend":
        curve = _c11_blend(params.get("r0", 1.0), params.get("c", 0.1))
    else:
        raise CurveConstructionError(f"unknown curve kind: {kind!r}")

    _validate_curve(curve, n_nodes, s_min)
    return curve, build_frame(curve, n_nodes)


def circle_frame(radius: float, n_nodes: int) -> BoundaryFrame:
    _, frame = make_curve("ellipse", n_nodes, a=radius, b=radius)
    return frame


def reversed_frame(frame: BoundaryFrame) -> BoundaryFrame:
    """Frame of the reversed curve; node k sits at node (-k mod N) of the original."""
    return fine_frame(_reversed_curve(frame.curve), frame.n)


@lru_cache(maxsize=16)
def _reversed_curve(curve: BoundaryCurve) -> BoundaryCurve:
    return curve.reversed()


# --- spectral helpers -------------------------------------------------------


def spectral_param_derivative(values: np.ndarray) -> np.ndarray:
    """Derivative of the trigonometric interpolant through N equispaced samples.

    Exact for trigonometric polynomials of degree < N/2.
    """
    vals = np.asarray(values)
    n = vals.shape[0]
    if n % 2:
        raise ValueError("spectral differentiation needs an even node count")
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    shape = (n,) + (1,) * (vals.ndim - 1)
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(vals, axis=0), axis=0)
    if np.isrealobj(vals):
        return out.real
    return out


def trig_interpolate(values: np.ndarray, t: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Evaluate the trigonometric interpolant of equispaced samples at arbitrary parameters."""
    vals = np.asarray(values, dtype=complex)
    n = vals.size
    coeffs = np.fft.fft(vals) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        # Split the Nyquist mode symmetrically.
        nyq = n // 2
        coeffs = np.concatenate([coeffs, [coeffs[nyq] / 2]])
        coeffs[nyq] /= 2
        k = np.concatenate([k, [-k[nyq]]])
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(tt.size, dtype=complex)
    for start in range(0, tt.size, chunk):
        part = tt[start:start + chunk]
        out[start:start + chunk] = np.exp(1j * np.outer(part, k)) @ coeffs
    return out


# --- densities --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """Density on the nodes of a frame, optionally with exact mu(t) and mu'(t)."""

    frame: BoundaryFrame
    values: np.ndarray
    smoothness: str = "c0"
    function: Optional[ParamFn] = field(default=None, repr=False)
    derivative: Optional[ParamFn] = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).reshape(-1)
        if values.size != self.frame.n:
            raise ValueError(f"density has {values.size} values for {self.frame.n} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        smoothness_rank(self.smoothness)
        if self.function is not None:
            exact = np.asarray(self.function(self.frame.t), dtype=complex)
            scale = max(1.0, float(np.max(np.abs(exact))))
            if np.max(np.abs(exact - values)) > 1e-10 * scale:
                raise ValueError("density node values do not match its callable")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        frame: BoundaryFrame,
        function: ParamFn,
        smoothness: str,
        derivative: Optional[ParamFn] = None,
        label: str = "",
    ) -> "BoundaryDensity":
        values = np.asarray(function(frame.t), dtype=complex)
        return cls(frame, values, smoothness, function, derivative, label)

    @property
    def rank(self) -> int:
        return smoothness_rank(self.smoothness)

    def at(self, t) -> np.ndarray:
        """Values at arbitrary parameters: exact callable, else trigonometric interpolation."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.function is not None:
            return np.asarray(self.function(tt), dtype=complex) * np.ones(tt.shape)
        return trig_interpolate(self.values, tt)

    def resampled(self, n_nodes: int) -> np.ndarray:
        """Values on the n-node equispaced grid."""
        if n_nodes == self.frame.n:
            return self.values
        if self.function is not None:
            return self.at(TWO_PI * np.arange(n_nodes) / n_nodes)
        return resample(self.values, n_nodes)

    def param_derivative(self) -> "BoundaryDensity":
        """d mu / dt as a density one regularity class lower."""
        if self.rank < 1:
            raise CapabilityError(f"density tagged {self.smoothness} has no parameter derivative")
        rank = lowered_rank(self.rank)
        if self.derivative is not None:
            return BoundaryDensity.from_function(self.frame, self.derivative, smoothness_tag(rank), label=f"d({self.label})")
        values = spectral_param_derivative(self.values)
        return BoundaryDensity(self.frame, values, smoothness_tag(rank), label=f"d({self.label})")

    def reversed(self, frame: BoundaryFrame) -> "BoundaryDensity":
        """The same boundary function on a reversed frame."""
        if frame.n != self.frame.n:
            raise ValueError("reversed frame must have the same node count")
        idx = (-np.arange(self.frame.n)) % self.frame.n
        fn = self.function
        der = self.derivative
        return BoundaryDensity(
            frame,
            self.values[idx],
            self.smoothness,
            (lambda t: fn(-t)) if fn is not None else None,
            (lambda t: -der(-t)) if der is not None else None,
            label=self.label,
        )

    # Algebra; regularity of a combination is the minimum of its parts.

    def _coerce(self, other) -> "BoundaryDensity":
        if isinstance(other, BoundaryDensity):
            if other.frame is not self.frame:
                raise ValueError("densities live on different frames")
            return other
        value = complex(other)
        return BoundaryDensity(
            self.frame,
            np.full(self.frame.n, value),
            "analytic",
            lambda t, v=value: np.full(np.shape(t), v, dtype=complex),
            lambda t: np.zeros(np.shape(t), dtype=complex),
            label=f"{value:g}",
        )

    def __add__(self, other) -> "BoundaryDensity":
        o = self._coerce(other)
        f, g = self.function, o.function
        df, dg = self.derivative, o.derivative
        fn = (lambda t: f(t) + g(t)) if f is not None and g is not None else None
        der = (lambda t: df(t) + dg(t)) if fn is not None and df is not None and dg is not None else None
        return BoundaryDensity(self.frame, self.values + o.values, _min_tag(self.smoothness, o.smoothness), fn, der)

    __radd__ = __add__

    def __neg__(self) -> "BoundaryDensity":
        f, df = self.function, self.derivative
        return BoundaryDensity(
            self.frame,
            -self.values,
            self.smoothness,
            (lambda t: -f(t)) if f is not None else None,
            (lambda t: -df(t)) if df is not None else None,
            label=f"-{self.label}",
        )

    def __sub__(self, other) -> "BoundaryDensity":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "BoundaryDensity":
        return self._coerce(other) + (-self)

    def __mul__(self, other) -> "BoundaryDensity":
        o = self._coerce(other)
        f, g = self.function, o.function
        df, dg = self.derivative, o.derivative
        fn = (lambda t: f(t) * g(t)) if f is not None and g is not None else None
        der = None
        if fn is not None and df is not None and dg is not None:
            der = lambda t: df(t) * g(t) + f(t) * dg(t)  # noqa: E731
        return BoundaryDensity(self.frame, self.values * o.values, _min_tag(self.smoothness, o.smoothness), fn, der)

    __rmul__ = __mul__

    def reciprocal(self) -> "BoundaryDensity":
        if np.any(self.values == 0):
            raise ZeroDivisionError("density vanishes at a node")
        f, df = self.function, self.derivative
        fn = (lambda t: 1.0 / f(t)) if f is not None else None
        der = (lambda t: -df(t) / f(t) ** 2) if f is not None and df is not None else None
        return BoundaryDensity(self.frame, 1.0 / self.values, self.smoothness, fn, der)

    def __truediv__(self, other) -> "BoundaryDensity":
        return self * self._coerce(other).reciprocal()


def zero_density(frame: BoundaryFrame) -> BoundaryDensity:
    return BoundaryDensity.from_function(
        frame,
        lambda t: np.zeros(np.shape(t), dtype=complex),
        "analytic",
        lambda t: np.zeros(np.shape(t), dtype=complex),
        label="0",
    )


def _periodic_offset(t, center: float) -> np.ndarray:
    """Signed parameter offset t - center wrapped to [-pi, pi)."""
    return np.mod(np.asarray(t, dtype=float) - center + math.pi, TWO_PI) - math.pi


def make_density(
    frame: BoundaryFrame,
    preset: DensityPreset,
    m: int = 1,
    value: float = 1.0,
    center: float = 0.0,
    width: float = 1.0,
) -> BoundaryDensity:
    """Density presets with exact callables (and exact derivatives where they exist).

    lipschitz_hat: max(0, 1 - |t - center| / width), class c01.
    c11_hat: piecewise quadratic bump of half-width `width`, class c11.
    """
    if preset == "constant":
        v = complex(value)
        return BoundaryDensity.from_function(
            frame,
            lambda t: np.full(np.shape(t), v, dtype=complex),
            "analytic",
            lambda t: np.zeros(np.shape(t), dtype=complex),
            label=f"constant({value:g})",
        )
    if preset == "cos":
        return BoundaryDensity.from_function(
            frame, lambda t: np.cos(m * t), "analytic", lambda t: -m * np.sin(m * t), label=f"cos({m}t)"
        )
    if preset == "sin":
        return BoundaryDensity.from_function(
            frame, lambda t: np.sin(m * t), "analytic", lambda t: m * np.cos(m * t), label=f"sin({m}t)"
        )
    if not (0 < width <= math.pi):
        raise ValueError(f"hat width must lie in ]0, pi], got {width}")
    if preset == "lipschitz_hat":
        return BoundaryDensity.from_function(
            frame,
            lambda t: np.maximum(0.0, 1.0 - np.abs(_periodic_offset(t, center)) / width),
            "c01",
            label=f"lipschitz_hat({center:g},{width:g})",
        )
    if preset == "c11_hat":
        def hat(t):
            s = np.abs(_periodic_offset(t, center)) / width
            return np.where(s <= 0.5, 1.0 - 2.0 * s**2, np.where(s <= 1.0, 2.0 * (1.0 - s) ** 2, 0.0))

        def hat_derivative(t):
            off = _periodic_offset(t, center)
            s = np.abs(off) / width
            sign = np.sign(off)
            inner = -4.0 * off / width**2
            outer = -4.0 * sign * (1.0 - s) / width
            return np.where(s <= 0.5, inner, np.where(s <= 1.0, outer, 0.0))

        return BoundaryDensity.from_function(frame, hat, "c11", hat_derivative, label=f"c11_hat({center:g},{width:g})")
    raise ValueError(f"unknown density preset: {preset!r}")


def normal_density(frame: BoundaryFrame, l: int) -> BoundaryDensity:
    """nu_l as a density (l in {1, 2})."""
    if l not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    curve = frame.curve
    k = l - 1
    derivative = None
    if smoothness_rank(curve.smoothness) >= 2:
        derivative = lambda t: curve.normal_derivative(t)[:, k]  # noqa: E731
    return BoundaryDensity.from_function(
        frame,
        lambda t: curve.normal(t)[:, k],
        curve.normal_smoothness,
        derivative,
        label=f"nu{l}",
    )


def conormal_weight_density(frame: BoundaryFrame, a2: np.ndarray) -> BoundaryDensity:
    """nu^T a2 nu as a density; positive under ellipticity."""
    a2 = np.asarray(a2, dtype=float)
    curve = frame.curve

    def weight(t):
        nu = curve.normal(t)
        return np.einsum("ij,jk,ik->i", nu, a2, nu)

    derivative = None
    if smoothness_rank(curve.smoothness) >= 2:
        def derivative(t):
            return 2.0 * np.einsum("ij,jk,ik->i", curve.normal(t), a2, curve.normal_derivative(t))

    return BoundaryDensity.from_function(frame, weight, curve.normal_smoothness, derivative, label="nu.a2.nu")


# --- tangential derivatives -------------------------------------------------


def tangential_derivative(f: BoundaryDensity, l: int, r: int) -> BoundaryDensity:
    """M_lr[f] = nu_l d_r f# - nu_r d_l f#, computed intrinsically.

    In the plane M_12[f] = (d/dt f) / |gamma'|, M_21 = -M_12 and M_ll = 0.
    """
    if l not in (1, 2) or r not in (1, 2):
        raise ValueError("axes must be 1 or 2")
    frame = f.frame
    if l == r:
        return zero_density(frame)
    if f.rank < 1:
        raise CapabilityError(f"tangential derivative needs a C^1 density, got {f.smoothness}")

    curve = frame.curve
    rank = min(lowered_rank(f.rank), lowered_rank(smoothness_rank(curve.smoothness)))
    sign = 1.0 if (l, r) == (1, 2) else -1.0

    if f.derivative is not None:
        der = f.derivative
        return BoundaryDensity.from_function(
            frame,
            lambda t: sign * der(t) / curve.speed(t),
            smoothness_tag(rank),
            label=f"M{l}{r}[{f.label}]",
        )
    values = sign * spectral_param_derivative(f.values) / frame.speeds
    return BoundaryDensity(frame, values, smoothness_tag(rank), label=f"M{l}{r}[{f.label}]")


def tangential_derivative_from_extension(
    frame: BoundaryFrame,
    gradient_of_extension: Callable[[np.ndarray], np.ndarray],
    l: int,
    r: int,
) -> np.ndarray:
    """nu_l d_r f# - nu_r d_l f# at the nodes, for an explicit extension f#."""
    if l not in (1, 2) or r not in (1, 2):
        raise ValueError("axes must be 1 or 2")
    grad = np.asarray(gradient_of_extension(frame.points))
    nu = frame.normals
    return nu[:, l - 1] * grad[:, r - 1] - nu[:, r - 1] * grad[:, l - 1]


# --- point classification -------------------------------------------------


@dataclass(frozen=True)
class PointClass:
    kind: Literal["inside", "outside", "near_boundary"]
    distance: float
    inside: bool
    nearest_t: float


@lru_cache(maxsize=16)
def _dense_points(curve: BoundaryCurve, n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    dense = DENSE_FACTOR * n_nodes
    t = TWO_PI * np.arange(dense) / dense
    pts = curve.points(t)
    _readonly(t, pts)
    return t, pts


def _winding_numbers(polygon: np.ndarray, X: np.ndarray) -> np.ndarray:
    rel = polygon[None, :, :] - X[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    step = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    step = (step + math.pi) % TWO_PI - math.pi
    return np.rint(step.sum(axis=1) / TWO_PI)


def boundary_distances(
    frame: BoundaryFrame,
    X: np.ndarray,
    refine_within: float = np.inf,
) -> Tuple[np.ndarray, np.ndarray]:
    """Distance from each point to the exact curve and the parameter of the nearest point.

    Dense-sample distances are refined by bounded minimization for points
    whose dense distance is below refine_within.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    curve = frame.curve
    t_dense, pts = _dense_points(curve, frame.n)
    dist = cdist(X, pts)
    idx = np.argmin(dist, axis=1)
    best_t = t_dense[idx].copy()
    best_d = dist[np.arange(X.shape[0]), idx]
    half = TWO_PI / t_dense.size
    for i, x in enumerate(X):
        if best_d[i] < refine_within:
            res = minimize_scalar(
                lambda s: float(np.linalg.norm(curve.points(s)[0] - x)),
                bounds=(best_t[i] - half, best_t[i] + half),
                method="bounded",
                options={"xatol": 1e-14},
            )
            if res.fun < best_d[i]:
                best_d[i] = res.fun
                best_t[i] = float(res.x) % TWO_PI
    return best_d, best_t


def classify_points(frame: BoundaryFrame, X: np.ndarray, delta_near: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Vectorized classify_point: arrays "kind", "distance", "inside", "nearest_t"."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if delta_near is None:
        delta_near = 4.0 * frame.max_spacing
    distance, nearest_t = boundary_distances(frame, X)

    _, polygon = _dense_points(frame.curve, frame.n)
    inside = _winding_numbers(polygon, X) != 0

    # Close to the curve the polygon may misplace x; use the normal side instead.
    close = distance < 4.0 * TWO_PI * float(np.max(frame.speeds)) / (DENSE_FACTOR * frame.n)
    if np.any(close):
        foot = frame.curve.points(nearest_t[close])
        nu = frame.curve.normal(nearest_t[close])
        inside[close] = np.einsum("ij,ij->i", X[close] - foot, nu) < 0

    kind = np.where(distance < delta_near, "near_boundary", np.where(inside, "inside", "outside"))
    return {"kind": kind, "distance": distance, "inside": inside, "nearest_t": nearest_t}


def classify_point(frame: BoundaryFrame, x, delta_near: Optional[float] = None) -> PointClass:
    """inside | outside | near_boundary(distance) for a single point.

    delta_near defaults to 4 h, h the largest node spacing.
    """
    out = classify_points(frame, np.asarray(x, dtype=float).reshape(1, -1), delta_near)
    return PointClass(
        kind=str(out["kind"][0]),
        distance=float(out["distance"][0]),
        inside=bool(out["inside"][0]),
        nearest_t=float(out["nearest_t"][0]),
    )

"""Single and double layer potentials, their gradients and one-sided traces.

Side "+" is the bounded domain, side "-" its exterior. With the outward
normal nu the double layer is

    w[mu](x) = -int mu(y) (a2 nu(y)) . grad S(x - y) d sigma_y
               -int mu(y) (nu(y) . a1) S(x - y) d sigma_y,

so that w[1] = 1 inside and 0 outside for the Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import (
    BoundaryDensity,
    BoundaryFrame,
    CapabilityError,
    TWO_PI,
    classify_points,
    conormal_weight_density,
    make_curve,
    normal_density,
    reversed_frame,
    tangential_derivative,
    zero_density,
)
from .kernels import FundamentalSolution, SingularityError
from .operators import OperatorCoefficients
from .quadrature import (
    NodeKernel,
    PrecisionError,
    choose_upsample_factor,
    integrate_log_singular,
    principal_double_layer_diagonal,
    single_layer_log_split,
    upsampled_sums,
)
from .settings import DEFAULT_QUADRATURE, QuadratureSettings


FieldKind = Literal["single", "double", "gradient_single", "gradient_double"]
Method = Literal["direct", "reduced"]
Side = Literal["+", "-"]

RICHARDSON_DEPTH = 3


class TraceError(ArithmeticError):
    """Normal-offset extrapolation did not converge."""

    def __init__(self, message: str, diagnostics: Dict[str, object]):
        super().__init__(message)
        self.diagnostics = diagnostics


# --- node kernels -------------------------------------------------------------


def _differences(X: np.ndarray, fr: BoundaryFrame) -> np.ndarray:
    return X[:, None, :] - fr.points[None, :, :]


def single_layer_kernel(fs: FundamentalSolution) -> NodeKernel:
    def kernel(X, fr):
        return np.asarray(fs.value(_differences(X, fr)))

    return kernel


def double_layer_kernel(c: OperatorCoefficients, fs: FundamentalSolution) -> NodeKernel:
    def kernel(X, fr):
        diff = _differences(X, fr)
        conormal = fr.normals @ c.a2
        out = -np.einsum("mjk,jk->mj", fs.gradient(diff), conormal)
        if c.has_drift:
            out = out - (fr.normals @ c.a1)[None, :] * np.asarray(fs.value(diff))
        return out

    return kernel


def gradient_single_kernel(fs: FundamentalSolution) -> NodeKernel:
    def kernel(X, fr):
        return fs.gradient(_differences(X, fr))

    return kernel


def gradient_double_kernel(c: OperatorCoefficients, fs: FundamentalSolution) -> NodeKernel:
    """d/dx_j of the double-layer kernel, through the Hessian of S."""

    def kernel(X, fr):
        diff = _differences(X, fr)
        conormal = fr.normals @ c.a2
        out = -np.einsum("mjkl,jk->mjl", fs.hessian(diff), conormal)
        if c.has_drift:
            out = out - (fr.normals @ c.a1)[None, :, None] * fs.gradient(diff)
        return out

    return kernel


# --- routed evaluation ------------------------------------------------------------


def _as_points(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _layer_integral(
    frame: BoundaryFrame,
    density: BoundaryDensity,
    X: np.ndarray,
    kernel: NodeKernel,
    settings: QuadratureSettings,
) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoid for points away from the curve, upsampled trapezoid near it."""
    if density.frame is not frame and density.frame.n != frame.n:
        raise ValueError("density and frame disagree on the node count")
    delta_near = settings.near_factor * frame.max_spacing
    classes = classify_points(frame, X, delta_near)
    near = classes["kind"] == "near_boundary"

    distance = classes["distance"]
    if np.any(distance == 0.0):
        raise SingularityError("target lies on the boundary")

    factors = np.ones(X.shape[0], dtype=int)
    for i in np.nonzero(near)[0]:
        factors[i] = choose_upsample_factor(frame, float(distance[i]), settings)

    values: Optional[np.ndarray] = None
    estimates = np.zeros(X.shape[0])
    for factor in np.unique(factors):
        idx = np.nonzero(factors == factor)[0]
        part, err = upsampled_sums(frame, density, X[idx], kernel, int(factor))
        if values is None:
            values = np.zeros((X.shape[0],) + part.shape[1:], dtype=complex)
        values[idx] = part
        estimates[idx] = err

    d_min = settings.d_min_relative * frame.curve.diameter()
    too_close = distance < d_min
    if np.any(too_close):
        i = int(np.argmin(distance))
        raise PrecisionError(
            f"target at distance {distance[i]:.3e} is below d_min={d_min:.3e}; use a boundary trace",
            distance=float(distance[i]),
            estimate=float(estimates[i]),
        )
    return values, estimates


def _finish(values: np.ndarray, single: bool):
    if single:
        out = values[0]
        return complex(out) if np.ndim(out) == 0 else out
    return values


def _resolved(settings: Optional[QuadratureSettings]) -> QuadratureSettings:
    return DEFAULT_QUADRATURE if settings is None else settings


def single_layer_with_estimate(fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    values, est = _layer_integral(frame, mu, X, single_layer_kernel(fs), _resolved(settings))
    return _finish(values, single), (float(est[0]) if single else est)


def single_layer(
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """v[mu](x) = int S(x - y) mu(y) d sigma_y for x off the curve."""
    return single_layer_with_estimate(fs, frame, mu, x, settings)[0]


def double_layer_with_estimate(c, fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    values, est = _layer_integral(frame, mu, X, double_layer_kernel(c, fs), _resolved(settings))
    return _finish(values, single), (float(est[0]) if single else est)


def double_layer(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    return double_layer_with_estimate(c, fs, frame, mu, x, settings)[0]


def grad_single_layer_direct_with_estimate(fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    values, est = _layer_integral(frame, mu, X, gradient_single_kernel(fs), _resolved(settings))
    return _finish(values, single), (float(est[0]) if single else est)


def grad_single_layer_direct(
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """int grad S(x - y) mu(y) d sigma_y, componentwise."""
    return grad_single_layer_direct_with_estimate(fs, frame, mu, x, settings)[0]


def grad_double_layer_direct_with_estimate(c, fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    values, est = _layer_integral(frame, mu, X, gradient_double_kernel(c, fs), _resolved(settings))
    return _finish(values, single), (float(est[0]) if single else est)


def grad_double_layer_direct(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """Gradient of w[mu] by quadrature of the differentiated kernel; needs only a C^0 density."""
    return grad_double_layer_direct_with_estimate(c, fs, frame, mu, x, settings)[0]


def kernel_potential(
    kernel: NodeKernel,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """int k(x, y) mu(y) d sigma_y for an arbitrary node kernel, routed like the layer potentials."""
    X, single = _as_points(x)
    values, _ = _layer_integral(frame, mu, X, kernel, _resolved(settings))
    return _finish(values, single)


# --- reduction identities ------------------------------------------------------


def _require_c1(mu: BoundaryDensity) -> None:
    if mu.rank < 1:
        raise CapabilityError(f"reduction needs a C^1 density, got {mu.smoothness}")


def single_layer_reduction_densities(
    c: OperatorCoefficients,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
) -> Tuple[List[BoundaryDensity], List[BoundaryDensity]]:
    """Densities (d_j, e_j) with d_j v[mu] = v[d_j] - w[e_j].

    d_j = sum_r M_rj[(a2 nu)_r mu / q] - (a1 . nu) nu_j mu / q and
    e_j = nu_j mu / q, where q = nu^t a2 nu.
    """
    _require_c1(mu)
    q_inv = conormal_weight_density(frame, c.a2).reciprocal()
    nu = [normal_density(frame, 1), normal_density(frame, 2)]
    a2 = c.a2

    weighted = [(nu[0] * float(a2[r, 0]) + nu[1] * float(a2[r, 1])) * mu * q_inv for r in range(2)]
    drift = (nu[0] * c.a1[0] + nu[1] * c.a1[1]) if c.has_drift else None

    d, e = [], []
    for j in (1, 2):
        e_j = nu[j - 1] * mu * q_inv
        d_j = tangential_derivative(weighted[0], 1, j) + tangential_derivative(weighted[1], 2, j)
        if drift is not None:
            d_j = d_j - drift * e_j
        d.append(d_j)
        e.append(e_j)
    return d, e


def grad_single_layer_reduced_with_estimate(c, fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    settings = _resolved(settings)
    d, e = single_layer_reduction_densities(c, frame, mu)
    out = np.zeros((X.shape[0], 2), dtype=complex)
    est = np.zeros(X.shape[0])
    for j in range(2):
        v, ev = _layer_integral(frame, d[j], X, single_layer_kernel(fs), settings)
        w, ew = _layer_integral(frame, e[j], X, double_layer_kernel(c, fs), settings)
        out[:, j] = v - w
        est = np.maximum(est, ev + ew)
    return _finish(out, single), (float(est[0]) if single else est)


def grad_single_layer_reduced(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """Gradient of v[mu] through tangential derivatives of the density."""
    return grad_single_layer_reduced_with_estimate(c, fs, frame, mu, x, settings)[0]


def _double_layer_gradient_terms(c, frame, mu, evaluate):
    """Assemble d_j w[mu] from single-layer quantities.

    ``evaluate(kind, density)`` returns the gradient ("grad") or value ("value")
    of v[density] together with its error estimate.
    """
    _require_c1(mu)
    tau = tangential_derivative(mu, 1, 2)

    grad_tau, est = evaluate("grad", tau)
    weighted = grad_tau @ c.a2
    out = np.stack([weighted[:, 1], -weighted[:, 0]], axis=1).astype(complex)

    has_a0 = c.a0 != 0
    if c.has_drift or has_a0:
        nu = [normal_density(frame, 1), normal_density(frame, 2)]
        for j in range(2):
            nu_mu = nu[j] * mu
            if c.has_drift:
                g, e1 = evaluate("grad", nu_mu)
                out[:, j] += g @ c.a1
                est = est + e1
            if has_a0:
                v, e2 = evaluate("value", nu_mu)
                out[:, j] += c.a0 * v
                est = est + e2
        if c.has_drift:
            g, e3 = evaluate("grad", (nu[0] * c.a1[0] + nu[1] * c.a1[1]) * mu)
            out -= g
            est = est + e3
    return out, est


def grad_double_layer_reduced_with_estimate(c, fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    settings = _resolved(settings)

    def evaluate(kind, density):
        kernel = gradient_single_kernel(fs) if kind == "grad" else single_layer_kernel(fs)
        return _layer_integral(frame, density, X, kernel, settings)

    out, est = _double_layer_gradient_terms(c, frame, mu, evaluate)
    return _finish(out, single), (float(est[0]) if single else est)


def grad_double_layer_reduced(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """Gradient of w[mu] from single-layer gradients of M_js[mu], nu_j mu and (nu . a1) mu."""
    return grad_double_layer_reduced_with_estimate(c, fs, frame, mu, x, settings)[0]


def second_derivatives_reduced_with_estimate(c, fs, frame, mu, x, settings=None):
    X, single = _as_points(x)
    settings = _resolved(settings)
    d, e = single_layer_reduction_densities(c, frame, mu)
    H = np.zeros((X.shape[0], 2, 2), dtype=complex)
    est = np.zeros(X.shape[0])
    for j in range(2):
        gv, ev = grad_single_layer_direct_with_estimate(fs, frame, d[j], X, settings)
        gw, ew = grad_double_layer_reduced_with_estimate(c, fs, frame, e[j], X, settings)
        H[:, :, j] = gv - gw
        est = np.maximum(est, ev + ew)
    return _finish(H, single), (float(est[0]) if single else est)


def second_derivatives_reduced(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    x,
    settings: Optional[QuadratureSettings] = None,
):
    """Hessian of v[mu]: H[k, j] = d_k v[d_j] - d_k w[e_j] with (d_j, e_j) from the reduction."""
    return second_derivatives_reduced_with_estimate(c, fs, frame, mu, x, settings)[0]


# --- fields and traces ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LayerPotentialField:
    kind: FieldKind
    coefficients: OperatorCoefficients
    fundamental: FundamentalSolution
    frame: BoundaryFrame
    density: BoundaryDensity
    method: Method = "direct"
    settings: QuadratureSettings = field(default=DEFAULT_QUADRATURE, repr=False)

    def __post_init__(self):
        if self.method == "reduced" and self.kind not in ("gradient_single", "gradient_double"):
            raise ValueError(f"{self.kind} potentials have no reduced form")

    def evaluate_with_estimate(self, x):
        c, fs, frame, mu = self.coefficients, self.fundamental, self.frame, self.density
        if self.kind == "single":
            return single_layer_with_estimate(fs, frame, mu, x, self.settings)
        if self.kind == "double":
            return double_layer_with_estimate(c, fs, frame, mu, x, self.settings)
        if self.kind == "gradient_single":
            if self.method == "reduced":
                return grad_single_layer_reduced_with_estimate(c, fs, frame, mu, x, self.settings)
            return grad_single_layer_direct_with_estimate(fs, frame, mu, x, self.settings)
        if self.method == "reduced":
            return grad_double_layer_reduced_with_estimate(c, fs, frame, mu, x, self.settings)
        return grad_double_layer_direct_with_estimate(c, fs, frame, mu, x, self.settings)

    def __call__(self, x):
        return self.evaluate_with_estimate(x)[0]


@dataclass(frozen=True)
class TraceEstimate:
    value: Union[complex, np.ndarray]
    error: float
    order: Optional[float]
    node: int
    side: Side
    steps: Tuple[float, ...]


def trace_offsets(frame: BoundaryFrame, levels: int) -> np.ndarray:
    """h_j = h0 / 2^j with h0 = 10 (2 pi / N) max |gamma'|."""
    h0 = 10.0 * (TWO_PI / frame.n) * float(np.max(frame.speeds))
    return h0 / 2.0 ** np.arange(levels + 1)


def _richardson(samples: np.ndarray) -> Tuple[np.ndarray, float, Tuple[int, int]]:
    """Tableau for an expansion in powers of h with h halved per row."""
    levels = samples.shape[0]
    depth = min(RICHARDSON_DEPTH, levels - 1)
    table = [[samples[j]] for j in range(levels)]
    for j in range(1, levels):
        for k in range(1, min(j, depth) + 1):
            prev, above = table[j][k - 1], table[j - 1][k - 1]
            table[j].append(prev + (prev - above) / (2.0**k - 1.0))

    best, error = (0, 0), math.inf
    for j in range(1, levels):
        for k in range(0, min(j - 1, depth) + 1):
            if k >= len(table[j - 1]):
                continue
            diff = float(np.max(np.abs(np.atleast_1d(table[j][k] - table[j - 1][k]))))
            if diff < error:
                best, error = (j, k), diff
    return table[best[0]][best[1]], error, best


def _observed_order(samples: np.ndarray) -> Optional[float]:
    diffs = [float(np.max(np.abs(np.atleast_1d(samples[j] - samples[j - 1])))) for j in range(1, samples.shape[0])]
    ratios = [diffs[j - 1] / diffs[j] for j in range(1, len(diffs)) if diffs[j] > 0 and diffs[j - 1] > 0]
    if not ratios:
        return None
    return float(np.median(np.log2(ratios)))


def boundary_trace(field: LayerPotentialField, i: int, side: Side) -> TraceEstimate:
    """One-sided limit at node i from field values at gamma(t_i) -/+ h nu(t_i)."""
    if side not in ("+", "-"):
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    frame = field.frame
    settings = field.settings
    steps = trace_offsets(frame, settings.trace_levels)
    direction = -1.0 if side == "+" else 1.0
    points = frame.points[i][None, :] + direction * steps[:, None] * frame.normals[i][None, :]

    samples = np.asarray(field(points))
    value, error, best = _richardson(samples)
    order = _observed_order(samples)
    scale = max(1.0, float(np.max(np.abs(np.atleast_1d(value)))))
    if not np.isfinite(error) or error > settings.trace_tolerance * scale:
        raise TraceError(
            f"trace at node {i} ({side}) did not converge: error {error:.3e}",
            diagnostics={
                "node": i,
                "side": side,
                "error": error,
                "order": order,
                "best": best,
                "steps": steps.tolist(),
            },
        )
    out = complex(value) if np.ndim(value) == 0 else np.asarray(value)
    return TraceEstimate(value=out, error=error, order=order, node=i, side=side, steps=tuple(steps.tolist()))


@dataclass(frozen=True)
class JumpProfile:
    nodes: Tuple[int, ...]
    interior: np.ndarray = field(repr=False)
    exterior: np.ndarray = field(repr=False)
    ratio: np.ndarray = field(repr=False)
    constant: complex


def jump_profile(field: LayerPotentialField, nodes: Sequence[int], min_density: float = 1e-3) -> JumpProfile:
    """(trace- - trace+) / mu per node; the family constant is the median over usable nodes."""
    if field.kind not in ("single", "double"):
        raise ValueError("jump profiles are defined for scalar potentials")
    nodes = tuple(int(i) for i in nodes)
    plus = np.array([boundary_trace(field, i, "+").value for i in nodes], dtype=complex)
    minus = np.array([boundary_trace(field, i, "-").value for i in nodes], dtype=complex)
    mu = field.density.values[list(nodes)]
    ratio = np.full(len(nodes), np.nan, dtype=complex)
    usable = np.abs(mu) > min_density
    ratio[usable] = (minus[usable] - plus[usable]) / mu[usable]
    if np.any(usable):
        constant = complex(np.median(ratio[usable].real), np.median(ratio[usable].imag))
    else:
        constant = complex(np.nan, np.nan)
    return JumpProfile(nodes=nodes, interior=plus, exterior=minus, ratio=ratio, constant=constant)


def grad_double_layer_boundary_form(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    i: int,
    side: Side,
    settings: Optional[QuadratureSettings] = None,
) -> np.ndarray:
    """One-sided gradient of w[mu] at node i, from one-sided traces of single-layer fields."""
    settings = _resolved(settings)

    def evaluate(kind, density):
        field_kind = "gradient_single" if kind == "grad" else "single"
        trace = boundary_trace(LayerPotentialField(field_kind, c, fs, frame, density, settings=settings), i, side)
        value = np.asarray(trace.value)[None, ...]
        return value, np.array([trace.error])

    out, _ = _double_layer_gradient_terms(c, frame, mu, evaluate)
    return out[0]


# --- boundary values -------------------------------------------------------------


def boundary_single_layer(fs: FundamentalSolution, frame: BoundaryFrame, mu: BoundaryDensity, i: Optional[int] = None):
    """v[mu] at node i (all nodes when i is None) by the log-product rule."""
    if i is None:
        return np.array([integrate_log_singular(frame, single_layer_log_split(fs, frame, mu, k)) for k in range(frame.n)])
    return integrate_log_singular(frame, single_layer_log_split(fs, frame, mu, i))


def boundary_double_layer(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    i: Optional[int] = None,
):
    """Direct value of w[mu] at node i: trapezoid with the kernel's diagonal limit filled in."""
    diagonal = principal_double_layer_diagonal(c, fs, frame)
    kernel = double_layer_kernel(c, fs)
    w = frame.weights * mu.values
    nodes = range(frame.n) if i is None else [i]

    out = []
    for k in nodes:
        others = np.arange(frame.n) != k
        row = np.empty(frame.n, dtype=complex)
        sub = _subframe(frame, others)
        row[others] = kernel(frame.points[k][None, :], sub)[0]
        row[k] = diagonal[k]
        out.append(complex(np.sum(row * w)))
    return np.array(out) if i is None else out[0]


@dataclass(frozen=True)
class _NodeSubset:
    points: np.ndarray
    normals: np.ndarray


def _subframe(frame: BoundaryFrame, mask: np.ndarray) -> _NodeSubset:
    return _NodeSubset(points=frame.points[mask], normals=frame.normals[mask])


# --- exterior reduction ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PaddedDensity:
    """Density on the two boundary components of B(0, r) minus the closed domain.

    The inner component is the curve traversed clockwise (annulus normal -nu);
    the outer circle carries the zero density.
    """

    source: BoundaryDensity
    radius: float
    inner: BoundaryDensity = field(init=False, repr=False)
    outer: BoundaryDensity = field(init=False, repr=False)

    def __post_init__(self):
        frame = self.source.frame
        if not frame.curve.max_radius() < self.radius:
            raise ValueError(f"closed domain is not contained in B(0, {self.radius})")
        inner_frame = reversed_frame(frame)
        _, outer_frame = make_curve("ellipse", max(frame.n, 64), a=self.radius, b=self.radius)
        object.__setattr__(self, "inner", self.source.reversed(inner_frame))
        object.__setattr__(self, "outer", zero_density(outer_frame))

    def components(self) -> Tuple[BoundaryDensity, BoundaryDensity]:
        return self.inner, self.outer


def exterior_reduction_check(
    c: OperatorCoefficients,
    fs: FundamentalSolution,
    frame: BoundaryFrame,
    mu: BoundaryDensity,
    r: float,
    X: np.ndarray,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """max |w_Omega(x) + w_annulus(x)| over annulus points x."""
    settings = _resolved(settings)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    padded = PaddedDensity(mu, r)

    if np.any(np.linalg.norm(X, axis=1) >= r):
        raise ValueError("reduction points must lie inside B(0, r)")
    if np.any(classify_points(frame, X, 0.0)["inside"]):
        raise ValueError("reduction points must lie outside the closed domain")

    direct = double_layer(c, fs, frame, mu, X, settings)
    annulus = np.zeros(X.shape[0], dtype=complex)
    for part in padded.components():
        annulus = annulus + double_layer(c, fs, part.frame, part, X, settings)
    return float(np.max(np.abs(direct + annulus)))

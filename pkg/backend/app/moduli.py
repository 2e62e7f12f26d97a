"""Moduli of continuity and empirical Hölder seminorms on sampled functions.

Seminorms are exact maxima over every sampled pair; the pair scan runs in
row blocks so memory stays bounded for a few thousand points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Callable, Dict, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist


R1 = math.exp(-1.0)

# Diagnostic only: omega at the smallest grid point must fall below this.
LIMIT0_TOLERANCE = 1e-8

PAIR_BLOCK = 256

ModulusKind = Literal["power", "omega1", "custom"]
DomainTag = Literal["boundary", "closed-region"]

ArrayLike = Union[float, Sequence[float], np.ndarray]


class ModulusDomainError(ValueError):
    """Raised when a modulus is evaluated outside [0, inf) or built from bad parameters."""


def omega1_eval(r: ArrayLike) -> Union[float, np.ndarray]:
    """r |ln r| on (0, 1/e], the constant 1/e beyond it, 0 at the origin."""
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ModulusDomainError("omega1 is defined on [0, inf) only")

    out = np.full(arr.shape, R1)
    out[arr == 0] = 0.0
    mid = (arr > 0) & (arr <= R1)
    out[mid] = arr[mid] * np.abs(np.log(arr[mid]))

    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ModulusFunction:
    kind: ModulusKind
    alpha: Optional[float] = None
    table_r: Optional[Tuple[float, ...]] = None
    table_w: Optional[Tuple[float, ...]] = None
    label: str = ""

    @classmethod
    def power(cls, alpha: float) -> "ModulusFunction":
        if not (0 < alpha <= 1):
            raise ModulusDomainError(f"power modulus needs alpha in ]0, 1], got {alpha}")
        label = "lipschitz" if alpha == 1 else f"power:{alpha:g}"
        return cls(kind="power", alpha=float(alpha), label=label)

    @classmethod
    def omega1(cls) -> "ModulusFunction":
        return cls(kind="omega1", label="omega1")

    @classmethod
    def tabulated(cls, r: Sequence[float], w: Sequence[float], label: str = "custom") -> "ModulusFunction":
        """Monotone piecewise-linear modulus through the given table.

        (0, 0) is prepended when the table starts above the origin; the last
        value is held constant beyond the table.
        """
        r_arr = np.asarray(r, dtype=float)
        w_arr = np.asarray(w, dtype=float)
        if r_arr.ndim != 1 or r_arr.shape != w_arr.shape or r_arr.size == 0:
            raise ModulusDomainError("table needs two 1-D arrays of equal nonzero length")
        if np.any(np.diff(r_arr) <= 0) or r_arr[0] < 0:
            raise ModulusDomainError("table abscissae must be nonnegative and strictly increasing")
        if np.any(np.diff(w_arr) < 0) or np.any(w_arr < 0):
            raise ModulusDomainError("table values must be nonnegative and nondecreasing")
        if r_arr[0] > 0:
            r_arr = np.concatenate([[0.0], r_arr])
            w_arr = np.concatenate([[0.0], w_arr])
        return cls(
            kind="custom",
            table_r=tuple(float(v) for v in r_arr),
            table_w=tuple(float(v) for v in w_arr),
            label=label,
        )

    @classmethod
    def parse(cls, text: str) -> "ModulusFunction":
        """Parse "omega1", "lipschitz" or "power:<alpha>"."""
        value = text.strip().lower()
        if value == "omega1":
            return cls.omega1()
        if value == "lipschitz":
            return cls.power(1.0)
        if value.startswith("power:"):
            try:
                alpha = float(value.split(":", 1)[1])
            except ValueError as e:
                raise ModulusDomainError(f"bad power modulus: {text!r}") from e
            return cls.power(alpha)
        raise ModulusDomainError(f"unknown modulus: {text!r}")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def __call__(self, r: ArrayLike) -> Union[float, np.ndarray]:
        arr = np.asarray(r, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ModulusDomainError("moduli are defined on [0, inf) only")

        if self.kind == "omega1":
            return omega1_eval(arr)
        if self.kind == "power":
            out = np.power(arr, self.alpha)
        else:
            out = np.interp(arr, self.table_r, self.table_w)

        if np.ndim(out) == 0:
            return float(out)
        return out


# --- axioms -----------------------------------------------------------------


@dataclass(frozen=True)
class ModulusAxiomReport:
    monotone: bool
    limit0: bool
    positive: bool
    homogeneity_sup: float


def check_modulus_axioms(
    omega: ModulusFunction,
    grid: Sequence[float],
    scale_grid: Sequence[float],
) -> ModulusAxiomReport:
    """Check monotonicity, the limit at 0 and sup omega(a t) / (a omega(t)) on sampled grids."""
    t = np.asarray(grid, dtype=float)
    a = np.asarray(scale_grid, dtype=float)
    if t.size == 0 or a.size == 0:
        raise ValueError("grids must be nonempty")
    if np.any(t <= 0) or np.any(np.diff(t) < 0):
        raise ValueError("grid must be positive and sorted")
    if np.any(a < 1) or np.any(np.diff(a) < 0):
        raise ValueError("scale grid must be sorted with entries >= 1")

    values = np.asarray(omega(t), dtype=float)
    scaled = np.asarray(omega(np.outer(a, t)), dtype=float)
    ratio = scaled / (a[:, None] * values[None, :])

    return ModulusAxiomReport(
        monotone=bool(np.all(np.diff(values) >= 0)),
        limit0=bool(values[0] < LIMIT0_TOLERANCE),
        positive=bool(np.all(values > 0)),
        homogeneity_sup=float(np.max(ratio)),
    )


def midpoint_concavity_defect(omega: ModulusFunction, grid: Sequence[float]) -> float:
    """max over grid pairs of (omega(x) + omega(y)) / 2 - omega((x + y) / 2); <= 0 when concave."""
    x = np.asarray(grid, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two grid points")
    w = np.asarray(omega(x), dtype=float)
    mean_of_values = 0.5 * (w[:, None] + w[None, :])
    value_at_mean = np.asarray(omega(0.5 * (x[:, None] + x[None, :])), dtype=float)
    return float(np.max(mean_of_values - value_at_mean))


# --- sampled functions ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values (scalar or vector) on a finite set of distinct points in R^2 or R^3."""

    points: np.ndarray
    values: np.ndarray
    domain: DomainTag = "closed-region"

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        values = np.array(self.values, dtype=complex)
        if points.ndim != 2 or points.shape[1] not in (2, 3):
            raise ValueError("points must have shape (N, 2) or (N, 3)")
        if values.ndim not in (1, 2) or values.shape[0] != points.shape[0]:
            raise ValueError("need exactly one value per point")
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(values)):
            raise ValueError("points and values must be finite")
        if np.unique(points, axis=0).shape[0] != points.shape[0]:
            raise ValueError("sample points must be pairwise distinct")
        points.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])

    def vector_values(self) -> np.ndarray:
        """Values as an (N, k) array."""
        if self.values.ndim == 1:
            return self.values[:, None]
        return self.values

    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.vector_values(), axis=1)

    def sup_norm(self) -> float:
        return float(np.max(self.magnitudes())) if self.size else 0.0

    def component(self, k: int) -> "SampledFunction":
        return SampledFunction(self.points, self.vector_values()[:, k], self.domain)

    def to_csv(self, path: Union[str, Path]) -> Path:
        if self.values.ndim != 1:
            raise ValueError("CSV export supports scalar values only")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        coords = [f"x{i + 1}" for i in range(self.dimension)]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(coords + ["re", "im"])
            for p, v in zip(self.points, self.values):
                writer.writerow([repr(float(c)) for c in p] + [repr(float(v.real)), repr(float(v.imag))])
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], domain: DomainTag = "closed-region") -> "SampledFunction":
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            header = reader.fieldnames or []
        coords = [c for c in ("x1", "x2", "x3") if c in header]
        if len(coords) < 2 or "re" not in header or "im" not in header:
            raise ValueError(f"unexpected CSV columns: {header}")
        points = np.array([[float(r[c]) for c in coords] for r in rows], dtype=float).reshape(-1, len(coords))
        values = np.array([complex(float(r["re"]), float(r["im"])) for r in rows], dtype=complex)
        return cls(points, values, domain)


@dataclass(frozen=True)
class HolderEstimate:
    seminorm: float
    sup_norm: float
    pair: Tuple[int, int]
    modulus: ModulusFunction = field(repr=False)

    @property
    def norm(self) -> float:
        return self.sup_norm + self.seminorm

    def to_record(self) -> Dict[str, object]:
        return {
            "seminorm": self.seminorm,
            "sup_norm": self.sup_norm,
            "pair": [int(self.pair[0]), int(self.pair[1])],
            "modulus": self.modulus.name,
        }


def _pair_scan(
    f: SampledFunction,
    weight: Callable[[np.ndarray], np.ndarray],
    min_separation: float = 0.0,
) -> Tuple[float, Tuple[int, int], bool]:
    """max over pairs i < j with |x_i - x_j| >= min_separation of |f_i - f_j| / weight(|x_i - x_j|)."""
    pts = f.points
    vals = f.vector_values()
    n = f.size

    best = -1.0
    best_pair = (0, 1)
    found = False
    cols = np.arange(n)
    for start in range(0, n, PAIR_BLOCK):
        stop = min(n, start + PAIR_BLOCK)
        rows = np.arange(start, stop)
        dist = cdist(pts[start:stop], pts)
        mask = (cols[None, :] > rows[:, None]) & (dist > 0) & (dist >= min_separation)
        if not np.any(mask):
            continue
        found = True
        diff = np.linalg.norm(vals[start:stop, None, :] - vals[None, :, :], axis=2)
        w = np.asarray(weight(np.where(mask, dist, 1.0)), dtype=float)
        ratio = np.zeros_like(dist)
        np.divide(diff, w, out=ratio, where=mask & (w > 0))
        ratio[~mask] = -1.0
        idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        if ratio[idx] > best:
            best = float(ratio[idx])
            best_pair = (int(rows[idx[0]]), int(idx[1]))
    return max(best, 0.0), best_pair, found


def holder_seminorm(f: SampledFunction, omega: ModulusFunction) -> HolderEstimate:
    """Exact max of |f(x) - f(y)| / omega(|x - y|) over all sampled pairs."""
    if f.size < 2:
        raise ValueError("holder_seminorm needs at least two points")
    seminorm, pair, _ = _pair_scan(f, omega)
    return HolderEstimate(seminorm=seminorm, sup_norm=f.sup_norm(), pair=pair, modulus=omega)


@dataclass(frozen=True)
class FarPairReport:
    lhs: float
    rhs: float
    holds: bool


def far_pair_check(f: SampledFunction, a: float, omega: ModulusFunction) -> FarPairReport:
    """Compare the far-pair quotient sup with (2 / omega(a)) sup |f|."""
    if a <= 0:
        raise ValueError("separation a must be positive")
    lhs, _, found = _pair_scan(f, omega, min_separation=a)
    if not found:
        raise ValueError(f"no sampled pair with separation >= {a}")
    rhs = 2.0 / float(omega(a)) * f.sup_norm()
    return FarPairReport(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs * (1 + 1e-12)))


def discrete_c1_omega_norm(
    field: SampledFunction,
    gradient_samples: SampledFunction,
    omega: ModulusFunction,
) -> float:
    """sup|f| + sup|grad f| + sum over components of the omega-seminorm of grad f."""
    if field.size != gradient_samples.size or not np.array_equal(field.points, gradient_samples.points):
        raise ValueError("field and gradient samples must live on the same grid")
    grad = gradient_samples.vector_values()
    if grad.shape[1] != field.dimension:
        raise ValueError("gradient samples need one component per coordinate")

    total = field.sup_norm() + gradient_samples.sup_norm()
    for k in range(grad.shape[1]):
        total += holder_seminorm(gradient_samples.component(k), omega).seminorm
    return float(total)


@dataclass(frozen=True)
class EmbeddingChainReport:
    lipschitz: float
    omega1: float
    power: float
    theta: float
    omega1_bound: float
    power_bound: float
    holds: bool


def embedding_chain(f: SampledFunction, theta: float = 0.9) -> EmbeddingChainReport:
    """Lipschitz, omega1 and r^theta seminorms with the bounds the embeddings imply.

    With L the Lipschitz seminorm, every omega-quotient is at most
    L * max over sampled separations of r / omega(r).
    """
    if f.size < 2:
        raise ValueError("embedding_chain needs at least two points")
    lip = ModulusFunction.power(1.0)
    w1 = ModulusFunction.omega1()
    pw = ModulusFunction.power(theta)

    lipschitz = holder_seminorm(f, lip).seminorm
    omega1 = holder_seminorm(f, w1).seminorm
    power = holder_seminorm(f, pw).seminorm

    dist = cdist(f.points, f.points)
    sep = dist[dist > 0]
    omega1_bound = lipschitz * float(np.max(sep / omega1_eval(sep)))
    power_bound = lipschitz * float(np.max(sep ** (1.0 - theta)))

    slack = 1 + 1e-12
    return EmbeddingChainReport(
        lipschitz=lipschitz,
        omega1=omega1,
        power=power,
        theta=theta,
        omega1_bound=omega1_bound,
        power_bound=power_bound,
        holds=bool(omega1 <= omega1_bound * slack and power <= power_bound * slack),
    )

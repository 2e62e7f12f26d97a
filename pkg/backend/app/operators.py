"""Constant-coefficient second-order operators P[a, D] and the conormal operator B*."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import BoundaryDensity, BoundaryFrame


MIN_SPHERE_SAMPLES = 64
DEFAULT_SPHERE_SAMPLES = 1024
FACTORIZATION_TOLERANCE = 1e-12


class EllipticityError(ValueError):
    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class FactorizationError(ValueError):
    pass


def _complex_pair(value: Any) -> complex:
    """[re, im] pairs or plain numbers, as used in JSON configs."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex values are [re, im] pairs, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


@dataclass(frozen=True, eq=False)
class OperatorCoefficients:
    """a2 real symmetric (n x n), a1 complex (n,), a0 complex; n in {2, 3}."""

    a2: np.ndarray
    a1: np.ndarray
    a0: complex = 0j

    def __post_init__(self):
        a2 = np.array(self.a2, dtype=complex)
        if np.any(a2.imag != 0):
            raise ValueError("second-order coefficients must be real")
        a2 = a2.real.astype(float)
        if a2.ndim != 2 or a2.shape[0] != a2.shape[1] or a2.shape[0] not in (2, 3):
            raise ValueError("a2 must be a 2x2 or 3x3 matrix")
        if not np.all(np.isfinite(a2)):
            raise ValueError("a2 must be finite")
        if not np.array_equal(a2, a2.T):
            raise ValueError("a2 must be exactly symmetric; use from_matrix to symmetrize")
        a1 = np.array(self.a1, dtype=complex).reshape(-1)
        if a1.shape != (a2.shape[0],):
            raise ValueError("a1 needs one entry per dimension")
        a2.setflags(write=False)
        a1.setflags(write=False)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a0", complex(self.a0))

    @property
    def n(self) -> int:
        return int(self.a2.shape[0])

    @property
    def has_drift(self) -> bool:
        return bool(np.any(self.a1 != 0))

    @classmethod
    def laplace(cls, n: int = 2) -> "OperatorCoefficients":
        return cls(np.eye(n), np.zeros(n), 0.0)

    @classmethod
    def yukawa(cls, k: float, n: int = 2) -> "OperatorCoefficients":
        """Delta - k^2."""
        if k <= 0:
            raise ValueError("yukawa needs k > 0")
        return cls(np.eye(n), np.zeros(n), -float(k) ** 2)

    @classmethod
    def helmholtz(cls, k: float, n: int = 2) -> "OperatorCoefficients":
        """Delta + k^2."""
        if k <= 0:
            raise ValueError("helmholtz needs k > 0")
        return cls(np.eye(n), np.zeros(n), float(k) ** 2)

    @classmethod
    def anisotropic(cls, a2: Sequence[Sequence[float]]) -> "OperatorCoefficients":
        a2 = np.asarray(a2, dtype=float)
        return cls(a2, np.zeros(a2.shape[0]), 0.0)

    @classmethod
    def from_matrix(
        cls,
        matrix: Sequence[Sequence[float]],
        a1: Optional[Sequence[complex]] = None,
        a0: complex = 0j,
    ) -> "OperatorCoefficients":
        """Keep only the symmetric part of a second-order coefficient matrix."""
        m = np.asarray(matrix, dtype=float)
        sym = 0.5 * (m + m.T)
        return cls(sym, np.zeros(m.shape[0]) if a1 is None else a1, a0)

    @classmethod
    def from_multi_index(cls, coefficients: Mapping[Tuple[int, ...], complex]) -> "OperatorCoefficients":
        """Build from {gamma: a_gamma}, |gamma| <= 2.

        a_lj = a_{e_l + e_j} / 2 for l != j and a_jj = a_{2 e_j}.
        """
        if not coefficients:
            raise ValueError("empty coefficient mapping")
        n = len(next(iter(coefficients)))
        a2 = np.zeros((n, n), dtype=complex)
        a1 = np.zeros(n, dtype=complex)
        a0 = 0j
        for gamma, value in coefficients.items():
            gamma = tuple(int(g) for g in gamma)
            if len(gamma) != n or any(g < 0 for g in gamma):
                raise ValueError(f"bad multi-index {gamma}")
            order = sum(gamma)
            if order == 0:
                a0 += complex(value)
            elif order == 1:
                a1[gamma.index(1)] += complex(value)
            elif order == 2:
                support = [j for j, g in enumerate(gamma) for _ in range(g)]
                l, j = support
                if l == j:
                    a2[l, l] += complex(value)
                else:
                    a2[l, j] += complex(value) / 2
                    a2[j, l] += complex(value) / 2
            else:
                raise ValueError(f"order {order} exceeds 2 for multi-index {gamma}")
        return cls(a2, a1, a0)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "OperatorCoefficients":
        """{"a2": [[...]], "a1": [[re, im], ...], "a0": [re, im]}."""
        a2 = np.asarray(data["a2"], dtype=float)
        n = a2.shape[0]
        a1_raw = data.get("a1")
        a1 = np.zeros(n, dtype=complex) if a1_raw is None else np.array([_complex_pair(v) for v in a1_raw])
        a0 = _complex_pair(data.get("a0", 0.0))
        return cls(a2, a1, a0)

    def to_json(self) -> Dict[str, Any]:
        return {
            "a2": self.a2.tolist(),
            "a1": [[float(v.real), float(v.imag)] for v in self.a1],
            "a0": [float(self.a0.real), float(self.a0.imag)],
        }


def _sphere_samples(n: int, count: int) -> np.ndarray:
    if n == 2:
        theta = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # Fibonacci points on the unit sphere.
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    rho = np.sqrt(1.0 - z**2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def ellipticity_margin(c: OperatorCoefficients, samples: int = DEFAULT_SPHERE_SAMPLES) -> float:
    """min over unit xi of xi^T a2 xi.

    The sampled minimum is cross-checked against the smallest eigenvalue,
    which is returned.
    """
    if samples < MIN_SPHERE_SAMPLES:
        raise ValueError(f"need at least {MIN_SPHERE_SAMPLES} sphere samples, got {samples}")
    xi = _sphere_samples(c.n, samples)
    sampled = float(np.min(np.einsum("ij,jk,ik->i", xi, c.a2, xi)))
    exact = float(np.min(np.linalg.eigvalsh(c.a2)))

    scale = max(1.0, float(np.max(np.abs(c.a2))))
    if sampled < exact - 1e-12 * scale or sampled - exact > 1e-2 * scale:
        print(f"[warn] ellipticity sampling disagrees with eigenvalues: sampled={sampled:.6e} exact={exact:.6e}")

    margin = min(exact, sampled)
    if margin <= 0:
        raise EllipticityError(f"operator is not elliptic (margin {margin:.3e})", margin=margin)
    return exact


@dataclass(frozen=True)
class Factorization:
    T: np.ndarray
    det_a2: float
    T_inv: np.ndarray
    a2_inv: np.ndarray

    @property
    def sqrt_det(self) -> float:
        return math.sqrt(self.det_a2)


def factorize(c: OperatorCoefficients) -> Factorization:
    """Lower-triangular T with a2 = T T^t."""
    try:
        T = np.linalg.cholesky(c.a2)
    except np.linalg.LinAlgError as e:
        raise FactorizationError(f"a2 is not positive definite: {e}") from e

    norm = float(np.linalg.norm(c.a2))
    if np.linalg.norm(T @ T.T - c.a2) > FACTORIZATION_TOLERANCE * norm:
        raise FactorizationError("factorization does not reproduce a2")
    det = float(np.prod(np.diag(T)) ** 2)
    if det <= 0:
        raise FactorizationError("a2 has nonpositive determinant")
    T_inv = np.linalg.inv(T)
    return Factorization(T=T, det_a2=det, T_inv=T_inv, a2_inv=T_inv.T @ T_inv)


# --- P[a, D] and B* ---------------------------------------------------------


@dataclass(frozen=True)
class DerivativeJet:
    """value (...,), gradient (..., n), hessian (..., n, n)."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None


def apply_P(c: OperatorCoefficients, jet: DerivativeJet) -> Union[complex, np.ndarray]:
    """sum a_lj d_l d_j u + sum a_l d_l u + a u."""
    if jet.hessian is None:
        raise ValueError("apply_P needs second derivatives")
    H = np.asarray(jet.hessian)
    g = np.asarray(jet.gradient)
    u = np.asarray(jet.value)
    out = np.einsum("lj,...lj->...", c.a2, H) + g @ c.a1 + c.a0 * u
    if np.ndim(out) == 0:
        return complex(out)
    return out


def P_term_scale(c: OperatorCoefficients, jet: DerivativeJet) -> np.ndarray:
    """Magnitude of the terms P[a, D] sums: sum|a_lj||H_lj| + sum|a_l||g_l| + |a||u|."""
    H = np.abs(np.asarray(jet.hessian))
    g = np.abs(np.asarray(jet.gradient))
    u = np.abs(np.asarray(jet.value))
    return np.einsum("lj,...lj->...", np.abs(c.a2), H) + g @ np.abs(c.a1) + abs(c.a0) * u


def conormal_B_star(
    c: OperatorCoefficients,
    frame: BoundaryFrame,
    v: np.ndarray,
    grad: np.ndarray,
) -> BoundaryDensity:
    """sum conj(a_jl) nu_l d_j v - sum nu_l conj(a_l) v at every node."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    grad = np.asarray(grad, dtype=complex)
    if v.size != frame.n or grad.shape != (frame.n, c.n):
        raise ValueError("v and its gradient must be given at every node")
    nu = frame.normals
    values = np.einsum("jl,il,ij->i", c.a2, nu, grad) - (nu @ np.conj(c.a1)) * v
    return BoundaryDensity(frame, values, "c0", label="B*v")


# --- finite-difference jets -------------------------------------------------

_EPS = np.finfo(float).eps


def _stencil(n: int, hessian: bool) -> Tuple[np.ndarray, list]:
    """Unit offsets and, per offset, its role."""
    offsets = [np.zeros(n)]
    roles = [("center",)]
    eye = np.eye(n)
    for i in range(n):
        for s in (1.0, -1.0):
            offsets.append(s * eye[i])
            roles.append(("axis", i, s))
    if hessian:
        for i in range(n):
            for j in range(i + 1, n):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        offsets.append(si * eye[i] + sj * eye[j])
                        roles.append(("cross", i, j, si * sj))
    return np.array(offsets), roles


def derivative_jet(
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    step_scale: Union[None, float, np.ndarray] = None,
    hessian: bool = True,
) -> DerivativeJet:
    """Value, gradient and Hessian by Richardson-extrapolated central differences.

    fn maps an (m, n) array of points to m values. The step is
    h = eps^(1/6) * step_scale (default |x|); differences at h and h/2 are
    combined to fourth order. All stencil points go to fn in one call.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) == 1
    m, n = X.shape
    if step_scale is None:
        scale = np.linalg.norm(X, axis=1)
        scale[scale == 0] = 1.0
    else:
        scale = np.broadcast_to(np.asarray(step_scale, dtype=float), (m,)).copy()
    h = _EPS ** (1.0 / 6.0) * scale

    offsets, roles = _stencil(n, hessian)
    k = offsets.shape[0]
    levels = (h, 0.5 * h)
    pts = np.concatenate([X[:, None, :] + lvl[:, None, None] * offsets[None, :, :] for lvl in levels], axis=1)
    values = np.asarray(fn(pts.reshape(-1, n))).reshape(m, 2 * k)

    def estimates(vals: np.ndarray, step: np.ndarray):
        center = vals[:, 0]
        grad = np.zeros((m, n), dtype=vals.dtype)
        hess = np.zeros((m, n, n), dtype=vals.dtype)
        plus: Dict[int, np.ndarray] = {}
        minus: Dict[int, np.ndarray] = {}
        for col, role in enumerate(roles):
            if role[0] == "axis":
                (plus if role[2] > 0 else minus)[role[1]] = vals[:, col]
        for i in range(n):
            grad[:, i] = (plus[i] - minus[i]) / (2.0 * step)
            hess[:, i, i] = (plus[i] - 2.0 * center + minus[i]) / step**2
        for col, role in enumerate(roles):
            if role[0] == "cross":
                _, i, j, sign = role
                hess[:, i, j] += sign * vals[:, col] / (4.0 * step**2)
        for i in range(n):
            for j in range(i + 1, n):
                hess[:, j, i] = hess[:, i, j]
        return grad, hess

    g_h, H_h = estimates(values[:, :k], h)
    g_2, H_2 = estimates(values[:, k:], 0.5 * h)
    grad = (4.0 * g_2 - g_h) / 3.0
    hess = (4.0 * H_2 - H_h) / 3.0 if hessian else None
    value = values[:, 0]

    if single:
        return DerivativeJet(value=value[0], gradient=grad[0], hessian=None if hess is None else hess[0])
    return DerivativeJet(value=value, gradient=grad, hessian=hess)

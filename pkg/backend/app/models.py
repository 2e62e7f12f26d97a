"""Configuration and report models for the layer-potential suites."""

from __future__ import annotations

import hashlib
import json
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .operators import OperatorCoefficients


ComplexValue = Union[float, Tuple[float, float]]

ExperimentKind = Literal["identities", "modulus-scan", "kernels", "pde-residual", "second-derivative"]
FamilyName = Literal["laplace", "anisotropic_principal", "yukawa", "helmholtz", "drift"]


class CoefficientSpec(BaseModel):
    """Explicit operator coefficients; complex numbers as [re, im]."""

    model_config = ConfigDict(extra="forbid")

    a2: List[List[float]]
    a1: Optional[List[ComplexValue]] = None
    a0: ComplexValue = 0.0

    def to_coefficients(self) -> OperatorCoefficients:
        return OperatorCoefficients.from_json(self.model_dump())


class KernelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: FamilyName = "laplace"
    k: float = Field(1.0, gt=0)
    n: Literal[2, 3] = 2
    a2: Optional[List[List[float]]] = None


class CurveSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["ellipse", "star", "c11_blend"] = "ellipse"
    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)
    r0: float = Field(1.0, gt=0)
    eps: float = 0.2
    k: int = Field(5, ge=1)
    c: float = 0.1

    def params(self) -> Dict[str, float]:
        if self.kind == "ellipse":
            return {"a": self.a, "b": self.b}
        if self.kind == "star":
            return {"r0": self.r0, "eps": self.eps, "k": self.k}
        return {"r0": self.r0, "c": self.c}


class DensitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: Literal["constant", "cos", "sin", "lipschitz_hat", "c11_hat"] = "cos"
    m: int = Field(1, ge=0)
    value: float = 1.0
    center: float = 0.0
    width: float = Field(1.0, gt=0)


class PointGridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(5, ge=1)
    interior_scale: float = Field(0.7, gt=0, lt=1)
    exterior_min: float = Field(1.3, gt=1)
    exterior_max: float = Field(3.0, gt=1)

    @model_validator(mode="after")
    def _ordered(self) -> "PointGridSpec":
        if self.exterior_max < self.exterior_min:
            raise ValueError("exterior_max must not be below exterior_min")
        return self


class QuadratureSpec(BaseModel):
    """Per-experiment overrides of the env-level quadrature settings."""

    model_config = ConfigDict(extra="forbid")

    upsample_cap: Optional[int] = Field(None, ge=1)
    near_ratio: Optional[float] = Field(None, gt=0)
    d_min_relative: Optional[float] = Field(None, gt=0)
    near_factor: Optional[float] = Field(None, ge=0)
    trace_levels: Optional[int] = Field(None, ge=2)
    trace_tolerance: Optional[float] = Field(None, gt=0)


class ToleranceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    identity: float = 1e-8
    order: float = 3.0
    gauss: float = 1e-8
    log_potential: float = 1e-8
    near: float = 1e-6
    reduction: float = 1e-8
    pde: float = 1e-6
    gradient: float = 1e-7
    parity: float = 1e-12
    decay: float = 1e-3
    bounded_factor: float = 2.0
    second_derivative: float = 1e-5
    finite_difference: float = 1e-6
    jump: float = 1e-5
    boundary_form: float = 1e-5
    symmetry: float = 1e-6


class ScanSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    field: Literal["grad_single", "grad_double", "hessian_single"] = "grad_single"
    side: Literal["interior", "exterior"] = "interior"
    k_min: int = Field(3, ge=1)
    k_max: int = Field(8, ge=1)
    centers: int = Field(16, ge=1)
    moduli: List[str] = Field(default_factory=lambda: ["omega1", "lipschitz", "power:0.9"])

    @model_validator(mode="after")
    def _scales(self) -> "ScanSpec":
        if self.k_max < self.k_min:
            raise ValueError("k_max must not be below k_min")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    name: str = Field(..., min_length=1)
    experiment: ExperimentKind
    operator: Optional[CoefficientSpec] = None
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    curve: CurveSpec = Field(default_factory=CurveSpec)
    density: DensitySpec = Field(default_factory=DensitySpec)
    n_nodes: int = Field(256, ge=16)
    ladder: List[int] = Field(default_factory=lambda: [128, 256])
    points: PointGridSpec = Field(default_factory=PointGridSpec)
    modulus: str = "omega1"
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    scan: ScanSpec = Field(default_factory=ScanSpec)
    seed: int = 7

    @field_validator("ladder")
    @classmethod
    def _ladder(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("ladder must not be empty")
        for n in v:
            if n < 16 or n % 2:
                raise ValueError(f"ladder entries must be even and >= 16, got {n}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("ladder must be strictly increasing")
        return v

    @field_validator("n_nodes")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("n_nodes must be even")
        return v

    def coefficients(self) -> OperatorCoefficients:
        from .kernels import family_coefficients

        if self.operator is not None:
            return self.operator.to_coefficients()
        return family_coefficients(self.kernel.family, self.kernel.k, self.kernel.n, self.kernel.a2)

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class SuiteConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiments: List[ExperimentConfig]

    @model_validator(mode="after")
    def _unique_names(self) -> "SuiteConfig":
        names = [e.name for e in self.experiments]
        if len(names) != len(set(names)):
            raise ValueError("experiment names must be unique")
        return self


# --- reports ---------------------------------------------------------------


class CriterionResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    asserted: bool = True
    detail: str = ""


class ScanRecord(BaseModel):
    h: float
    pairs: int
    ratios: Dict[str, float]
    argmax: List[List[float]]
    estimate: float
    kept: bool


class ScanResult(BaseModel):
    records: List[ScanRecord]
    bounded: Dict[str, bool]
    config_hash: str


class ExperimentReport(BaseModel):
    name: str
    experiment: str
    config_hash: str
    criteria: List[CriterionResult]
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    scan: Optional[ScanResult] = None
    passed: bool

    @classmethod
    def build(
        cls,
        config: ExperimentConfig,
        criteria: List[CriterionResult],
        tables: Optional[Dict[str, List[Dict[str, Any]]]] = None,
        scan: Optional[ScanResult] = None,
    ) -> "ExperimentReport":
        return cls(
            name=config.name,
            experiment=config.experiment,
            config_hash=config.config_hash(),
            criteria=criteria,
            tables=tables or {},
            scan=scan,
            passed=all(c.passed for c in criteria if c.asserted),
        )


class SuiteReport(BaseModel):
    schema_version: Literal[1] = 1
    seed: Optional[int] = None
    experiments: List[ExperimentReport]
    passed: bool

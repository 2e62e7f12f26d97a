"""Configuration helpers for the layer-potential toolkit.

We keep these settings in a dedicated module so the CLI, the suite runner and
the quadrature routines share the same source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
import os
from typing import Any, Mapping, Optional


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        return default


def _env_str(name: str, default: str) -> str:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    return value.strip()


@dataclass(frozen=True)
class QuadratureSettings:
    # Near-singular path
    upsample_cap: int = 64
    near_ratio: float = 3.0
    d_min_relative: float = 1e-6

    # delta_near = near_factor * max node spacing
    near_factor: float = 4.0

    # Boundary traces
    trace_levels: int = 8
    trace_tolerance: float = 1e-6

    def merged(self, overrides: Optional[Mapping[str, Any]] = None) -> "QuadratureSettings":
        """Return a copy with every non-None override applied."""
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        changes = {k: v for k, v in overrides.items() if k in known and v is not None}
        return replace(self, **changes)


DEFAULT_QUADRATURE = QuadratureSettings()


@dataclass(frozen=True)
class LayerSettings:
    # Max experiments evaluated concurrently by the suite runner.
    threads: int

    out_dir: str
    quadrature: QuadratureSettings


def load_settings() -> LayerSettings:
    """Load settings from environment variables."""
    quadrature = QuadratureSettings(
        upsample_cap=max(1, _env_int("MIRANDA_LAYERS_UPSAMPLE_CAP", 64)),
        near_ratio=_env_float("MIRANDA_LAYERS_NEAR_RATIO", 3.0),
        d_min_relative=_env_float("MIRANDA_LAYERS_D_MIN_RELATIVE", 1e-6),
        near_factor=_env_float("MIRANDA_LAYERS_NEAR_FACTOR", 4.0),
        trace_levels=max(2, _env_int("MIRANDA_LAYERS_TRACE_LEVELS", 8)),
        trace_tolerance=_env_float("MIRANDA_LAYERS_TRACE_TOLERANCE", 1e-6),
    )
    return LayerSettings(
        threads=max(1, _env_int("MIRANDA_LAYERS_THREADS", 2)),
        out_dir=_env_str("MIRANDA_LAYERS_OUT_DIR", "out"),
        quadrature=quadrature,
    )

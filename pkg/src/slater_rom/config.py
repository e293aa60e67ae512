"""Experiment configuration: validated models, bundled presets, file I/O.

A configuration is a single JSON document with one section per concern
(well layout, training/test grids, online search knobs, heatmap window,
width-curve families).  Everything is validated up front through pydantic
models with unknown keys rejected, so a typo in a config file fails loudly
at load time instead of silently running with defaults.

The experiment drivers consume `ExperimentConfig` directly; the
command-line layer only handles files and flag overrides.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .online import OnlineConfig

__all__ = [
    "CONFIG_SCHEMA_VERSION",
    "Interval",
    "OnlineParams",
    "HeatmapParams",
    "TranslateFamilyParams",
    "DimerFamilyParams",
    "WidthsParams",
    "ExperimentConfig",
    "preset",
    "preset_names",
    "load_config",
    "dump_config",
]

CONFIG_SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Interval(_Section):
    """Closed interval sampled uniformly with `count` points."""

    lo: float
    hi: float
    count: int = Field(ge=2)

    @model_validator(mode="after")
    def _nondegenerate(self) -> "Interval":
        if not self.hi > self.lo:
            raise ValueError(f"interval needs hi > lo, got [{self.lo}, {self.hi}]")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


class OnlineParams(_Section):
    """Multistart search knobs; mirrors the runtime OnlineConfig."""

    box_halfwidth: float = Field(2.0, gt=0)
    starts: int = Field(2000, ge=1)
    smoothing: float | None = Field(None, gt=0)
    penalty_offset: float = Field(1e6, gt=0)
    penalty_scale: float = Field(1e6, gt=0)
    memory: int = Field(10, ge=1)
    max_iterations: int = Field(500, ge=1)
    gradient_tol: float = Field(1e-10, ge=0)
    decrease_tol: float = Field(1e-12, ge=0)
    start_budget_factor: int = Field(10, ge=1)
    min_margin: float = Field(1e-12, ge=0)
    workers: int | None = Field(None, ge=1)

    def to_config(self, workers: int | None = None) -> OnlineConfig:
        """Build the runtime config, optionally overriding the worker count."""
        data = self.model_dump()
        if workers is not None:
            data["workers"] = workers
        return OnlineConfig(**data)


class HeatmapParams(_Section):
    """Square weight-space window scanned by the landscape command."""

    r: float = 2.15
    lo: float = -2.0
    hi: float = 2.0
    count: int = Field(201, ge=3)

    @model_validator(mode="after")
    def _nondegenerate(self) -> "HeatmapParams":
        if not self.hi > self.lo:
            raise ValueError(f"window needs hi > lo, got [{self.lo}, {self.hi}]")
        return self

    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


class TranslateFamilyParams(_Section):
    """Single-well family for width curves: one unit-mass density of fixed
    charge, its center swept over [lo, hi]."""

    lo: float = -1.0
    hi: float = 1.0
    count: int = Field(201, ge=2)
    charge: float = Field(1.0, gt=0)
    npoints: int = Field(4096, ge=2)

    @model_validator(mode="after")
    def _nondegenerate(self) -> "TranslateFamilyParams":
        if not self.hi > self.lo:
            raise ValueError(f"family interval needs hi > lo, got [{self.lo}, {self.hi}]")
        return self


class DimerFamilyParams(_Section):
    """Symmetric two-well family for quantile-side width curves.

    Ground states of equal charges at +-r, r swept over [lo, hi]; the
    curve is computed from inverse-distribution snapshots on nq midpoint
    quantiles, so distances are transport distances rather than L2.
    """

    lo: float = 0.005
    hi: float = 1.0
    count: int = Field(200, ge=2)
    charge: float = Field(1.0, gt=0)
    nq: int = Field(512, ge=64)

    @model_validator(mode="after")
    def _nondegenerate(self) -> "DimerFamilyParams":
        if not (self.hi > self.lo > 0):
            raise ValueError(f"family interval needs hi > lo > 0, got [{self.lo}, {self.hi}]")
        return self


class WidthsParams(_Section):
    translate: TranslateFamilyParams = TranslateFamilyParams()
    dimer: DimerFamilyParams = DimerFamilyParams()


class ExperimentConfig(_Section):
    """Complete description of one experiment campaign.

    The well layout is charge vector plus a unit geometry vector: a scalar
    parameter r places well m at r * geometry[m].  The default geometry
    (-1, +1) gives the mirrored two-well layout, so r is the half
    separation.  Training/test/extrapolation grids sample r.
    """

    schema_version: int = CONFIG_SCHEMA_VERSION
    charges: tuple[float, ...] = (0.8, 1.1)
    geometry: tuple[float, ...] | None = None
    training: Interval = Interval(lo=0.5, hi=3.0, count=251)
    test: Interval = Interval(lo=0.5, hi=3.0, count=51)
    extrapolation: tuple[Interval, ...] = ()
    basis_size: int = Field(10, ge=2)
    online: OnlineParams = OnlineParams()
    heatmap: HeatmapParams = HeatmapParams()
    widths: WidthsParams = WidthsParams()
    out_dir: str = "results"

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ValueError(
                f"config schema_version {self.schema_version} not supported "
                f"(this build reads version {CONFIG_SCHEMA_VERSION})")
        if len(self.charges) == 0 or any(z <= 0 for z in self.charges):
            raise ValueError("charges must be a nonempty tuple of positive numbers")
        if self.geometry is not None:
            if len(self.geometry) != len(self.charges):
                raise ValueError(
                    f"geometry length {len(self.geometry)} != "
                    f"charges length {len(self.charges)}")
            if not all(np.isfinite(g) for g in self.geometry):
                raise ValueError("geometry entries must be finite")
        elif len(self.charges) > 2:
            raise ValueError("geometry is required for more than two wells")
        if self.basis_size > self.training.count:
            raise ValueError(
                f"basis_size {self.basis_size} exceeds training count "
                f"{self.training.count}")
        return self

    @property
    def geometry_vector(self) -> np.ndarray:
        if self.geometry is not None:
            out = np.array(self.geometry, dtype=float)
        elif len(self.charges) == 1:
            out = np.array([1.0])
        else:
            out = np.array([-1.0, 1.0])
        out.setflags(write=False)
        return out

    def positions_for(self, r: float) -> np.ndarray:
        return float(r) * self.geometry_vector

    @property
    def charge_vector(self) -> np.ndarray:
        out = np.array(self.charges, dtype=float)
        out.setflags(write=False)
        return out


_PRESETS = {
    # Reference two-well campaign: charges (0.8, 1.1), 251 training points
    # on [0.5, 3], 51 test points, 2000 starts in the [-2, 2]^N box, and
    # the short extrapolation grids on both sides of the training window.
    "paper": {
        "charges": [0.8, 1.1],
        "training": {"lo": 0.5, "hi": 3.0, "count": 251},
        "test": {"lo": 0.5, "hi": 3.0, "count": 51},
        "extrapolation": [
            {"lo": 0.0, "hi": 0.48, "count": 17},
            {"lo": 3.05, "hi": 4.0, "count": 21},
        ],
        "basis_size": 10,
        "online": {"box_halfwidth": 2.0, "starts": 2000},
        "heatmap": {"r": 2.15},
    },
    # Scaled-down variant for smoke tests and laptops.
    "small": {
        "charges": [0.8, 1.1],
        "training": {"lo": 0.5, "hi": 3.0, "count": 26},
        "test": {"lo": 0.5, "hi": 3.0, "count": 11},
        "basis_size": 4,
        "online": {"starts": 64},
        "heatmap": {"count": 101},
        "widths": {
            "translate": {"count": 51, "npoints": 1024},
            "dimer": {"count": 40, "nq": 128},
        },
    },
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset(name: str) -> ExperimentConfig:
    """Return a bundled configuration by name ('paper', 'small')."""
    try:
        raw = _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return ExperimentConfig.model_validate(raw)


def _friendly_validation_error(exc: ValidationError) -> ConfigError:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return ConfigError("invalid configuration: " + "; ".join(lines))


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config file.

    Raises ConfigError for unreadable files, malformed JSON, unknown keys,
    or out-of-range values; the message names the offending field.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise _friendly_validation_error(exc) from exc


def validate_config_dict(raw: dict) -> ExperimentConfig:
    """Validate an in-memory config mapping (service path)."""
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise _friendly_validation_error(exc) from exc


def dump_config(config: ExperimentConfig, path: str | Path) -> None:
    """Write a config as pretty-printed JSON (round-trips through load)."""
    Path(path).write_text(config.model_dump_json(indent=2) + "\n")


def bundled_preset_path(name: str) -> Path:
    """Path of the installed preset file (for copying or inspection)."""
    ref = resources.files("slater_rom") / "presets" / f"{name}.cfg"
    with resources.as_file(ref) as p:
        if not p.exists():
            raise ConfigError(
                f"no bundled preset file {name!r}; available: "
                + ", ".join(preset_names()))
        return Path(p)

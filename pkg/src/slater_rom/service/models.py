"""Request and response schemas of the HTTP service.

Requests reject unknown keys so a misspelled field fails loudly.  Every
experiment request names its configuration either inline (`config`, a full
JSON document) or by bundled preset name (`preset`); giving both is an
error, giving neither runs the built-in defaults.

All error responses share one envelope: `{"error_type": ..., "detail": ...}`
with error_type one of config | numerical | schema, which clients (the
bundled command line among them) map onto exit codes.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

__all__ = [
    "SolveRequest",
    "OfflineRequest",
    "OnlineRequest",
    "HeatmapRequest",
    "WidthsRequest",
    "Timings",
    "SolveResponse",
    "OfflineResponse",
    "OnlineRecordModel",
    "OnlineSummaryRow",
    "OnlineResponse",
    "MinimumModel",
    "HeatmapResponse",
    "WidthCurveModel",
    "WidthsResponse",
    "HealthResponse",
    "ErrorEnvelope",
]


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict | None = None
    preset: str | None = None


class SolveRequest(_Request):
    params: list[float] | None = None


class OfflineRequest(_Request):
    pass


class OnlineRequest(_Request):
    artifact: dict
    params: list[float] | None = None
    n_values: list[int] | None = None
    workers: int | None = Field(None, ge=1)


class HeatmapRequest(_Request):
    artifact: dict
    r: float | None = None


class WidthsRequest(_Request):
    pass


class Timings(BaseModel):
    """Wall-clock side channel, kept out of the deterministic payload."""

    total_seconds: float
    per_record_seconds: list[float] | None = None


class SolveResponse(BaseModel):
    params: list[float]
    zetas: list[float]
    weights: list[list[float]]
    energies: list[float]
    residuals: list[float]
    timings: Timings


class OfflineResponse(BaseModel):
    artifact: dict
    timings: Timings


class OnlineRecordModel(BaseModel):
    n: int
    r: float
    lam: list[float]
    energy: float
    exact_energy: float | None
    error: float | None
    starts_converged: int
    best_start: int


class OnlineSummaryRow(BaseModel):
    n: int
    max_error: float
    mean_error: float
    min_error: float


class OnlineResponse(BaseModel):
    n_values: list[int]
    params: list[float]
    records: list[OnlineRecordModel]
    summary: list[OnlineSummaryRow]
    timings: Timings


class MinimumModel(BaseModel):
    i: int
    j: int
    lam: list[float]
    energy: float


class HeatmapResponse(BaseModel):
    r: float
    axis: list[float]
    energies: list[list[float | None]]
    minima: list[MinimumModel]
    timings: Timings


class WidthCurveModel(BaseModel):
    n_values: list[int]
    deltas: list[float]
    sigmas: list[float]
    slope: float | None
    window: list[float]
    sample_count: int


class WidthsResponse(BaseModel):
    translate: WidthCurveModel
    dimer: WidthCurveModel
    timings: Timings


class HealthResponse(BaseModel):
    status: Literal["ok"]
    package_version: str
    config_schema_version: int
    artifact_schema_version: int


class ErrorEnvelope(BaseModel):
    error_type: Literal["config", "numerical", "schema"]
    detail: str

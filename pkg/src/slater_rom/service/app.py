"""HTTP service exposing the experiment drivers.

One endpoint per campaign step (solve, offline, online, heatmap, widths)
plus a health probe.  Handlers validate input, resolve the configuration,
delegate to the drivers, and attach wall-clock timings as a separate field
so the result payload stays deterministic for a fixed request.

Domain errors map onto a uniform envelope: config problems come back as
HTTP 400, artifact schema mismatches as 409, numerical failures as 422,
each carrying {"error_type", "detail"}.
"""

from __future__ import annotations

from time import perf_counter

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import (CONFIG_SCHEMA_VERSION, ExperimentConfig, preset,
                      validate_config_dict)
from ..errors import ConfigError, DomainError, NumericalError, SchemaError
from ..experiments import (run_heatmap, run_offline, run_online, run_solve,
                           run_widths)
from ..greedy import ARTIFACT_SCHEMA_VERSION, basis_from_dict, basis_to_dict
from .models import (ErrorEnvelope, HealthResponse, HeatmapRequest,
                     HeatmapResponse, OfflineRequest, OfflineResponse,
                     OnlineRequest, OnlineResponse, SolveRequest,
                     SolveResponse, Timings, WidthsRequest, WidthsResponse)

__all__ = ["create_app", "app"]


def _resolve_config(body) -> ExperimentConfig:
    if body.config is not None and body.preset is not None:
        raise ConfigError("give either an inline config or a preset name, not both")
    if body.config is not None:
        return validate_config_dict(body.config)
    if body.preset is not None:
        return preset(body.preset)
    return ExperimentConfig()


def _envelope(error_type: str, detail: str, status: int) -> JSONResponse:
    body = ErrorEnvelope(error_type=error_type, detail=detail)
    return JSONResponse(status_code=status, content=body.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(
        title="slater-rom",
        version=__version__,
        description=(
            "Reduced-order modeling of 1D point-interaction Schrodinger "
            "ground states through barycenters of exponential mixtures."),
    )

    @app.exception_handler(ConfigError)
    @app.exception_handler(DomainError)
    async def _config_error(request: Request, exc: Exception):
        return _envelope("config", str(exc), 400)

    @app.exception_handler(SchemaError)
    async def _schema_error(request: Request, exc: Exception):
        return _envelope("schema", str(exc), 409)

    @app.exception_handler(NumericalError)
    async def _numerical_error(request: Request, exc: Exception):
        return _envelope("numerical", str(exc), 422)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            parts.append(f"{loc}: {err['msg']}")
        return _envelope("config", "invalid request: " + "; ".join(parts), 400)

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(
            status="ok", package_version=__version__,
            config_schema_version=CONFIG_SCHEMA_VERSION,
            artifact_schema_version=ARTIFACT_SCHEMA_VERSION)

    @app.post("/solve", response_model=SolveResponse)
    async def solve(body: SolveRequest) -> SolveResponse:
        config = _resolve_config(body)
        tic = perf_counter()
        table = run_solve(config, params=body.params)
        total = perf_counter() - tic
        return SolveResponse(**table.as_dict(),
                             timings=Timings(total_seconds=total))

    @app.post("/offline", response_model=OfflineResponse)
    async def offline(body: OfflineRequest) -> OfflineResponse:
        config = _resolve_config(body)
        tic = perf_counter()
        basis = run_offline(config)
        total = perf_counter() - tic
        return OfflineResponse(artifact=basis_to_dict(basis),
                               timings=Timings(total_seconds=total))

    @app.post("/online", response_model=OnlineResponse)
    async def online(body: OnlineRequest) -> OnlineResponse:
        config = _resolve_config(body)
        basis = basis_from_dict(body.artifact)
        tic = perf_counter()
        sweep = run_online(config, basis, params=body.params,
                           n_values=body.n_values, workers=body.workers)
        total = perf_counter() - tic
        t = sweep.timings()
        return OnlineResponse(
            **sweep.as_dict(),
            timings=Timings(total_seconds=total,
                            per_record_seconds=t["per_record_seconds"]))

    @app.post("/heatmap", response_model=HeatmapResponse)
    async def heatmap(body: HeatmapRequest) -> HeatmapResponse:
        config = _resolve_config(body)
        basis = basis_from_dict(body.artifact)
        tic = perf_counter()
        result = run_heatmap(config, basis, r=body.r)
        total = perf_counter() - tic
        return HeatmapResponse(**result.as_dict(),
                               timings=Timings(total_seconds=total))

    @app.post("/widths", response_model=WidthsResponse)
    async def widths(body: WidthsRequest) -> WidthsResponse:
        config = _resolve_config(body)
        tic = perf_counter()
        report = run_widths(config)
        total = perf_counter() - tic
        return WidthsResponse(**report.as_dict(),
                              timings=Timings(total_seconds=total))

    return app


app = create_app()

"""HTTP service exposing the estimators.

One endpoint per run: ``POST /runs/{algorithm}`` takes the full
configuration as JSON and returns the run report plus the artifact paths
written on the server side. Validation problems map to 422 with
``kind: "validation"``; runtime failures (non-convergent base power flow,
memory budget, fingerprint mismatch) map to 500 with ``kind: "runtime"``
so that clients can distinguish the two without parsing messages.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import (
    ConfigError,
    ContractError,
    FlexAreaError,
    IntractableError,
    NetworkValidationError,
    SchemaError,
)
from .runner import dispatch
from .settings import ALGORITHMS, RunConfig

VALIDATION_ERRORS = (
    ConfigError, SchemaError, NetworkValidationError, IntractableError,
)


class RunRequest(BaseModel):
    """Mirror of RunConfig minus the algorithm (taken from the URL)."""

    network: str | None = None
    net_name: str | None = None
    fsp_load_indices: list[int] = Field(default_factory=list)
    fsp_dg_indices: list[int] = Field(default_factory=list)
    scenario_type: str = "identity"
    max_curr_per: float = 100.0
    max_volt_pu: float = 1.05
    min_volt_pu: float = 0.95
    dp: float = 0.05
    dq: float = 0.1
    no_samples: int = 1000
    distribution: str | None = None
    opf_step: float = 0.1
    flex_shape: str | None = None
    non_linear_fsps: list[int] = Field(default_factory=list)
    max_fsps: int | None = None
    tt_epsilon: float = 1e-8
    seed: int = 0
    out_dir: str | None = None
    store_path: str | None = None
    pf_tol: float = 1e-8
    pf_max_iter: int = 30
    exhaustive_cap: int = 1_000_000
    memory_budget_bytes: int = 2 << 30
    upsample_factor: int = 4
    loading_threshold: float = 0.5
    voltage_threshold: float = 0.001

    def to_config(self, algorithm: str) -> RunConfig:
        data = self.model_dump()
        for key in ("fsp_load_indices", "fsp_dg_indices", "non_linear_fsps"):
            data[key] = tuple(data[key])
        return RunConfig(algorithm=algorithm, **data)


class RunResponse(BaseModel):
    algorithm: str
    report: dict
    figure_path: str
    csv_path: str
    report_path: str
    extra_lines: list[str] = Field(default_factory=list)


class ErrorBody(BaseModel):
    kind: str  # "validation" | "runtime"
    error: str


def create_app() -> FastAPI:
    app = FastAPI(title="flexarea", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/algorithms")
    def algorithms() -> dict:
        return {"algorithms": list(ALGORITHMS)}

    @app.post("/runs/{algorithm}", response_model=RunResponse, responses={
        422: {"model": ErrorBody}, 500: {"model": ErrorBody},
    })
    def run(algorithm: str, request: RunRequest):
        try:
            result = dispatch(request.to_config(algorithm))
        except VALIDATION_ERRORS as exc:
            return JSONResponse(
                status_code=422,
                content=ErrorBody(kind="validation", error=str(exc)).model_dump(),
            )
        except (FlexAreaError, ContractError) as exc:
            return JSONResponse(
                status_code=500,
                content=ErrorBody(kind="runtime", error=str(exc)).model_dump(),
            )
        return RunResponse(
            algorithm=algorithm,
            report=result.report,
            figure_path=str(result.figure_path),
            csv_path=str(result.csv_path),
            report_path=str(result.report_path),
            extra_lines=result.extra_lines,
        )

    return app


app = create_app()

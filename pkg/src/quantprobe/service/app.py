"""FastAPI application wrapping the probing harness.

Dataset generation, experiment execution, grid search, report rendering and
the selftest are exposed as endpoints; experiments and grid searches can run
as background jobs (POST with wait=false, then poll /jobs/{id}).
"""

from __future__ import annotations

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, DataFormatError, MissingDataError, QuantProbeError
from . import ops, schemas
from .jobs import JobStore, describe_error

_STATUS_FOR_KIND = {"config": 400, "format": 400, "missing_data": 409, "internal": 500}


def create_app() -> FastAPI:
    app = FastAPI(title="quantprobe", version=__version__)
    jobs = JobStore()
    app.state.jobs = jobs

    @app.exception_handler(QuantProbeError)
    async def handle_harness_error(request: Request, exc: QuantProbeError):
        body = describe_error(exc)
        return JSONResponse(status_code=_STATUS_FOR_KIND[body["kind"]], content={"detail": body})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/tasks", response_model=list[schemas.TaskInfo])
    def tasks():
        return ops.list_tasks()

    @app.post("/datasets/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        return ops.generate(req)

    @app.post("/datasets/expect", response_model=schemas.ExpectResponse)
    def expect(req: schemas.ExpectRequest):
        return ops.expect(req)

    @app.post("/experiments", response_model=schemas.JobInfo)
    def experiments(req: schemas.ExperimentRequest, wait: bool = Query(default=True)):
        job = jobs.run("experiment", lambda: ops.experiment(req), background=not wait)
        return _job_info(job)

    @app.post("/grid", response_model=schemas.JobInfo)
    def grid(req: schemas.GridRequest, wait: bool = Query(default=True)):
        job = jobs.run("grid", lambda: ops.grid(req), background=not wait)
        return _job_info(job)

    @app.get("/jobs/{job_id}", response_model=schemas.JobInfo)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise ConfigError(f"unknown job {job_id}")
        return _job_info(job)

    @app.post("/reports/render", response_model=schemas.RenderResponse)
    def render(req: schemas.RenderRequest):
        return ops.render(req)

    @app.post("/selftest", response_model=schemas.SelftestResponse)
    def selftest():
        return ops.selftest()

    return app


def _job_info(job) -> schemas.JobInfo:
    return schemas.JobInfo(id=job.id, kind=job.kind, status=job.status,
                           error=job.error, result=job.result)


# re-exported so exception kinds stay importable from one place
__all__ = ["create_app", "ConfigError", "DataFormatError", "MissingDataError"]

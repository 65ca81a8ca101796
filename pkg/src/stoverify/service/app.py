"""FastAPI application exposing decompose/verify/simulate."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import InputError, OutputWriteError
from . import ops
from .schemas import (
    DecomposeRequest,
    DecomposeResponse,
    SimulateRequest,
    SimulateResponse,
    VerifyRequest,
    VerifyResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="stoverify", version=__version__)

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(OutputWriteError)
    async def _output_error(request: Request, exc: OutputWriteError) -> JSONResponse:
        return JSONResponse(
            status_code=500,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/decompose", response_model=DecomposeResponse)
    async def decompose(req: DecomposeRequest) -> DecomposeResponse:
        return ops.do_decompose(req)

    @app.post("/verify", response_model=VerifyResponse)
    async def verify(req: VerifyRequest) -> VerifyResponse:
        return ops.do_verify(req)

    @app.post("/simulate", response_model=SimulateResponse)
    async def simulate(req: SimulateRequest) -> SimulateResponse:
        return ops.do_simulate(req)

    return app


app = create_app()

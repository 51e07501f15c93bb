"""HTTP front end over the service operations."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..campaign import EngineUnavailable
from ..serialize import MalformedEncoding
from . import core
from .schemas import (ExecuteRequest, FuzzRequest, GenerateRequest, GenerateResponse, Health, LiftRequest,
                      LiftResponse, OutcomeModel, StatsRequest, StatsSummary)


def create_app() -> FastAPI:
    app = FastAPI(title="weaver", version="0.1.0")

    @app.get("/health", response_model=Health)
    def health():
        return core.health()

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        try:
            return core.generate(req)
        except ValueError as e:
            raise HTTPException(400, str(e))

    @app.post("/lift", response_model=LiftResponse)
    def lift(req: LiftRequest):
        try:
            return core.lift(req)
        except (MalformedEncoding, ValueError) as e:
            raise HTTPException(400, f"malformed program: {e}")

    @app.post("/execute", response_model=OutcomeModel)
    def execute(req: ExecuteRequest):
        try:
            return core.execute(req)
        except EngineUnavailable as e:
            raise HTTPException(503, str(e))

    @app.post("/fuzz")
    def fuzz(req: FuzzRequest) -> dict:
        try:
            return core.fuzz(req)
        except EngineUnavailable as e:
            raise HTTPException(503, str(e))

    @app.post("/stats", response_model=StatsSummary)
    def stats(req: StatsRequest):
        return core.summarize(req)

    return app


app = create_app()

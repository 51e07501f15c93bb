"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

ProfileName = Literal["jsc", "v8", "spidermonkey", "generic"]


class ProfileOverride(BaseModel):
    """Inline form of a profile file: unset features inherit from ``base``."""

    base: ProfileName = "generic"
    name: str | None = None
    memory64: bool | None = None
    multiMemory: bool | None = None
    relaxedSimd: bool | None = None
    simd: bool | None = None
    gc: bool | None = None
    exceptions: bool | None = None
    excludedMembers: list[str] | None = None
    crashMarkers: list[str] | None = None


class GenerateRequest(BaseModel):
    n: int = Field(1, ge=0, le=100_000)
    seed: int = 0
    profile: ProfileName = "generic"
    profile_override: ProfileOverride | None = None
    synthesizer: str = "builtin"


class ProgramOut(BaseModel):
    hash: str
    source: str
    wvil_b64: str


class GenerateResponse(BaseModel):
    programs: list[ProgramOut]


class LiftRequest(BaseModel):
    wvil_b64: str


class LiftResponse(BaseModel):
    source: str
    instructions: int


class EngineModel(BaseModel):
    shell_path: str
    extra_args: list[str] = []
    timeout_ms: int = Field(600, gt=0)
    profile: ProfileName = "generic"


class ExecuteRequest(BaseModel):
    source: str
    engine: EngineModel


class OutcomeModel(BaseModel):
    kind: Literal["Valid", "RuntimeError", "Timeout", "Crash"]
    exit_status: int | None
    duration_ms: float
    stderr_excerpt: str


class FuzzRequest(BaseModel):
    engine: EngineModel
    seed: int = 0
    corpus: str
    crashes: str
    stats: str
    max_execs: int = Field(1000, ge=0)
    wasm_amplification: float = Field(4.0, gt=0)
    rebalance_interval: int = Field(2000, ge=1)
    generative_phase_target: int = Field(200, ge=1)
    generation_ratio: float = Field(0.1, ge=0, le=1)
    synthesizer: str = "builtin"
    workers: int = Field(1, ge=1)
    profile_override: ProfileOverride | None = None


class StatsRequest(BaseModel):
    stats: dict


class StatsSummary(BaseModel):
    executions: int
    valid: int
    runtimeError: int
    timeout: int
    crash: int
    validityRate: float
    timeoutRate: float
    corpusSize: int
    elapsed: float
    text: str


class Health(BaseModel):
    status: Literal["ok"] = "ok"
    profiles: list[str]

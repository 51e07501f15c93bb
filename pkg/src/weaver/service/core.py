"""Service operations on pydantic models; used by both the HTTP app and the CLI."""

from __future__ import annotations

import base64
import random
from dataclasses import replace
from pathlib import Path

from .. import serialize as ser
from ..campaign import CampaignConfig, EngineConfig, execute as run_engine, program_hash, run_campaign
from ..generation import GenerationEngine
from ..lifter import lift as lift_program
from ..profiles import FEATURES, PROFILES, FeatureProfile, get_profile
from ..wasm_codegen import make_synthesizer
from .schemas import (EngineModel, ExecuteRequest, FuzzRequest, GenerateRequest, GenerateResponse, Health,
                      LiftRequest, LiftResponse, OutcomeModel, ProfileOverride, ProgramOut, StatsRequest,
                      StatsSummary)


def resolve_profile(name: str, override: ProfileOverride | None) -> FeatureProfile:
    if override is None:
        return get_profile(name)
    prof = get_profile(override.base)
    kw = {f: getattr(override, f) for f in FEATURES if getattr(override, f) is not None}
    if override.excludedMembers is not None:
        kw["excluded_members"] = frozenset(override.excludedMembers)
    if override.crashMarkers is not None:
        kw["crash_markers"] = tuple(override.crashMarkers)
    return replace(prof, name=override.name or prof.name, **kw)


def _engine(m: EngineModel) -> EngineConfig:
    return EngineConfig(m.shell_path, tuple(m.extra_args), m.timeout_ms, m.profile)


def health() -> Health:
    return Health(profiles=sorted(PROFILES))


def generate(req: GenerateRequest) -> GenerateResponse:
    profile = resolve_profile(req.profile, req.profile_override)
    eng = GenerationEngine(profile=profile, synthesizer=make_synthesizer(req.synthesizer))
    rng = random.Random(req.seed)
    out = []
    for _ in range(req.n):
        p = eng.generate(rng).program
        out.append(ProgramOut(hash=program_hash(p), source=lift_program(p),
                              wvil_b64=base64.b64encode(ser.serialize(p)).decode()))
    return GenerateResponse(programs=out)


def lift(req: LiftRequest) -> LiftResponse:
    p = ser.deserialize(base64.b64decode(req.wvil_b64))
    return LiftResponse(source=lift_program(p), instructions=len(p.instructions))


def execute(req: ExecuteRequest) -> OutcomeModel:
    o = run_engine(req.source, _engine(req.engine))
    return OutcomeModel(kind=o.kind.value, exit_status=o.exit_status, duration_ms=o.duration_ms,
                        stderr_excerpt=o.stderr_excerpt)


def fuzz(req: FuzzRequest) -> dict:
    cfg = CampaignConfig(seed=req.seed, generative_phase_target=req.generative_phase_target,
                         max_executions=req.max_execs, rebalance_interval=req.rebalance_interval,
                         wasm_amplification=req.wasm_amplification, corpus_dir=Path(req.corpus),
                         crash_dir=Path(req.crashes), stats_path=Path(req.stats),
                         generation_ratio=req.generation_ratio, synthesizer=req.synthesizer,
                         profile=resolve_profile(req.engine.profile, req.profile_override)
                         if req.profile_override else None)
    return run_campaign(cfg, _engine(req.engine), req.workers)


def summarize(req: StatsRequest) -> StatsSummary:
    s = req.stats
    t = s.get("totals", {})
    n = t.get("executions", 0)
    summary = dict(executions=n, valid=t.get("valid", 0), runtimeError=t.get("runtimeError", 0),
                   timeout=t.get("timeout", 0), crash=t.get("crash", 0),
                   validityRate=s.get("validityRate", 0.0), timeoutRate=s.get("timeoutRate", 0.0),
                   corpusSize=s.get("corpusSize", 0), elapsed=s.get("elapsed", 0.0))
    lines = [f"executions   {n}",
             f"valid        {summary['valid']}",
             f"runtimeError {summary['runtimeError']}",
             f"timeout      {summary['timeout']}",
             f"crash        {summary['crash']}",
             f"validity     {summary['validityRate']:.4f}",
             f"timeouts     {summary['timeoutRate']:.4f}",
             f"corpus       {summary['corpusSize']}",
             f"elapsed      {summary['elapsed']:.1f}s"]
    for key in ("generators", "mutators"):
        arms = s.get(key) or []
        if arms:
            lines.append(f"{key}:")
            for a in arms:
                lines.append(f"  {a['name']:<32} {a['valid']:>6}/{a['total']:<6} weight {a['weight']:.2f}")
    return StatsSummary(text="\n".join(lines), **summary)

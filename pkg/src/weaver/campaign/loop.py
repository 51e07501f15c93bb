"""The fuzzing loop: generate or mutate, execute, score, keep."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .. import mutation as mu
from .. import scheduler as sch
from ..environment import DEFAULT_ENVIRONMENT, StaticTypeEnvironment
from ..generation import GenerationEngine, generator_scheduler
from ..ir import Program
from ..lifter import lift
from ..profiles import DEFAULT_BUDGET, FeatureProfile, GenerationBudget, get_profile
from ..serialize import MalformedEncoding, deserialize, serialize
from ..wasm_codegen import make_synthesizer
from .executor import EngineConfig, Outcome, OutcomeKind, execute
from .feedback import FeedbackSource, StructuralFeedback, structural_features

log = logging.getLogger(__name__)

_STAT_KEYS = {OutcomeKind.VALID: "valid", OutcomeKind.RUNTIME_ERROR: "runtimeError", OutcomeKind.TIMEOUT: "timeout",
              OutcomeKind.CRASH: "crash"}


@dataclass
class CampaignConfig:
    seed: int = 0
    generative_phase_target: int = 200
    max_executions: int = 1000
    rebalance_interval: int = sch.DEFAULT_REBALANCE_INTERVAL
    wasm_amplification: float = sch.DEFAULT_AMPLIFICATION
    budget: GenerationBudget = DEFAULT_BUDGET
    corpus_dir: Path | None = None
    crash_dir: Path | None = None
    stats_path: Path | None = None
    transcript_path: Path | None = None
    generation_ratio: float = 0.1  # share of generation once mutation is active
    synthesizer: str = "builtin"
    stats_every: int = 500
    profile: FeatureProfile | None = None  # overrides the engine's named profile
    sync_dirs: tuple[Path, ...] = ()
    sync_interval: int = 500

    def __post_init__(self):
        if self.generative_phase_target < 1:
            raise ValueError("generative_phase_target must be >= 1")
        if self.max_executions < 0:
            raise ValueError("max_executions must be >= 0")
        if not 0.0 <= self.generation_ratio <= 1.0:
            raise ValueError("generation_ratio must be in [0, 1]")
        for k in ("corpus_dir", "crash_dir", "stats_path", "transcript_path"):
            v = getattr(self, k)
            if v is not None and not isinstance(v, Path):
                setattr(self, k, Path(v))
        self.sync_dirs = tuple(Path(d) for d in self.sync_dirs)


def program_hash(program: Program) -> str:
    return hashlib.sha256(serialize(program)).hexdigest()[:16]


def _dump(path: Path, data: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def _write_new(path: Path, data: bytes | str):
    """Content-addressed artifacts are never overwritten."""
    if path.exists():
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data, encoding="utf-8")
    else:
        path.write_bytes(data)


def load_corpus(directory: Path) -> list[Program]:
    out = []
    for f in sorted(Path(directory).glob("*.wvil")):
        try:
            out.append(deserialize(f.read_bytes()))
        except MalformedEncoding as e:
            log.warning("skipping %s: %s", f, e)
    return out


class Campaign:
    """One worker's full pipeline. ``step`` performs exactly one execution."""

    def __init__(self, cfg: CampaignConfig, engine: EngineConfig, feedback: FeedbackSource | None = None,
                 env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT, clock: Callable[[], float] = time.monotonic,
                 executor: Callable[[str, EngineConfig], Outcome] = execute):
        self.cfg, self.engine, self.env, self.clock, self.executor = cfg, engine, env, clock, executor
        self.profile = cfg.profile or get_profile(engine.profile)
        self.rng = random.Random(cfg.seed)
        self.feedback = feedback or StructuralFeedback()
        self.gen_sched = generator_scheduler(cfg.wasm_amplification, cfg.rebalance_interval)
        self.mut_sched = mu.mutator_scheduler(cfg.rebalance_interval)
        self.generator = GenerationEngine(self.gen_sched, env, self.profile, cfg.budget,
                                          make_synthesizer(cfg.synthesizer, cfg.budget))
        self.corpus: list[Program] = []
        self.corpus_hashes: set[str] = set()
        self.totals = {"executions": 0, "valid": 0, "runtimeError": 0, "timeout": 0, "crash": 0}
        self.crashes = 0
        self.started = clock()
        self._synced: set[Path] = set()
        self._transcript = None
        if cfg.transcript_path is None and cfg.stats_path is not None:
            cfg.transcript_path = cfg.stats_path.parent / "transcript.jsonl"

    # -- corpus --------------------------------------------------------------

    @property
    def phase(self) -> str:
        return "generative" if len(self.corpus) < self.cfg.generative_phase_target else "mutation"

    def _add(self, program: Program) -> str | None:
        h = program_hash(program)
        if h in self.corpus_hashes:
            return None
        self.corpus_hashes.add(h)
        self.corpus.append(program)
        if self.cfg.corpus_dir is not None:
            _write_new(self.cfg.corpus_dir / f"{h}.wvil", serialize(program))
        return h

    def import_seeds(self, programs):
        """Adopt programs found by other workers when they add structural novelty."""
        added = 0
        seen = getattr(self.feedback, "seen", None)
        for p in programs:
            if seen is not None:
                new = structural_features(p) - seen
                if not new:
                    continue
                seen |= new
            if self._add(p):
                added += 1
        return added

    def _sync(self):
        for d in self.cfg.sync_dirs:
            if not d.exists():
                continue
            fresh = [f for f in sorted(d.glob("*.wvil")) if f not in self._synced]
            self._synced.update(fresh)
            progs = []
            for f in fresh:
                try:
                    progs.append(deserialize(f.read_bytes()))
                except MalformedEncoding:
                    continue
            self.import_seeds(progs)

    # -- stats ---------------------------------------------------------------

    def stats(self) -> dict:
        t = self.totals
        denom = t["executions"] - t["timeout"]
        return {
            "totals": dict(t),
            "validityRate": t["valid"] / denom if denom else 0.0,
            "timeoutRate": t["timeout"] / t["executions"] if t["executions"] else 0.0,
            "generators": self.gen_sched.snapshot(),
            "mutators": self.mut_sched.snapshot(),
            "corpusSize": len(self.corpus),
            "phase": self.phase,
            "seed": self.cfg.seed,
            "profile": self.profile.name,
            "elapsed": self.clock() - self.started,
        }

    def write_stats(self):
        if self.cfg.stats_path is not None:
            _dump(self.cfg.stats_path, self.stats())

    # -- one execution -------------------------------------------------------

    def step(self) -> dict:
        rng = self.rng
        if self.phase == "generative" or rng.random() < self.cfg.generation_ratio:
            g = self.generator.generate(rng)
            program, kind, arms = g.program, "generate", sorted(g.credits)
            names = [self.gen_sched.arms[i].name for i in arms]
        else:
            seed = rng.choice(self.corpus)
            m = mu.mutate_pipeline(seed, rng, self.mut_sched, self.corpus, self.env, self.profile)
            program, kind, arms = m.program, "mutate", m.applied
            names = [self.mut_sched.arms[i].name for i in arms] or ["NoOp"]
        source = lift(program)
        outcome = self.executor(source, self.engine)
        if kind == "generate":
            self.generator.record(arms, outcome.kind.value)
        else:
            mu.record_mutators(self.mut_sched, arms, outcome.kind.value)
        self.totals["executions"] += 1
        self.totals[_STAT_KEYS[outcome.kind]] += 1
        novel = self.feedback.evaluate(program, outcome)
        h = self._add(program) if novel else None
        if outcome.kind is OutcomeKind.CRASH:
            self._persist_crash(program, source, outcome)
        entry = {"i": self.totals["executions"] - 1, "mode": kind, "arms": names,
                 "program": h or program_hash(program), "outcome": outcome.kind.value, "novel": bool(h),
                 "corpus": len(self.corpus)}
        if self._transcript is not None:
            self._transcript.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def _persist_crash(self, program: Program, source: str, outcome: Outcome):
        self.crashes += 1
        if self.cfg.crash_dir is None:
            return
        h = hashlib.sha256(source.encode("utf-8")).hexdigest()[:16]
        d = self.cfg.crash_dir
        _write_new(d / f"{h}.js", source)
        _write_new(d / f"{h}.wvil", serialize(program))
        _write_new(d / f"{h}.stderr.txt", outcome.stderr_excerpt)

    def run(self) -> dict:
        cfg = self.cfg
        if cfg.transcript_path is not None:
            cfg.transcript_path.parent.mkdir(parents=True, exist_ok=True)
            self._transcript = open(cfg.transcript_path, "w", encoding="utf-8")
        try:
            for n in range(cfg.max_executions):
                if cfg.sync_dirs and n and n % cfg.sync_interval == 0:
                    self._sync()
                self.step()
                if cfg.stats_every and (n + 1) % cfg.stats_every == 0:
                    self.write_stats()
        finally:
            if self._transcript is not None:
                self._transcript.close()
                self._transcript = None
        self.write_stats()
        return self.stats()


def fuzz_loop(campaign_cfg: CampaignConfig, engine_cfg: EngineConfig, feedback: FeedbackSource | None = None,
              clock: Callable[[], float] = time.monotonic, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT) -> dict:
    return Campaign(campaign_cfg, engine_cfg, feedback, env, clock).run()


# Multi-worker mode -----------------------------------------------------------------


def _worker(args) -> dict:
    cfg, engine = args
    return fuzz_loop(cfg, engine)


def _merge_stats(parts: list[dict], corpus_size: int, elapsed: float) -> dict:
    totals = {k: sum(p["totals"][k] for p in parts) for k in parts[0]["totals"]}
    denom = totals["executions"] - totals["timeout"]
    return {"totals": totals, "validityRate": totals["valid"] / denom if denom else 0.0,
            "timeoutRate": totals["timeout"] / totals["executions"] if totals["executions"] else 0.0,
            "workers": parts, "corpusSize": corpus_size, "elapsed": elapsed}


def run_campaign(cfg: CampaignConfig, engine: EngineConfig, workers: int = 1) -> dict:
    """Single worker runs in-process; K > 1 spawns independent workers that exchange seeds
    through their corpus directories and are merged by structural novelty at the end."""
    if workers <= 1:
        return fuzz_loop(cfg, engine)
    if cfg.corpus_dir is None:
        raise ValueError("multi-worker campaigns need a corpus directory")
    start = time.monotonic()
    root = cfg.corpus_dir
    wdirs = [root / f"worker-{i}" for i in range(workers)]
    share = [cfg.max_executions // workers + (1 if i < cfg.max_executions % workers else 0) for i in range(workers)]
    jobs = []
    for i in range(workers):
        stats_path = cfg.stats_path.with_name(f"{cfg.stats_path.stem}.worker-{i}.json") if cfg.stats_path else None
        jobs.append((replace(cfg, seed=cfg.seed + i, max_executions=share[i], corpus_dir=wdirs[i],
                             stats_path=stats_path, transcript_path=None,
                             sync_dirs=tuple(d for j, d in enumerate(wdirs) if j != i)), engine))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_worker, jobs))
    merged = StructuralFeedback()
    size = 0
    for d in wdirs:
        for p in load_corpus(d):
            new = structural_features(p) - merged.seen
            if new:
                merged.seen |= new
                _write_new(root / f"{program_hash(p)}.wvil", serialize(p))
                size += 1
    stats = _merge_stats(parts, size, time.monotonic() - start)
    if cfg.stats_path is not None:
        _dump(cfg.stats_path, stats)
    return stats

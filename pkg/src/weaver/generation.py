"""Seed-less program construction driven by the generator scheduler."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import ir
from . import scheduler as sch
from .builder import ProgramBuilder
from .environment import DEFAULT_ENVIRONMENT, StaticTypeEnvironment
from .js_codegen import ALL_GENERATORS, Generator, primitive_generator, run_generator
from .profiles import DEFAULT_BUDGET, FeatureProfile, GenerationBudget, get_profile
from .wasm_types import WasmTypeRecord

MIN_INSTRUCTIONS = 10
MAX_INSTRUCTIONS = 60


def generator_scheduler(amplification: float = sch.DEFAULT_AMPLIFICATION,
                        rebalance_interval: int = sch.DEFAULT_REBALANCE_INTERVAL,
                        generators=ALL_GENERATORS) -> sch.SchedulerState:
    return sch.SchedulerState.create([g.name for g in generators], [g.is_wasm for g in generators],
                                     amplification=amplification, rebalance_interval=rebalance_interval)


@dataclass
class Generated:
    program: ir.Program
    credits: frozenset[int]  # arm indices that contributed at least one instruction
    fallbacks: int = 0
    record: WasmTypeRecord | None = field(default=None, repr=False)


class GenerationEngine:
    def __init__(self, scheduler: sch.SchedulerState | None = None, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT,
                 profile: FeatureProfile | None = None, budget: GenerationBudget = DEFAULT_BUDGET,
                 synthesizer=None, generators: tuple[Generator, ...] = ALL_GENERATORS,
                 size_range: tuple[int, int] = (MIN_INSTRUCTIONS, MAX_INSTRUCTIONS)):
        self.generators = generators
        self.scheduler = scheduler or generator_scheduler(generators=generators)
        if len(self.scheduler.arms) != len(generators):
            raise ValueError("scheduler arms do not match the generator list")
        self.env = env
        self.profile = profile or get_profile("generic")
        self.budget = budget
        self.synthesizer = synthesizer
        self.size_range = size_range

    def _apply(self, b: ProgramBuilder, rng: random.Random, credits: set[int], blocks: bool,
               failed: set[int]) -> bool:
        # an untried arm that just failed must not monopolise the cold-start rotation
        arms = self.scheduler.arms
        mask = [g.available(b) and (blocks or not g.block) and not (i in failed and arms[i].total_count == 0)
                for i, g in enumerate(self.generators)]
        if not any(mask):
            return False
        i = sch.select(self.scheduler, rng, mask)
        if run_generator(b, self.generators[i]):
            credits.add(i)
            failed.clear()
            return True
        failed.add(i)
        return False

    def generate(self, rng: random.Random) -> Generated:
        lo, hi = self.size_range
        b = ProgramBuilder(rng, self.env, self.profile, self.budget, synthesizer=self.synthesizer)
        credits: set[int] = set()
        failed: set[int] = set()

        def inner(bb: ProgramBuilder, k: int):
            done = tries = 0
            while done < k and tries < 8 * k:
                tries += 1
                if self._apply(bb, rng, credits, False, failed):
                    done += 1

        b.inner = inner
        target = rng.randint(lo, hi)
        attempts = 0
        while len(b) < target and attempts < 20 * hi:
            attempts += 1
            snap = b.snapshot()
            before = set(credits)
            if self._apply(b, rng, credits, True, failed) and len(b) > hi:
                b.restore(snap)
                credits.intersection_update(before)
                if len(b) >= lo:
                    break
        while len(b) < lo:
            primitive_generator(b)
        return Generated(b.finish(), frozenset(credits), b.fallbacks, b.record)

    def record(self, credits, outcome: str):
        for i in sorted(credits):
            sch.record(self.scheduler, i, outcome)

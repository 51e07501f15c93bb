"""UCB-1 arm scheduling for generators and mutators."""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

VALID = "Valid"

DEFAULT_AMPLIFICATION = 4.0
DEFAULT_REBALANCE_INTERVAL = 2000


@dataclass
class ArmStats:
    valid_count: int = 0
    total_count: int = 0
    is_wasm_arm: bool = False
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.valid_count <= self.total_count:
            raise ValueError("need 0 <= valid_count <= total_count")


def perf(stats: ArmStats) -> float:
    if stats.total_count < 1:
        raise ValueError("perf is undefined for an untried arm")
    return stats.valid_count / stats.total_count


def weight(stats: ArmStats, grand_total: int, amplification: float = 1.0) -> float:
    if stats.total_count < 1 or grand_total < stats.total_count:
        raise ValueError("weight needs 1 <= total_count <= grand_total")
    w = (perf(stats) + math.sqrt(2.0 * math.log(grand_total) / stats.total_count)) * 100.0
    return w * amplification if stats.is_wasm_arm else w


@dataclass
class SchedulerState:
    arms: list[ArmStats]
    amplification: float = DEFAULT_AMPLIFICATION
    rebalance_interval: int = DEFAULT_REBALANCE_INTERVAL
    weights: list[float] = field(default_factory=list)
    records_since_rebalance: int = 0
    rebalances: int = 0
    _cursor: int = 0

    def __post_init__(self):
        if not self.arms:
            raise ValueError("scheduler needs at least one arm")
        if self.amplification <= 0:
            raise ValueError("amplification must be positive")
        if self.rebalance_interval < 1:
            raise ValueError("rebalance interval must be >= 1")
        if not self.weights:
            self.weights = [1.0] * len(self.arms)

    @classmethod
    def create(cls, names: Sequence[str], wasm: Sequence[bool] | None = None, **kw) -> "SchedulerState":
        wasm = wasm or [False] * len(names)
        return cls([ArmStats(is_wasm_arm=w, name=n) for n, w in zip(names, wasm)], **kw)

    @property
    def grand_total(self) -> int:
        return sum(a.total_count for a in self.arms)

    @property
    def cold(self) -> bool:
        return any(a.total_count == 0 for a in self.arms)

    def snapshot(self) -> list[dict]:
        return [{"name": a.name, "valid": a.valid_count, "total": a.total_count, "wasm": a.is_wasm_arm,
                 "weight": w} for a, w in zip(self.arms, self.weights)]


def select(state: SchedulerState, rng: random.Random, eligible: Sequence[bool] | None = None) -> int:
    """Round-robin over untried arms first, then sample proportionally to the frozen weights."""
    n = len(state.arms)
    ok = list(eligible) if eligible is not None else [True] * n
    if not any(ok):
        raise ValueError("no eligible arm")
    for step in range(n):
        i = (state._cursor + step) % n
        if ok[i] and state.arms[i].total_count == 0:
            state._cursor = (i + 1) % n
            return i
    ws = [w if o else 0.0 for w, o in zip(state.weights, ok)]
    cum = list(itertools.accumulate(ws))
    if cum[-1] <= 0:
        return rng.choice([i for i in range(n) if ok[i]])
    return min(bisect.bisect_right(cum, rng.random() * cum[-1]), n - 1)


def record(state: SchedulerState, arm: int, outcome: str) -> SchedulerState:
    """Count one execution for ``arm`` and rebalance when due."""
    a = state.arms[arm]
    warming = a.total_count == 0 and sum(x.total_count == 0 for x in state.arms) == 1
    a.total_count += 1
    if outcome == VALID:
        a.valid_count += 1
    state.records_since_rebalance += 1
    # the first weights are computed the moment the cold start ends
    if warming or (state.records_since_rebalance >= state.rebalance_interval and not state.cold):
        rebalance(state)
    return state


def compute_weights(state: SchedulerState) -> list[float]:
    n = state.grand_total
    return [weight(a, n, state.amplification) for a in state.arms]


def rebalance(state: SchedulerState) -> list[float]:
    if state.cold:
        raise ValueError("rebalance before every arm has been tried")
    state.weights = compute_weights(state)
    state.records_since_rebalance = 0
    state.rebalances += 1
    return state.weights

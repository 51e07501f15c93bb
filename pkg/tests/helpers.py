from __future__ import annotations

import random

from weaver import wasm_codegen as wg
from weaver.builder import ProgramBuilder
from weaver.js_codegen import default_inner
from weaver.profiles import PROFILES, get_profile

PROFILE_NAMES = sorted(PROFILES)


def random_shape(seed: int):
    """A module shape drawn in a randomly populated context under a random profile."""
    rng = random.Random(seed)
    b = ProgramBuilder(rng, profile=get_profile(PROFILE_NAMES[seed % len(PROFILE_NAMES)]))
    default_inner(b, rng.randint(0, 12))
    b.close_blocks()
    return wg.gen_module_shape(rng, b), b


def fake_clock():
    """Deterministic clock advancing one second per call."""
    n = [0]

    def clock():
        n[0] += 1
        return float(n[0])

    return clock

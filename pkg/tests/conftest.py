from __future__ import annotations

import os
import random
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

WASM_FEATURES = ("wasm_gc", "wasm_function_references", "wasm_exceptions", "wasm_memory64", "wasm_multi_memory",
                 "wasm_threads", "wasm_simd", "wasm_relaxed_simd", "wasm_reference_types", "wasm_multi_value",
                 "wasm_bulk_memory", "wasm_tail_call")

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def wasm_validate():
    """Returns None for a valid module, else the validator's message."""
    wasmtime = pytest.importorskip("wasmtime")
    cfg = wasmtime.Config()
    for f in WASM_FEATURES:
        setattr(cfg, f, True)
    engine = wasmtime.Engine(cfg)

    def check(data: bytes):
        try:
            wasmtime.Module.validate(engine, data)
            return None
        except Exception as e:  # wasmtime raises its own error types
            return str(e)

    return check


def find_shell() -> str | None:
    env = os.environ.get("WEAVER_SHELL")
    if env:
        return env if Path(env).exists() or shutil.which(env) else None
    for name in ("d8", "jsc", "js", "node"):
        p = shutil.which(name)
        if p:
            return p
    return None


@pytest.fixture(scope="session")
def programs():
    """A shared pool of generated programs."""
    from weaver.generation import GenerationEngine
    eng = GenerationEngine()
    rng = random.Random(1234)
    out = []
    for _ in range(150):
        g = eng.generate(rng)
        eng.record(g.credits, "Valid" if rng.random() < 0.7 else "RuntimeError")
        out.append(g.program)
    return out

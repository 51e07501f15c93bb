from __future__ import annotations

import shutil
import sys

import pytest
from hypothesis import given, strategies as st

from weaver.campaign.executor import (STDERR_LIMIT, EngineConfig, EngineUnavailable, OutcomeKind, classify, execute)
from weaver.campaign.stub_engine import evaluate, load_rules

STUB_PROCESS = EngineConfig(sys.executable, ("-m", "weaver.campaign.stub_engine"))
INLINE = EngineConfig("stub")
CRASHING = ('const v0 = new WebAssembly.Table({element:"externref", initial:1});\n'
            "const v1 = {};\nv0.__proto__ = v1;\n")


@pytest.mark.parametrize("cfg", [INLINE, STUB_PROCESS], ids=["inline", "process"])
def test_basic_outcomes(cfg):
    assert execute("1+1;\n", cfg).kind is OutcomeKind.VALID
    err = execute("throw new Error();\n", cfg)
    assert err.kind is OutcomeKind.RUNTIME_ERROR and err.exit_status == 1
    crash = execute(CRASHING, cfg)
    assert crash.kind is OutcomeKind.CRASH and crash.signal == 6
    assert "ASSERTION FAILED" in crash.stderr_excerpt
    assert execute("const x = ;\n", cfg).kind is OutcomeKind.RUNTIME_ERROR


def test_real_timeout_kills_the_process():
    out = execute("while(true){}\n", STUB_PROCESS)
    assert out.kind is OutcomeKind.TIMEOUT and 550 <= out.duration_ms < 3000
    assert execute("while(true){}\n", INLINE).kind is OutcomeKind.TIMEOUT


@pytest.mark.skipif(shutil.which("node") is None, reason="node not installed")
def test_node_outcomes():
    node = EngineConfig(shutil.which("node"))
    assert execute("1+1;\n", node).kind is OutcomeKind.VALID
    assert execute("throw new Error();\n", node).kind is OutcomeKind.RUNTIME_ERROR
    t = execute("while(true){}\n", node)
    assert t.kind is OutcomeKind.TIMEOUT and t.duration_ms >= 550


def test_stderr_is_truncated_and_markers_mean_crash():
    noisy = EngineConfig("sh", ("-c", "head -c 10000 /dev/zero | tr '\\0' x >&2; exit 3"))
    out = execute("", noisy)
    assert out.kind is OutcomeKind.RUNTIME_ERROR and out.exit_status == 3 and len(out.stderr_excerpt) == STDERR_LIMIT
    marker = EngineConfig("sh", ("-c", "echo 'Check failed: x' >&2; exit 1"), profile="v8")
    assert execute("", marker).kind is OutcomeKind.CRASH


def test_missing_engine_and_bad_config():
    with pytest.raises(EngineUnavailable):
        execute("1;", EngineConfig("/nonexistent/d8"))
    with pytest.raises(ValueError):
        EngineConfig("stub", timeout_ms=0)
    with pytest.raises(ValueError):
        EngineConfig("stub", profile="nope")


@given(st.one_of(st.none(), st.integers(-64, 255)), st.booleans(), st.text(max_size=40))
def test_classify_is_total_and_exclusive(rc, timed_out, stderr):
    k = classify(rc, timed_out, stderr, ("Check failed",))
    assert isinstance(k, OutcomeKind)
    if timed_out:
        assert k is OutcomeKind.TIMEOUT
    elif rc is not None and rc < 0:
        assert k is OutcomeKind.CRASH
    elif "Check failed" in stderr:
        assert k is OutcomeKind.CRASH
    elif rc == 0:
        assert k is OutcomeKind.VALID
    else:
        assert k is OutcomeKind.RUNTIME_ERROR


def test_custom_rules(tmp_path):
    f = tmp_path / "rules.json"
    f.write_text('[{"pattern": "Math\\\\.random", "outcome": "Crash", "message": "boom"}]')
    rules = load_rules(f)
    assert evaluate("const v0 = Math.random();\n", rules) == (OutcomeKind.CRASH, "boom")
    out = execute("const v0 = Math.random();\n", EngineConfig("stub", ("--rules", str(f))))
    assert out.kind is OutcomeKind.CRASH
    assert evaluate("Reflect = 1;\nconst v0 = Reflect;\n")[0] is OutcomeKind.RUNTIME_ERROR

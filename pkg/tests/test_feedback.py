from __future__ import annotations

import tempfile
from pathlib import Path

from hypothesis import given, settings, strategies as st

from weaver import ir
from weaver.campaign.executor import Outcome, OutcomeKind
from weaver.campaign.feedback import CoverageFileFeedback, StructuralFeedback, parse_coverage_dump, structural_features
from weaver.ir import Opcode, Program
from weaver.wasm_types import I32, Export, FuncType, Import, MemoryType, ModuleType, TableType, FUNCREF

from test_ir import running_example

VALID = Outcome(OutcomeKind.VALID, 0, 1.0)
ERROR = Outcome(OutcomeKind.RUNTIME_ERROR, 1, 1.0)


def with_import(t) -> Program:
    p = ir.append(Program(), Opcode.CreateWasmMemory, (), MemoryType(1)) if isinstance(t, MemoryType) else \
        ir.append(Program(), Opcode.CreateWasmTable, (), ir.WasmTableSpec(TableType(FUNCREF, 1), False))
    shape = ModuleType((), (Import("m", "x", t),), (Export("f", FuncType((I32,), ())),))
    p = ir.append(p, Opcode.CompileWasmModule, (), ir.WasmModuleBlob(b"", shape))
    return ir.append(p, Opcode.InstantiateWasmModule, (1, 0), (ir.ImportBinding("m", "x"),))


def test_structural_novelty():
    fb = StructuralFeedback()
    assert fb.evaluate(running_example(), VALID)
    assert not fb.evaluate(running_example(), VALID)
    assert fb.evaluate(with_import(MemoryType(1)), VALID)
    # same program shape but the import is fed by a table instead of a memory
    assert fb.evaluate(with_import(TableType(FUNCREF, 1)), VALID)
    assert "edge:CreateWasmTable>import:table" in structural_features(with_import(TableType(FUNCREF, 1)))


def test_only_clean_runs_contribute():
    fb = StructuralFeedback()
    assert not fb.evaluate(running_example(), ERROR)
    assert fb.evaluate(running_example(), VALID)


def test_deterministic_for_identical_state(programs):
    a, b = StructuralFeedback(), StructuralFeedback()
    assert [a.evaluate(p, VALID) for p in programs] == [b.evaluate(p, VALID) for p in programs]


def test_coverage_dump_feedback(tmp_path):
    fb = CoverageFileFeedback(str(tmp_path / "cov-{n}.txt"))
    (tmp_path / "cov-0.txt").write_text("")
    (tmp_path / "cov-1.txt").write_text("3 5:2 7:0")
    (tmp_path / "cov-2.txt").write_text("5 3")
    (tmp_path / "cov-3.txt").write_text("9:1 junk")
    results = [fb.evaluate(Program(), VALID) for _ in range(5)]  # run 4 has no dump
    assert results == [False, True, False, True, False]
    assert fb.bitmap == {3, 5, 9}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 50), max_size=10), max_size=10))
def test_coverage_bitmap_is_monotone(dumps):
    with tempfile.TemporaryDirectory() as d:
        fb = CoverageFileFeedback(str(Path(d) / "{n}.cov"))
        seen: set[int] = set()
        for k, hits in enumerate(dumps):
            (Path(d) / f"{k}.cov").write_text(" ".join(f"{x}:1" for x in hits))
            before = set(fb.bitmap)
            novel = fb.evaluate(Program(), VALID)
            assert before <= fb.bitmap
            assert novel == bool(set(hits) - seen)
            seen |= set(hits)
        assert fb.bitmap == seen

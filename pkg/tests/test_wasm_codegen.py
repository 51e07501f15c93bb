from __future__ import annotations

import json
import random

import pytest

from weaver import analyzer as an
from weaver import ir
from weaver import wasm_codegen as wg
from weaver.builder import ProgramBuilder
from weaver.ir import Opcode
from weaver.profiles import DEFAULT_BUDGET, GenerationBudget, get_profile, load_profile
from weaver.wasm_binary import HEADER, MalformedModule, canonical_shape, parse_shape, uleb
from weaver.wasm_types import (EXTERNREF, FUNCREF, I32, I64, V128, Export, FuncType, GlobalType, Import, MemoryType,
                               ModuleType, RefType, AbsHeap, TableType, TagType, mentions_excluded)

from helpers import random_shape


def builder(seed=0, profile="generic") -> ProgramBuilder:
    return ProgramBuilder(random.Random(seed), profile=get_profile(profile))


def test_memory_respects_budget_and_sharing():
    for seed in range(300):
        b = builder(seed)
        mt = wg.gen_wasm_memory(b.rng, b).payload
        assert mt.initial <= DEFAULT_BUDGET.memory_page_cap
        assert mt.maximum is None or mt.maximum >= mt.initial
        if mt.shared:
            assert mt.maximum is not None
    small = GenerationBudget(memory_page_cap=2)
    assert all(wg.gen_wasm_memory(random.Random(s), builder(s), small).payload.initial <= 2 for s in range(100))


def test_profile_without_memory64_never_uses_64_bit_addresses():
    for seed in range(300):
        b = builder(seed, "jsc")
        assert not wg.gen_wasm_memory(b.rng, b).payload.addr64
        assert not wg.gen_wasm_table(b.rng, b).payload.type.addr64


def test_table_global_and_tag_ranges():
    for seed in range(200):
        b = builder(seed)
        t = wg.gen_wasm_table(b.rng, b).payload.type
        assert t.element in wg.TABLE_ELEMENT_TYPES and t.initial <= DEFAULT_BUDGET.table_size_cap
        g = wg.gen_wasm_global(b.rng, b).payload.type
        assert g.content in wg.STANDALONE_VALUE_TYPES
        tag = wg.gen_wasm_tag(b.rng)
        assert len(tag.params) <= 4 and V128 not in tag.params


def test_table_uses_a_visible_initializer_when_one_fits():
    b = builder(1)
    b.emit(Opcode.LoadBuiltin, (), "Reflect")
    hits = 0
    for _ in range(50):
        ins = wg.gen_wasm_table(b.rng, b)
        if ins.payload.type.element == EXTERNREF:
            hits += bool(ins.inputs)
            assert ins.payload.with_init == bool(ins.inputs)
    assert hits > 0
    for seed in range(20):
        empty = builder(seed)
        assert not wg.gen_wasm_table(empty.rng, empty).inputs


def test_i64_global_initialised_from_bigint():
    b = builder(3)
    b.emit(Opcode.LoadBigInt, (), 7)
    seen = False
    for _ in range(200):
        ins = wg.gen_wasm_global(b.rng, b)
        if ins.payload.type.content is I64 and ins.inputs:
            assert b.analysis.js_type(ins.inputs[0]).flags == b.analysis.js_type(0).flags
            seen = True
    assert seen


def test_shapes_are_legal_and_within_budget():
    for seed in range(300):
        shape, _ = random_shape(seed)
        assert wg.shape_problems(shape) == []
        assert len(shape.imports) <= DEFAULT_BUDGET.max_imports and len(shape.exports) <= DEFAULT_BUDGET.max_exports
        assert not any(mentions_excluded(e.type) for e in shape.exports)
        assert canonical_shape(shape) == shape


def test_empty_shape_synthesizes_a_header_only_module(wasm_validate):
    code = wg.synthesize_minimal(ModuleType())
    assert code == HEADER and wasm_validate(code) is None
    assert parse_shape(code) == ModuleType()


def test_function_export_round_trips(wasm_validate):
    shape = ModuleType((), (), (Export("f", FuncType((I32,), (I64,))),))
    code = wg.synthesize_minimal(shape)
    assert wasm_validate(code) is None
    assert parse_shape(code) == canonical_shape(shape)


def test_imports_and_reexports_round_trip(wasm_validate):
    mem = MemoryType(1, 2)
    g = GlobalType(RefType(AbsHeap.EXTERN, False), False)
    shape = ModuleType((), (Import("m", "mem", mem), Import("m", "g", g)),
                       (Export("a", mem), Export("b", g), Export("c", TagType((I32,))), Export("d", TableType(FUNCREF, 1))))
    for seed in range(10):
        code = wg.synthesize_minimal(shape, seed)
        assert wasm_validate(code) is None
        assert parse_shape(code) == canonical_shape(shape)


def test_truncated_modules_are_rejected():
    with pytest.raises(MalformedModule):
        parse_shape(b"\x00asm")
    with pytest.raises(MalformedModule):
        parse_shape(HEADER + b"\x01" + uleb(10)[:1] + b"\x80")
    code = wg.synthesize_minimal(ModuleType((), (), (Export("f", FuncType((I32,), (I64,))),)))
    rejected = 0
    for n in range(len(HEADER) + 1, len(code)):
        # a cut on a section boundary is itself a well-formed, smaller module
        try:
            assert parse_shape(code[:n]).exports == ()
        except MalformedModule:
            rejected += 1
    assert rejected >= len(code) - len(HEADER) - 4


def test_budget_violations():
    big = ModuleType((), (), (Export("m", MemoryType(DEFAULT_BUDGET.memory_page_cap + 1)),))
    with pytest.raises(wg.ShapeTooLarge):
        wg.synthesize_minimal(big)
    many = ModuleType((), (), tuple(Export(f"e{i}", GlobalType(I32)) for i in range(DEFAULT_BUDGET.max_exports + 1)))
    with pytest.raises(wg.ShapeTooLarge):
        wg.synthesize_minimal(many)
    assert GenerationBudget().shrunk().max_exports == DEFAULT_BUDGET.max_exports // 2
    with pytest.raises(ValueError):
        GenerationBudget(max_imports=0)


def test_import_satisfaction():
    b = builder(4)
    n = b.out(Opcode.LoadNumber, (), 5)
    f = b.emit(Opcode.BeginFunction, (), 0).outputs[0]
    b.emit(Opcode.EndFunction)
    m = b.out(Opcode.CreateWasmMemory, (), MemoryType(2, 4))
    s = b.out(Opcode.LoadString, (), "x")
    a = b.analysis
    assert wg.import_satisfied_by(a, n, GlobalType(I32, False))
    assert not wg.import_satisfied_by(a, n, GlobalType(I32, True))
    assert not wg.import_satisfied_by(a, s, GlobalType(I32, False))
    assert wg.import_satisfied_by(a, f, FuncType((I32,), ()))
    assert wg.import_satisfied_by(a, m, MemoryType(1, None))
    assert wg.import_satisfied_by(a, m, MemoryType(2, 4))
    assert not wg.import_satisfied_by(a, m, MemoryType(3, None))
    assert not wg.import_satisfied_by(a, m, MemoryType(1, 3))
    assert wg.import_candidates(b.ctx, MemoryType(1)) == [m]


def test_instance_bindings_satisfy_imports(programs):
    checked = 0
    for p in programs:
        for idx, ins in enumerate(p.instructions):
            if ins.op is not Opcode.InstantiateWasmModule:
                continue
            a = an.analyze(p.instructions[:idx])
            shape = a.wasm_types[ins.inputs[0]]
            assert len(shape.imports) == len(ins.inputs) - 1
            for imp, v in zip(shape.imports, ins.inputs[1:]):
                assert wg.import_satisfied_by(a, v, imp.type)
                checked += 1
    assert checked > 0


def test_export_variables_carry_their_types():
    b = builder(5)
    for seed in range(20):
        ins = wg.gen_instance_and_exports(random.Random(seed), b)
        for e in ins[2:]:
            assert b.analysis.wasm_types[e.outputs[0]] == e.payload.type
    assert ir.is_valid(b.finish())


def test_command_synthesizer_rejects_bad_output():
    shape = ModuleType((), (), (Export("f", FuncType()),))
    with pytest.raises(wg.SynthesisFailed):
        wg.CommandSynthesizer(["true"]).synthesize(shape, 0)
    with pytest.raises(wg.SynthesisFailed):
        wg.CommandSynthesizer(["false"]).synthesize(shape, 0)
    with pytest.raises(wg.SynthesisFailed):
        wg.CommandSynthesizer(["/nonexistent/synth"]).synthesize(shape, 0)
    echo = wg.CommandSynthesizer(["sh", "-c", "cat"])
    assert parse_shape(echo.synthesize(shape, 0)) == canonical_shape(shape)
    with pytest.raises(ValueError):
        wg.make_synthesizer("nope")
    assert isinstance(wg.make_synthesizer("builtin"), wg.MinimalSynthesizer)


def test_profiles(tmp_path):
    assert not get_profile("generic").gc and get_profile("v8").gc
    assert "toResizableBuffer" in get_profile("generic").excluded_members
    with pytest.raises(ValueError):
        get_profile("nope")
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"name": "custom", "base": "v8", "gc": False, "excludedMembers": ["grow"]}))
    p = load_profile(f)
    assert p.name == "custom" and not p.gc and p.memory64 and p.excluded_members == {"grow"}

from __future__ import annotations

import random

from hypothesis import given, settings, strategies as st

from weaver import analyzer as an
from weaver import ir
from weaver import jstype as js
from weaver import wasm_types as wt
from weaver.conversion import to_wasm_value_types
from weaver.environment import DEFAULT_ENVIRONMENT
from weaver.ir import Opcode, Program
from weaver.jstype import Flag
from weaver.wasm_types import ANYREF, EXTERNREF, I32, AbsHeap, Category, GlobalType, MemoryType, RefType

from test_ir import running_example


def build(*steps) -> Program:
    p = Program()
    for s in steps:
        p = ir.append(p, *s)
    return p


def test_running_example_annotations():
    a = an.analyze(running_example())
    assert a.js_type(0) == DEFAULT_ENVIRONMENT.template("Reflect")
    assert {RefType(AbsHeap.EXTERN, False), RefType(AbsHeap.ANY, False), EXTERNREF, ANYREF} <= set(a.value_types(0))
    table = a.annotation(1)
    assert table.js.shape.group == "WebAssembly.Table"
    (idx,) = table.wasm.get(Category.TABLE)
    assert a.record.lookup(Category.TABLE, idx) == wt.TableType(EXTERNREF, 1, None)
    assert an.check_annotations(a) == []


def test_float_literal_is_not_integer():
    a = an.analyze(build((Opcode.LoadNumber, (), 3.5), (Opcode.LoadNumber, (), 3)))
    assert a.js_type(0) == js.NUMBER and a.js_type(1) == js.INTEGER
    assert I32 not in a.value_types(0) and I32 in a.value_types(1)
    assert {wt.F32, wt.F64} <= set(a.value_types(0))
    assert set(a.value_types(0)) == to_wasm_value_types(a.js_type(0))


def test_queries():
    p = build((Opcode.LoadNumber, (), 1), (Opcode.LoadString, (), "s"), (Opcode.LoadNull, ()),
              (Opcode.LoadUndefined, ()), (Opcode.CreateWasmMemory, (), MemoryType(1)),
              (Opcode.CreateWasmGlobal, (), ir.WasmGlobalSpec(GlobalType(I32, True), False)))
    ctx = an.Context.at(p)
    assert an.query_js(ctx, js.INTEGER) == [0]
    assert an.query_js_subsumed(ctx, js.STRING) == [1]
    assert 0 in an.query_wasm_value(ctx, I32) and 1 not in an.query_wasm_value(ctx, I32)
    # null converts to every nullable reference, undefined only to anyref and externref
    nf = RefType(AbsHeap.FUNC, True)
    assert 2 in an.query_wasm_value_strict(ctx, nf) and 3 not in an.query_wasm_value_strict(ctx, nf)
    assert 3 in an.query_wasm_value_strict(ctx, EXTERNREF)
    assert an.query_wasm_object(ctx, Category.MEMORY) == [4]
    assert an.query_wasm_object(ctx, Category.GLOBAL, lambda g: g.mutable) == [5]
    assert an.query_wasm_object(ctx, Category.GLOBAL, lambda g: not g.mutable) == []
    assert an.query_js(ctx, js.ANYTHING) == ctx.recent()


def test_builtin_overwrite_changes_later_loads():
    p = build((Opcode.LoadNumber, (), 926.73), (Opcode.StoreBuiltin, (0,), "WebAssembly"),
              (Opcode.LoadBuiltin, (), "WebAssembly"), (Opcode.LoadBuiltin, (), "WebAssembly.Memory"))
    a = an.analyze(p)
    assert a.js_type(1) == js.NUMBER
    assert a.js_type(2) == js.ANYTHING


def test_instance_exports_are_typed():
    f = wt.FuncType((I32,), (wt.I64,))
    shape = wt.ModuleType((), (), (wt.Export("f", f),))
    p = build((Opcode.CompileWasmModule, (), ir.WasmModuleBlob(b"", shape)))
    p = ir.append(p, Opcode.InstantiateWasmModule, (0,), ())
    p = ir.append(p, Opcode.WasmInstanceExport, (1,), ir.WasmExportRef("f", f))
    ctx = an.Context.at(p)
    sig = ctx.analysis.js_type(2).signature
    assert sig.wasm and sig.params == (js.NUMBER,) and sig.returns == js.BIGINT
    assert an.query_wasm_object(ctx, Category.FUNCTION) == [2]
    assert an.query_wasm_object(ctx, Category.INSTANCE) == [1]
    assert RefType(AbsHeap.FUNC, False) in ctx.analysis.value_types(2)


def test_function_return_type_joins_returns():
    p = build((Opcode.BeginFunction, (), 0), (Opcode.LoadString, (), "x"), (Opcode.Return, (1,)),
              (Opcode.EndFunction, ()), (Opcode.CallFunction, (0,), 0))
    a = an.analyze(p)
    assert a.js_type(2).flags == Flag.STRING | Flag.NULLISH


def test_pool_annotations_are_sound(programs):
    for p in programs:
        a = an.analyze(p)
        assert an.check_annotations(a) == []
        assert set(a.annotations) == set(range(p.next_variable))
        for v, canon in a.wasm_types.items():
            cat = wt.category_of(canon)
            (idx,) = a.annotations[v].wasm.get(cat)
            assert a.record.lookup(cat, idx) == canon


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 149), st.integers(0, 10**6))
def test_prefix_flow_sensitivity(programs, k, cut):
    """Annotations of a prefix never depend on later instructions."""
    p = programs[k]
    n = cut % (len(p) + 1)
    whole = an.analyze(p)
    head = an.analyze(p.instructions[:n])
    for v in head.annotations:
        assert head.js_type(v) == whole.js_type(v) or _rewritten_later(p, v, n)
    ctx = an.Context.at(p, n)
    for v in an.query_js(ctx, js.ANYTHING):
        assert ir.defining_index(p)[v] < n


def _rewritten_later(p: Program, v: int, n: int) -> bool:
    # a function's type is finalised at its end marker
    return any(i.op is Opcode.EndFunction for i in p.instructions[n:]) and p.instructions[
        ir.defining_index(p)[v]].op is Opcode.BeginFunction


def test_deterministic(programs):
    for p in programs[:30]:
        a, b = an.analyze(p), an.analyze(p)
        assert a.annotations == b.annotations and a.record.lists == b.record.lists

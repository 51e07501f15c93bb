from __future__ import annotations

import pytest

from weaver import ir
from weaver.campaign.stub_engine import parses
from weaver.ir import Instruction, Opcode, Program
from weaver.lifter import UnliftableProgram, lift
from weaver.wasm_types import EXTERNREF, FUNCREF, I32, I64, GlobalType, MemoryType, TableType, TagType

from test_ir import running_example


def build(*steps) -> Program:
    p = Program()
    for s in steps:
        p = ir.append(p, *s)
    return p


def test_running_example_source():
    assert lift(running_example()) == (
        "const v0 = Reflect;\n"
        'const v1 = new WebAssembly.Table({element:"externref", initial:1}, v0);\n'
        "v0.__proto__ = v1;\n")


def test_wasm_object_constructors():
    p = build((Opcode.CreateWasmMemory, (), MemoryType(63)),
              (Opcode.CreateWasmGlobal, (), ir.WasmGlobalSpec(GlobalType(I64, True), False)),
              (Opcode.CreateWasmTag, (), TagType((I32, EXTERNREF))),
              (Opcode.CreateWasmTable, (), ir.WasmTableSpec(TableType(FUNCREF, 2, 8), False)))
    src = lift(p)
    assert "const v0 = new WebAssembly.Memory({initial:63});" in src
    assert 'new WebAssembly.Global({value:"i64", mutable:true})' in src
    assert 'new WebAssembly.Tag({parameters:["i32", "externref"]})' in src
    assert 'element:"anyfunc"' in src and "maximum:8" in src
    assert parses(src)


def test_blocks_and_indentation():
    p = build((Opcode.BeginFunction, (), 1), (Opcode.BeginForLoop, (), 3), (Opcode.EndForLoop, ()),
              (Opcode.Return, (1,)), (Opcode.EndFunction, ()), (Opcode.BeginTry, ()), (Opcode.BeginCatch, ()),
              (Opcode.EndTry, ()))
    assert lift(p) == ("function v0(v1) {\n"
                       "  for (let v2 = 0; v2 < 3; v2++) {\n"
                       "  }\n"
                       "  return v1;\n"
                       "}\n"
                       "try {\n"
                       "} catch (v3) {\n"
                       "}\n")


def test_literals():
    p = build((Opcode.LoadNumber, (), -0.0), (Opcode.LoadNumber, (), float("nan")), (Opcode.LoadNumber, (), float("inf")),
              (Opcode.LoadBigInt, (), -5), (Opcode.LoadString, (), 'a"b\n '), (Opcode.LoadBoolean, (), True),
              (Opcode.CreateObject, (0, 1), ("a", "constructor")), (Opcode.UnaryOp, (0,), "typeof"),
              (Opcode.BinaryOp, (3, 3), "**"))
    src = lift(p)
    assert parses(src)
    assert "NaN" in src and "Infinity" in src and "-5n" in src


def test_unbalanced_program_rejected():
    with pytest.raises(UnliftableProgram):
        lift(Program((Instruction(Opcode.BeginTry),), 0))


def test_pool_sources_parse_and_are_deterministic(programs):
    for p in programs:
        src = lift(p)
        assert src.endswith("\n") and src == lift(p)
        assert parses(src), src

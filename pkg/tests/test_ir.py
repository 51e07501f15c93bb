from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from weaver import ir
from weaver.ir import Instruction, Opcode, Program
from weaver.wasm_types import EXTERNREF, TableType


def running_example() -> Program:
    p = ir.append(Program(), Opcode.LoadBuiltin, (), "Reflect")
    p = ir.append(p, Opcode.CreateWasmTable, (0,), ir.WasmTableSpec(TableType(EXTERNREF, 1, None), True))
    return ir.append(p, Opcode.SetProperty, (0, 1), "__proto__")


def kinds(p: Program) -> set[str]:
    return {v.kind for v in ir.validate_program(p)}


def test_every_opcode_has_a_contract():
    assert set(ir.CONTRACTS) == set(Opcode)


def test_append_assigns_fresh_dense_ids():
    p = ir.append(Program(), Opcode.LoadNumber, (), 1)
    assert p.instructions[0].outputs == (0,) and p.next_variable == 1
    p = ir.append(p, Opcode.LoadNumber, (), 2)
    p = ir.append(p, Opcode.BinaryOp, (0, 1), "+")
    assert p.instructions[-1] == Instruction(Opcode.BinaryOp, (0, 1), (2,), "+")
    assert ir.is_valid(p)


def test_append_rejects_undefined_input():
    with pytest.raises(ir.UndefinedInput):
        ir.append(Program(), Opcode.UnaryOp, (0,), "!")


def test_append_rejects_wrong_arity():
    p = ir.append(Program(), Opcode.LoadNumber, (), 1)
    with pytest.raises(ir.ArityMismatch):
        ir.append(p, Opcode.BinaryOp, (0,), "+")
    with pytest.raises(ir.ArityMismatch):
        ir.append(p, Opcode.BinaryOp, (0, 0), "no-such-op")


def test_running_example_is_three_valid_instructions():
    p = running_example()
    assert [i.op for i in p] == [Opcode.LoadBuiltin, Opcode.CreateWasmTable, Opcode.SetProperty]
    assert p.instructions[2].inputs == (0, 1)
    assert ir.validate_program(p) == []


def test_unterminated_try_reported_at_its_begin():
    p = ir.append(Program(), Opcode.LoadNumber, (), 1)
    p = ir.append(p, Opcode.BeginTry)
    vs = ir.validate_program(p)
    assert [(v.index, v.kind) for v in vs] == [(1, "UnbalancedBlock")]


def test_use_before_definition():
    p = Program((Instruction(Opcode.UnaryOp, (1,), (0,), "!"), Instruction(Opcode.LoadNumber, (), (1,), 3)), 2)
    assert "DefBeforeUse" in kinds(p)


def test_inner_scope_variable_not_visible_after_block():
    p = ir.append(Program(), Opcode.BeginFunction, (), 1)  # v0 function, v1 parameter
    p = ir.append(p, Opcode.EndFunction)
    assert ir.visible_variables(p) == [0]
    bad = Program(p.instructions + (Instruction(Opcode.UnaryOp, (1,), (2,), "!"),), 3)
    assert "DefBeforeUse" in kinds(bad)


def test_misplaced_return():
    p = ir.append(Program(), Opcode.LoadNumber, (), 1)
    p = Program(p.instructions + (Instruction(Opcode.Return, (0,), ()),), 1)
    assert kinds(p) == {"MisplacedReturn"}


def test_redefinition_and_gaps():
    dup = Program((Instruction(Opcode.LoadNumber, (), (0,), 1), Instruction(Opcode.LoadNumber, (), (0,), 2)), 1)
    assert "Redefinition" in kinds(dup)
    gap = Program((Instruction(Opcode.LoadNumber, (), (1,), 1),), 2)
    assert "NonDenseIds" in kinds(gap)


def test_stray_block_end():
    p = Program((Instruction(Opcode.EndForLoop),), 0)
    assert kinds(p) == {"UnbalancedBlock"}


def test_arity_violation_detected_on_raw_instruction():
    p = Program((Instruction(Opcode.LoadNumber, (), (0, 1), 1),), 2)
    assert "ArityMismatch" in kinds(p)


def test_renumber_is_dense_and_preserves_structure():
    p = running_example()
    shifted = Program(tuple(Instruction(i.op, tuple(v + 10 for v in i.inputs), tuple(v + 10 for v in i.outputs),
                                        i.payload) for i in p), 13)
    assert ir.renumber(shifted.instructions) == p


def test_pool_programs_are_valid(programs):
    for p in programs:
        assert ir.validate_program(p) == []
        assert ir.renumber(p.instructions) == p
        assert ir.block_depths(p)[-1] == 0


_SIMPLE = st.sampled_from(["num", "str", "bin", "un", "obj", "fn", "loop", "try"])


@settings(max_examples=200, deadline=None)
@given(st.lists(_SIMPLE, max_size=40), st.integers(0, 2**32))
def test_append_sequences_always_validate(steps, seed):
    rng = random.Random(seed)
    p = Program()
    open_blocks: list[Opcode] = []
    for s in steps:
        vis = ir.visible_variables(p)
        if s == "num" or not vis:
            p = ir.append(p, Opcode.LoadNumber, (), rng.randint(-5, 5))
        elif s == "str":
            p = ir.append(p, Opcode.LoadString, (), "x")
        elif s == "bin":
            p = ir.append(p, Opcode.BinaryOp, (rng.choice(vis), rng.choice(vis)), rng.choice(ir.BINARY_OPS))
        elif s == "un":
            p = ir.append(p, Opcode.UnaryOp, (rng.choice(vis),), rng.choice(ir.UNARY_OPS))
        elif s == "obj":
            p = ir.append(p, Opcode.CreateObject, (rng.choice(vis),), ("a",))
        elif s == "fn":
            p = ir.append(p, Opcode.BeginFunction, (), rng.randint(0, 2))
            open_blocks.append(Opcode.EndFunction)
        elif s == "loop":
            p = ir.append(p, Opcode.BeginForLoop, (), 3)
            open_blocks.append(Opcode.EndForLoop)
        else:
            p = ir.append(p, Opcode.BeginTry)
            p = ir.append(p, Opcode.BeginCatch)
            open_blocks.append(Opcode.EndTry)
    while open_blocks:
        p = ir.append(p, open_blocks.pop())
    assert ir.validate_program(p) == []
    assert set(ir.visible_variables(p)) <= set(range(p.next_variable))
    assert len(set(ir.defining_index(p))) == p.next_variable

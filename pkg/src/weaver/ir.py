"""Typed single-assignment IR: instructions over numbered variables.

Every opcode declares an arity contract (inputs, outputs, block-inner
outputs) computed from its payload. Block opcodes open and close scopes;
variables defined inside a block are not visible after it closes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from . import wasm_types as wt


class IRError(Exception):
    pass


class UndefinedInput(IRError):
    pass


class ArityMismatch(IRError):
    pass


class Opcode(enum.Enum):
    LoadBuiltin = "LoadBuiltin"
    LoadNumber = "LoadNumber"
    LoadBigInt = "LoadBigInt"
    LoadString = "LoadString"
    LoadBoolean = "LoadBoolean"
    LoadNull = "LoadNull"
    LoadUndefined = "LoadUndefined"
    CreateObject = "CreateObject"
    CreateArray = "CreateArray"
    GetProperty = "GetProperty"
    SetProperty = "SetProperty"
    StoreBuiltin = "StoreBuiltin"
    CallFunction = "CallFunction"
    CallMethod = "CallMethod"
    Construct = "Construct"
    BinaryOp = "BinaryOp"
    UnaryOp = "UnaryOp"
    BeginFunction = "BeginFunction"
    EndFunction = "EndFunction"
    Return = "Return"
    BeginTry = "BeginTry"
    BeginCatch = "BeginCatch"
    EndTry = "EndTry"
    BeginForLoop = "BeginForLoop"
    EndForLoop = "EndForLoop"
    CreateWasmMemory = "CreateWasmMemory"
    CreateWasmTable = "CreateWasmTable"
    CreateWasmGlobal = "CreateWasmGlobal"
    CreateWasmTag = "CreateWasmTag"
    CompileWasmModule = "CompileWasmModule"
    InstantiateWasmModule = "InstantiateWasmModule"
    WasmInstanceExport = "WasmInstanceExport"

    def __repr__(self):
        return self.value


BINARY_OPS = ("+", "-", "*", "/", "%", "**", "&", "|", "^", "<<", ">>", ">>>", "==", "===", "!=", "<", "<=", ">",
              ">=", "&&", "||", "??")
UNARY_OPS = ("-", "+", "~", "!", "typeof")


# Payloads ------------------------------------------------------------------


@dataclass(frozen=True)
class MethodCall:
    name: str
    argc: int


@dataclass(frozen=True)
class WasmTableSpec:
    type: wt.TableType
    with_init: bool = False


@dataclass(frozen=True)
class WasmGlobalSpec:
    type: wt.GlobalType
    with_init: bool = False


@dataclass(frozen=True)
class WasmModuleBlob:
    code: bytes
    shape: wt.ModuleType


@dataclass(frozen=True)
class ImportBinding:
    module: str
    name: str


@dataclass(frozen=True)
class WasmExportRef:
    name: str
    type: Any  # canonical extern type


# Contracts -----------------------------------------------------------------


@dataclass(frozen=True)
class Contract:
    payload: type | tuple[type, ...]
    inputs: Callable[[Any], int]
    outputs: Callable[[Any], int]
    inner: Callable[[Any], int] = lambda p: 0
    block: str | None = None  # "begin", "middle", "end"
    block_kind: str | None = None


def _n(k):
    return lambda p: k


def _is_name(p):
    return isinstance(p, str) and p != ""


NONE_T = type(None)

CONTRACTS: dict[Opcode, Contract] = {
    Opcode.LoadBuiltin: Contract(str, _n(0), _n(1)),
    Opcode.LoadNumber: Contract((int, float), _n(0), _n(1)),
    Opcode.LoadBigInt: Contract(int, _n(0), _n(1)),
    Opcode.LoadString: Contract(str, _n(0), _n(1)),
    Opcode.LoadBoolean: Contract(bool, _n(0), _n(1)),
    Opcode.LoadNull: Contract(NONE_T, _n(0), _n(1)),
    Opcode.LoadUndefined: Contract(NONE_T, _n(0), _n(1)),
    Opcode.CreateObject: Contract(tuple, lambda p: len(p), _n(1)),
    Opcode.CreateArray: Contract(int, lambda p: p, _n(1)),
    Opcode.GetProperty: Contract(str, _n(1), _n(1)),
    Opcode.SetProperty: Contract(str, _n(2), _n(0)),
    Opcode.StoreBuiltin: Contract(str, _n(1), _n(0)),
    Opcode.CallFunction: Contract(int, lambda p: 1 + p, _n(1)),
    Opcode.CallMethod: Contract(MethodCall, lambda p: 1 + p.argc, _n(1)),
    Opcode.Construct: Contract(int, lambda p: 1 + p, _n(1)),
    Opcode.BinaryOp: Contract(str, _n(2), _n(1)),
    Opcode.UnaryOp: Contract(str, _n(1), _n(1)),
    Opcode.BeginFunction: Contract(int, _n(0), lambda p: 1 + p, lambda p: p, "begin", "function"),
    Opcode.EndFunction: Contract(NONE_T, _n(0), _n(0), block="end", block_kind="function"),
    Opcode.Return: Contract(NONE_T, _n(1), _n(0)),
    Opcode.BeginTry: Contract(NONE_T, _n(0), _n(0), block="begin", block_kind="try"),
    Opcode.BeginCatch: Contract(NONE_T, _n(0), _n(1), _n(1), "middle", "try"),
    Opcode.EndTry: Contract(NONE_T, _n(0), _n(0), block="end", block_kind="catch"),
    Opcode.BeginForLoop: Contract(int, _n(0), _n(1), _n(1), "begin", "loop"),
    Opcode.EndForLoop: Contract(NONE_T, _n(0), _n(0), block="end", block_kind="loop"),
    Opcode.CreateWasmMemory: Contract(wt.MemoryType, _n(0), _n(1)),
    Opcode.CreateWasmTable: Contract(WasmTableSpec, lambda p: int(p.with_init), _n(1)),
    Opcode.CreateWasmGlobal: Contract(WasmGlobalSpec, lambda p: int(p.with_init), _n(1)),
    Opcode.CreateWasmTag: Contract(wt.TagType, _n(0), _n(1)),
    Opcode.CompileWasmModule: Contract(WasmModuleBlob, _n(0), _n(1)),
    Opcode.InstantiateWasmModule: Contract(tuple, lambda p: 1 + len(p), _n(1)),
    Opcode.WasmInstanceExport: Contract(WasmExportRef, _n(1), _n(1)),
}

WASM_OPCODES = frozenset(op for op in Opcode if op.value.startswith(("CreateWasm", "CompileWasm", "InstantiateWasm",
                                                                     "WasmInstance")))


def _payload_ok(op: Opcode, payload) -> bool:
    c = CONTRACTS[op]
    if op is Opcode.LoadNumber and isinstance(payload, bool):
        return False
    if op in (Opcode.LoadBigInt, Opcode.CreateArray, Opcode.CallFunction, Opcode.Construct, Opcode.BeginFunction,
              Opcode.BeginForLoop) and isinstance(payload, bool):
        return False
    if not isinstance(payload, c.payload):
        return False
    if op is Opcode.CreateObject:
        return all(_is_name(n) for n in payload) and len(set(payload)) == len(payload)
    if op is Opcode.InstantiateWasmModule:
        return all(isinstance(b, ImportBinding) for b in payload)
    if op is Opcode.BinaryOp:
        return payload in BINARY_OPS
    if op is Opcode.UnaryOp:
        return payload in UNARY_OPS
    if op in (Opcode.GetProperty, Opcode.SetProperty, Opcode.LoadBuiltin, Opcode.StoreBuiltin):
        return _is_name(payload)
    if op in (Opcode.CreateArray, Opcode.CallFunction, Opcode.Construct, Opcode.BeginFunction):
        return payload >= 0
    if op is Opcode.BeginForLoop:
        return payload >= 0
    if op is Opcode.CallMethod:
        return _is_name(payload.name) and payload.argc >= 0
    return True


@dataclass(frozen=True)
class Instruction:
    op: Opcode
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()
    payload: Any = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def contract(self) -> Contract:
        return CONTRACTS[self.op]

    @property
    def inner_outputs(self) -> tuple[int, ...]:
        k = self.contract.inner(self.payload)
        return self.outputs[len(self.outputs) - k:] if k else ()

    @property
    def outer_outputs(self) -> tuple[int, ...]:
        k = self.contract.inner(self.payload)
        return self.outputs[: len(self.outputs) - k]

    def arity_errors(self) -> list[str]:
        if not _payload_ok(self.op, self.payload):
            return [f"bad payload {self.payload!r} for {self.op.value}"]
        c = self.contract
        errs = []
        if len(self.inputs) != c.inputs(self.payload):
            errs.append(f"{self.op.value} expects {c.inputs(self.payload)} inputs, got {len(self.inputs)}")
        if len(self.outputs) != c.outputs(self.payload):
            errs.append(f"{self.op.value} expects {c.outputs(self.payload)} outputs, got {len(self.outputs)}")
        return errs

    def __str__(self):
        outs = ", ".join(f"v{o}" for o in self.outputs)
        ins = ", ".join(f"v{i}" for i in self.inputs)
        head = f"{outs} <- " if outs else ""
        pay = "" if self.payload is None else f" {self.payload!r}"
        return f"{head}{self.op.value}{pay}({ins})"


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...] = ()
    next_variable: int = 0

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __getitem__(self, i):
        return self.instructions[i]

    def __str__(self):
        return "\n".join(str(i) for i in self.instructions)


@dataclass(frozen=True)
class Violation:
    index: int
    kind: str
    message: str = ""


class _Scopes:
    def __init__(self):
        self.stack: list[set[int]] = [set()]
        self.blocks: list[tuple[str, int]] = []
        self.defined: set[int] = set()

    def visible(self, v: int) -> bool:
        return any(v in s for s in self.stack)


def validate_program(program: Program) -> list[Violation]:
    out: list[Violation] = []
    sc = _Scopes()
    for idx, ins in enumerate(program.instructions):
        errs = ins.arity_errors()
        for e in errs:
            out.append(Violation(idx, "ArityMismatch", e))
        if errs and not _payload_ok(ins.op, ins.payload):
            continue
        for v in ins.inputs:
            if not sc.visible(v):
                out.append(Violation(idx, "DefBeforeUse", f"v{v} used before definition"))
        c = ins.contract
        if ins.op is Opcode.Return and not any(k == "function" for k, _ in sc.blocks):
            out.append(Violation(idx, "MisplacedReturn", "return outside of a function"))

        def define(vs, scope):
            for v in vs:
                if v in sc.defined:
                    out.append(Violation(idx, "Redefinition", f"v{v} defined twice"))
                if not 0 <= v < program.next_variable:
                    out.append(Violation(idx, "NonDenseIds", f"v{v} outside [0, {program.next_variable})"))
                sc.defined.add(v)
                scope.add(v)

        if c.block == "begin":
            define(ins.outer_outputs, sc.stack[-1])
            sc.blocks.append((c.block_kind, idx))
            sc.stack.append(set())
            define(ins.inner_outputs, sc.stack[-1])
        elif c.block == "middle":
            if not sc.blocks or sc.blocks[-1][0] != c.block_kind:
                out.append(Violation(idx, "UnbalancedBlock", f"{ins.op.value} without matching begin"))
                continue
            _, begin = sc.blocks.pop()
            sc.stack.pop()
            sc.blocks.append(("catch", begin))
            sc.stack.append(set())
            define(ins.inner_outputs, sc.stack[-1])
        elif c.block == "end":
            if not sc.blocks or sc.blocks[-1][0] != c.block_kind:
                out.append(Violation(idx, "UnbalancedBlock", f"{ins.op.value} without matching begin"))
                continue
            sc.blocks.pop()
            sc.stack.pop()
        else:
            define(ins.outputs, sc.stack[-1])
    for kind, begin in sc.blocks:
        out.append(Violation(begin, "UnbalancedBlock", f"unterminated {kind} block"))
    if len(sc.defined) != program.next_variable:
        missing = sorted(set(range(program.next_variable)) - sc.defined)
        out.append(Violation(len(program.instructions), "NonDenseIds", f"ids never defined: {missing[:5]}"))
    return out


def is_valid(program: Program) -> bool:
    return not validate_program(program)


def make(op: Opcode, inputs: Sequence[int] = (), payload=None, *, first_output: int) -> Instruction:
    n = CONTRACTS[op].outputs(payload)
    return Instruction(op, tuple(inputs), tuple(range(first_output, first_output + n)), payload)


def append(program: Program, op: Opcode, inputs: Sequence[int] = (), payload=None) -> Program:
    """Return ``program`` with one more instruction whose outputs are fresh variables."""
    if not _payload_ok(op, payload):
        raise ArityMismatch(f"bad payload {payload!r} for {op.value}")
    c = CONTRACTS[op]
    if len(inputs) != c.inputs(payload):
        raise ArityMismatch(f"{op.value} expects {c.inputs(payload)} inputs, got {len(inputs)}")
    visible = visible_variables(program)
    for v in inputs:
        if v not in visible:
            raise UndefinedInput(f"v{v} is not defined at this point")
    ins = make(op, inputs, payload, first_output=program.next_variable)
    return Program(program.instructions + (ins,), program.next_variable + len(ins.outputs))


def visible_variables(program: Program | Iterable[Instruction], upto: int | None = None) -> list[int]:
    """Variables in scope after executing the first ``upto`` instructions, in definition order."""
    instrs = program.instructions if isinstance(program, Program) else tuple(program)
    if upto is not None:
        instrs = instrs[:upto]
    stack: list[list[int]] = [[]]
    for ins in instrs:
        c = ins.contract
        if c.block == "begin":
            stack[-1].extend(ins.outer_outputs)
            stack.append(list(ins.inner_outputs))
        elif c.block == "middle":
            stack.pop()
            stack.append(list(ins.inner_outputs))
        elif c.block == "end":
            if len(stack) > 1:
                stack.pop()
        else:
            stack[-1].extend(ins.outputs)
    return [v for s in stack for v in s]


def block_depths(program: Program) -> list[int]:
    """Nesting depth before each instruction (length n+1: includes the end)."""
    depths = [0]
    d = 0
    for ins in program.instructions:
        b = ins.contract.block
        if b == "begin":
            d += 1
        elif b == "end":
            d -= 1
        depths.append(d)
    return depths


def renumber(instructions: Iterable[Instruction], start: int = 0) -> Program:
    """Rename variables densely in order of definition."""
    mapping: dict[int, int] = {}
    out = []
    nxt = start
    for ins in instructions:
        ins_inputs = tuple(mapping[v] for v in ins.inputs)
        outs = []
        for v in ins.outputs:
            mapping[v] = nxt
            outs.append(nxt)
            nxt += 1
        out.append(Instruction(ins.op, ins_inputs, tuple(outs), ins.payload))
    return Program(tuple(out), nxt)


def defining_index(program: Program) -> dict[int, int]:
    return {v: i for i, ins in enumerate(program.instructions) for v in ins.outputs}

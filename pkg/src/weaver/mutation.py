"""Mutators over IR programs and the consecutive-mutation pipeline."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import analyzer as an
from . import ir
from . import scheduler as sch
from . import wasm_types as wt
from .environment import DEFAULT_ENVIRONMENT, StaticTypeEnvironment
from .ir import Instruction, Opcode, Program
from .js_codegen import INTERESTING_BIGINTS, INTERESTING_FLOATS, INTERESTING_INTS, INTERESTING_STRINGS, PROPERTY_NAMES
from .profiles import FeatureProfile, get_profile
from .wasm_codegen import import_satisfied_by

MAX_PROGRAM_SIZE = 200
MAX_SLICE_SIZE = 40


class NoCompatibleSlice(Exception):
    pass


class NoCompatibleVariable(Exception):
    pass


# Dual-type compatibility --------------------------------------------------------


def dual_compatible(da: an.Analysis, d: int, ta: an.Analysis, t: int) -> bool:
    """Can ``t`` (in ``ta``) stand in for ``d`` (in ``da``) on both the JS and the Wasm side?"""
    dn, tn = da.annotations[d], ta.annotations[t]
    if not dn.js.intersects(tn.js):
        return False
    dv, tv = dn.values(da.record), tn.values(ta.record)
    if dv and not any(wt.matches(x, y) for x in dv for y in tv):
        return False
    own = da.wasm_types.get(d)
    if own is None:
        return True
    if isinstance(own, (wt.MemoryType, wt.TableType, wt.TagType, wt.FuncType)):
        return import_satisfied_by(ta, t, own) and isinstance(ta.wasm_types.get(t), type(own))
    return ta.wasm_types.get(t) == own


def _prefer_strict(rng: random.Random, da: an.Analysis, d: int, ta: an.Analysis, cands: list[int]) -> int:
    want = da.js_type(d)
    strict = [c for c in cands if ta.js_type(c).is_(want)]
    if strict and rng.random() < 0.8:
        return rng.choice(strict)
    return rng.choice(cands)


# Feature filtering ----------------------------------------------------------------

_GC_HEAPS = frozenset({wt.AbsHeap.ANY, wt.AbsHeap.EQ, wt.AbsHeap.I31, wt.AbsHeap.STRUCT, wt.AbsHeap.ARRAY,
                       wt.AbsHeap.NONE})


def _type_features(t, out: set[str]):
    if any(leaf is wt.NumType.V128 for leaf in wt._iter_leaves(t)):
        out.add("simd")
    for h in wt._iter_heaps(t):
        if not isinstance(h, wt.AbsHeap) or h in _GC_HEAPS:
            out.add("gc")
        elif h in (wt.AbsHeap.EXN, wt.AbsHeap.NOEXN):
            out.add("exceptions")


def instruction_features(ins: Instruction) -> set[str]:
    out: set[str] = set()
    p = ins.payload
    if ins.op is Opcode.CreateWasmMemory:
        if p.addr64:
            out.add("memory64")
    elif ins.op is Opcode.CreateWasmTable:
        _type_features(p.type.element, out)
        if p.type.addr64:
            out.add("memory64")
    elif ins.op is Opcode.CreateWasmGlobal:
        _type_features(p.type.content, out)
    elif ins.op is Opcode.CreateWasmTag:
        out.add("exceptions")
        for t in p.params:
            _type_features(t, out)
    elif ins.op is Opcode.CompileWasmModule:
        shape = p.shape
        for g in shape.type_defs:
            for d in g:
                if isinstance(d, (wt.StructType, wt.ArrayType)) or len(g) > 1:
                    out.add("gc")
                _type_features(d, out)
        mems = 0
        for ent in list(shape.imports) + list(shape.exports):
            t = ent.type
            if isinstance(t, wt.MemoryType):
                mems += 1
                if t.addr64:
                    out.add("memory64")
            elif isinstance(t, wt.TagType):
                out.add("exceptions")
            _type_features(t, out)
        if mems > 1:
            out.add("multiMemory")
    elif ins.op is Opcode.WasmInstanceExport:
        _type_features(p.type, out)
    return out


def allowed_by(instrs: Sequence[Instruction], profile: FeatureProfile) -> bool:
    return all(profile.enabled(f) for ins in instrs for f in instruction_features(ins))


# Slices ---------------------------------------------------------------------------


def top_level_statements(program: Program) -> list[tuple[int, int]]:
    """Inclusive [start, end] ranges of depth-0 statements (a whole block counts as one)."""
    out, depth, start = [], 0, 0
    for i, ins in enumerate(program.instructions):
        c = ins.contract
        if c.block == "begin":
            if depth == 0:
                start = i
            depth += 1
        elif c.block == "end":
            depth -= 1
            if depth == 0:
                out.append((start, i))
        elif depth == 0:
            out.append((i, i))
    return out


def def_closure(program: Program, stmt: int, stmts: list[tuple[int, int]] | None = None) -> list[int]:
    """Indices of the statements needed to define every free input of statement ``stmt``."""
    stmts = stmts or top_level_statements(program)
    owner: dict[int, int] = {}
    for k, (s, e) in enumerate(stmts):
        for ins in program.instructions[s:e + 1]:
            for v in ins.outputs:
                owner[v] = k
    need, todo = {stmt}, [stmt]
    while todo:
        k = todo.pop()
        s, e = stmts[k]
        for ins in program.instructions[s:e + 1]:
            for v in ins.inputs:
                o = owner.get(v)
                if o is not None and o != k and o not in need:
                    need.add(o)
                    todo.append(o)
    return sorted(need)


_PURE_LOADS = frozenset({Opcode.LoadBuiltin, Opcode.LoadNumber, Opcode.LoadBigInt, Opcode.LoadString,
                         Opcode.LoadBoolean, Opcode.LoadNull, Opcode.LoadUndefined})


@dataclass
class SpliceResult:
    program: Program
    insertion: int
    slice_len: int
    remapped: list[tuple[int, int]] = field(default_factory=list)  # (donor var, target var)


def splice_detailed(target: Program, donor: Program, rng: random.Random,
                    env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT, profile: FeatureProfile | None = None,
                    record: wt.WasmTypeRecord | None = None, remap_p: float = 0.5) -> SpliceResult:
    if not donor.instructions:
        raise NoCompatibleSlice("empty donor")
    profile = profile or get_profile("generic")
    stmts = top_level_statements(donor)
    chosen: list[Instruction] | None = None
    for _ in range(6):
        idxs = def_closure(donor, rng.randrange(len(stmts)), stmts)
        instrs = [ins for k in idxs for ins in donor.instructions[stmts[k][0]:stmts[k][1] + 1]]
        if len(instrs) <= MAX_SLICE_SIZE and allowed_by(instrs, profile):
            chosen = instrs
            break
    if chosen is None:
        raise NoCompatibleSlice("no slice fits the profile and size limits")
    if len(target.instructions) + len(chosen) > MAX_PROGRAM_SIZE:
        raise NoCompatibleSlice("result would exceed the program size limit")

    da = an.analyze(donor, env)
    ta = an.analyze(target, env, record)
    points = [0] + [e + 1 for _, e in top_level_statements(target)]
    at = rng.choice(points)
    visible = ir.visible_variables(target, at)

    # donor variables used inside the slice that could be replaced by target ones
    used = {v for ins in chosen for v in ins.inputs}
    remappable = [ins.outputs[0] for ins in chosen
                  if ins.contract.block is None and len(ins.outputs) == 1 and ins.outputs[0] in used]
    mapping: dict[int, int] = {}
    for d in remappable:
        if rng.random() >= remap_p:
            continue
        cands = [t for t in visible if dual_compatible(da, d, ta, t)]
        if cands:
            mapping[d] = _prefer_strict(rng, da, d, ta, cands)

    # fresh ids for the slice, remapped uses point at target variables
    fresh: dict[int, int] = {}
    nxt = target.next_variable
    body: list[Instruction] = []
    for ins in chosen:
        if ins.outputs and all(o in mapping for o in ins.outputs) and ins.op in _PURE_LOADS:
            continue  # definition replaced by a target variable
        outs = []
        for o in ins.outputs:
            fresh[o] = nxt
            outs.append(nxt)
            nxt += 1
        ins_in = tuple(mapping[v] if v in mapping else fresh[v] for v in ins.inputs)
        body.append(Instruction(ins.op, ins_in, tuple(outs), ins.payload))

    merged = list(target.instructions[:at]) + body + list(target.instructions[at:])
    out = ir.renumber(merged)
    # target variables defined before the insertion point keep their ids
    return SpliceResult(out, at, len(body), sorted(mapping.items()))


def splice(target: Program, donor: Program, rng: random.Random, **kw) -> Program:
    return splice_detailed(target, donor, rng, **kw).program


# Operation mutator ----------------------------------------------------------------


def _other(rng: random.Random, pool, current):
    choices = [x for x in pool if x != current and not (isinstance(x, float) and x != x and current != current)]
    return rng.choice(choices) if choices else current


def _mutate_payload(ins: Instruction, rng: random.Random, env: StaticTypeEnvironment):
    op, p = ins.op, ins.payload
    if op in (Opcode.LoadBuiltin, Opcode.StoreBuiltin):
        return _other(rng, env.loadable, p)
    if op is Opcode.LoadNumber:
        return _other(rng, INTERESTING_INTS + INTERESTING_FLOATS, p)
    if op is Opcode.LoadBigInt:
        return _other(rng, INTERESTING_BIGINTS, p)
    if op is Opcode.LoadString:
        return _other(rng, INTERESTING_STRINGS, p)
    if op is Opcode.LoadBoolean:
        return not p
    if op is Opcode.BinaryOp:
        return _other(rng, ir.BINARY_OPS, p)
    if op is Opcode.UnaryOp:
        return _other(rng, ir.UNARY_OPS, p)
    if op in (Opcode.GetProperty, Opcode.SetProperty):
        return _other(rng, PROPERTY_NAMES, p)
    if op is Opcode.BeginForLoop:
        return rng.randint(50, 500)
    if op is Opcode.CreateObject and p:
        names = list(p)
        k = rng.randrange(len(names))
        fresh = [n for n in ("a", "b", "c", "x", "y", "z", "valueOf", "length") if n not in names]
        if fresh:
            names[k] = rng.choice(fresh)
        return tuple(names)
    return None


_MUTABLE_OPS = frozenset({Opcode.LoadBuiltin, Opcode.StoreBuiltin, Opcode.LoadNumber, Opcode.LoadBigInt,
                          Opcode.LoadString, Opcode.LoadBoolean, Opcode.BinaryOp, Opcode.UnaryOp,
                          Opcode.GetProperty, Opcode.SetProperty, Opcode.BeginForLoop, Opcode.CreateObject})


def operation_mutator(p: Program, rng: random.Random, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT) -> Program:
    """Swap one instruction's payload within its opcode family; arity is untouched."""
    if not p.instructions:
        raise ValueError("empty program")
    idxs = [i for i, ins in enumerate(p.instructions) if ins.op in _MUTABLE_OPS]
    if not idxs:
        return p
    i = rng.choice(idxs)
    ins = p.instructions[i]
    new = _mutate_payload(ins, rng, env)
    if new is None:
        return p
    instrs = list(p.instructions)
    instrs[i] = replace(ins, payload=new)
    return Program(tuple(instrs), p.next_variable)


# Input mutator and combine --------------------------------------------------------


@dataclass
class Rewire:
    program: Program
    index: int
    slot: int
    old: int
    new: int


def input_mutator_detailed(p: Program, rng: random.Random, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT,
                           tries: int = 8) -> Rewire:
    a = an.analyze(p, env)
    sites = [(i, j) for i, ins in enumerate(p.instructions) for j in range(len(ins.inputs))]
    rng.shuffle(sites)
    for i, j in sites[:tries]:
        ins = p.instructions[i]
        old = ins.inputs[j]
        cands = [v for v in ir.visible_variables(p, i) if v != old and dual_compatible(a, old, a, v)]
        if not cands:
            continue
        new = _prefer_strict(rng, a, old, a, cands)
        inputs = list(ins.inputs)
        inputs[j] = new
        instrs = list(p.instructions)
        instrs[i] = replace(ins, inputs=tuple(inputs))
        return Rewire(Program(tuple(instrs), p.next_variable), i, j, old, new)
    raise NoCompatibleVariable("no input has a compatible replacement")


def input_mutator(p: Program, rng: random.Random, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT) -> Program:
    return input_mutator_detailed(p, rng, env).program


def combine(p: Program, q: Program, rng: random.Random | None = None) -> Program:
    """Concatenate two programs, renumbering ``q`` after ``p``."""
    return ir.renumber(list(p.instructions) + list(ir.renumber(q.instructions, p.next_variable).instructions))


# Pipeline -------------------------------------------------------------------------

MUTATOR_NAMES = ("SpliceMutator", "OperationMutator", "InputMutator", "CombineMutator")


def mutator_scheduler(rebalance_interval: int = sch.DEFAULT_REBALANCE_INTERVAL) -> sch.SchedulerState:
    return sch.SchedulerState.create(list(MUTATOR_NAMES), rebalance_interval=rebalance_interval)


@dataclass
class Mutated:
    program: Program
    applied: list[int]  # mutator arm indices, in application order
    noop: bool = False


def mutate_pipeline(seed: Program, rng: random.Random, scheduler: sch.SchedulerState,
                    donors: Sequence[Program] = (), env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT,
                    profile: FeatureProfile | None = None, k: int | None = None) -> Mutated:
    """Apply k in [1, 5] consecutive scheduler-chosen mutations; NoOp if none of them sticks."""
    k = k if k is not None else rng.randint(1, 5)
    donors = list(donors) or [seed]
    cur, applied = seed, []
    for _ in range(k):
        arm = sch.select(scheduler, rng)
        try:
            if arm == 0:
                nxt = splice(cur, rng.choice(donors), rng, env=env, profile=profile)
            elif arm == 1:
                nxt = operation_mutator(cur, rng, env)
            elif arm == 2:
                nxt = input_mutator(cur, rng, env)
            else:
                other = rng.choice(donors)
                if len(cur.instructions) + len(other.instructions) > MAX_PROGRAM_SIZE:
                    continue
                nxt = combine(cur, other)
        except (NoCompatibleSlice, NoCompatibleVariable):
            continue
        if nxt is cur or ir.validate_program(nxt):
            continue
        cur = nxt
        applied.append(arm)
    if not applied:
        return Mutated(seed, [], True)
    return Mutated(cur, applied)


def record_mutators(scheduler: sch.SchedulerState, applied: Sequence[int], outcome: str):
    """Every mutator in the chain is credited with the final outcome."""
    for arm in applied:
        sch.record(scheduler, arm, outcome)

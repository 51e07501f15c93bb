"""Wasm generators, module-shape construction and module synthesis."""

from __future__ import annotations

import random
import subprocess
from dataclasses import dataclass
from typing import Protocol, Sequence

from . import analyzer as an
from . import ir
from . import wasm_types as wt
from .builder import InsufficientContext, ProgramBuilder
from .ir import Opcode
from .jstype import Flag
from .profiles import DEFAULT_BUDGET, FeatureProfile, GenerationBudget
from .wasm_binary import ModuleBuilder, _TypeIndex, canonical_shape, default_const, extern_kind, parse_shape, \
    stub_body
from .wasm_types import (
    ANYREF, ARRAYREF, EQREF, EXNREF, EXTERNREF, FUNCREF, I31REF, NULLEXTERNREF, NULLFUNCREF, NULLREF, STRUCTREF,
    AbsHeap, ArrayType, Category, DefType, Export, FieldType, FuncType, GlobalType, Import, MemoryType, ModuleType,
    NumType, PackedType, RefType, StructType, TableType, TagType,
)

ModuleShape = ModuleType


class SynthesisFailed(Exception):
    pass


class ShapeTooLarge(SynthesisFailed):
    pass


STANDALONE_VALUE_TYPES = (NumType.I32, NumType.I64, NumType.F32, NumType.F64, FUNCREF, EXTERNREF)
TABLE_ELEMENT_TYPES = (FUNCREF, EXTERNREF)
_NUMERIC = (NumType.I32, NumType.I64, NumType.F32, NumType.F64)


def value_palette(profile: FeatureProfile, defs: Sequence = (), *, unrestricted=False, nullable_only=False) -> list:
    """Value types usable in module-level positions under ``profile``.

    ``unrestricted`` admits v128 and exnref, which step 4 of shape generation
    later filters from the boundary.
    """
    out: list = list(_NUMERIC) + [FUNCREF, EXTERNREF]
    if unrestricted and profile.simd:
        out.append(NumType.V128)
    if profile.gc:
        out += [ANYREF, EQREF, I31REF, STRUCTREF, ARRAYREF, NULLREF, NULLFUNCREF, NULLEXTERNREF]
        out += [RefType(d, True) for d in defs]
        if not nullable_only:
            out += [RefType(h, False) for h in (AbsHeap.ANY, AbsHeap.EXTERN, AbsHeap.FUNC, AbsHeap.I31, AbsHeap.EQ)]
            out += [RefType(d, False) for d in defs]
        if unrestricted and profile.exceptions:
            out.append(EXNREF)
    return out


def shape_problems(shape: ModuleType) -> list[str]:
    probs = []
    pairs = [(i.module, i.name) for i in shape.imports]
    if len(pairs) != len(set(pairs)):
        probs.append("duplicate import pair")
    names = [e.name for e in shape.exports]
    if len(names) != len(set(names)):
        probs.append("duplicate export name")
    for ent in list(shape.imports) + list(shape.exports):
        if wt.mentions_excluded(ent.type):
            probs.append(f"{getattr(ent, 'name', '?')} mentions an excluded type")
    return probs


# Standalone generators ----------------------------------------------------------


def _limits(rng: random.Random, cap: int, shared: bool):
    initial = rng.randint(0, cap)
    maximum = rng.randint(initial, 2 * cap) if shared or rng.random() < 0.5 else None
    return initial, maximum


def random_memory_type(rng: random.Random, profile: FeatureProfile, budget: GenerationBudget) -> MemoryType:
    shared = rng.random() < 0.25
    addr64 = profile.memory64 and rng.random() < 0.3
    initial, maximum = _limits(rng, budget.memory_page_cap, shared)
    return MemoryType(initial, maximum, addr64, shared)


def random_table_type(rng: random.Random, profile: FeatureProfile, budget: GenerationBudget,
                      elements: Sequence[RefType] = TABLE_ELEMENT_TYPES) -> TableType:
    elem = rng.choice(list(elements))
    addr64 = profile.memory64 and rng.random() < 0.2
    initial, maximum = _limits(rng, budget.table_size_cap, False)
    return TableType(elem, initial, maximum, addr64, False)


def _initializer(b: ProgramBuilder, t) -> int | None:
    found = an.query_wasm_value_strict(b.ctx, t)
    # Global objects are unwrapped, not converted, when passed as values
    found = [v for v in found if not b.analysis.annotations[v].wasm.get(Category.GLOBAL)]
    return b.pick_recent(found) if found else None


def gen_wasm_memory(rng: random.Random, b: ProgramBuilder, budget: GenerationBudget | None = None) -> ir.Instruction:
    mt = random_memory_type(rng, b.profile, budget or b.budget)
    return b.emit(Opcode.CreateWasmMemory, (), mt)


def gen_wasm_table(rng: random.Random, b: ProgramBuilder, budget: GenerationBudget | None = None) -> ir.Instruction:
    tt = random_table_type(rng, b.profile, budget or b.budget)
    init = _initializer(b, tt.element)
    return b.emit(Opcode.CreateWasmTable, () if init is None else (init,), ir.WasmTableSpec(tt, init is not None))


def gen_wasm_global(rng: random.Random, b: ProgramBuilder) -> ir.Instruction:
    gt = GlobalType(rng.choice(STANDALONE_VALUE_TYPES), rng.random() < 0.5)
    init = _initializer(b, gt.content)
    return b.emit(Opcode.CreateWasmGlobal, () if init is None else (init,), ir.WasmGlobalSpec(gt, init is not None))


def gen_wasm_tag(rng: random.Random, b: ProgramBuilder | None = None) -> ir.Instruction | TagType:
    tag = TagType(tuple(rng.choice(STANDALONE_VALUE_TYPES) for _ in range(rng.randint(0, 4))))
    if b is None:
        return tag
    return b.emit(Opcode.CreateWasmTag, (), tag)


# Import satisfaction ------------------------------------------------------------


def limits_compatible(provided, required) -> bool:
    if provided.shared != required.shared or provided.addr64 != required.addr64:
        return False
    if provided.initial < required.initial:
        return False
    if required.maximum is not None:
        return provided.maximum is not None and provided.maximum <= required.maximum
    return True


def import_satisfied_by(a: an.Analysis, v: int, t) -> bool:
    """Whether variable ``v`` may be passed for an import of type ``t``."""
    ann = a.annotations.get(v)
    if ann is None:
        return False
    rec = a.record
    own = a.wasm_types.get(v)
    if isinstance(t, MemoryType):
        return isinstance(own, MemoryType) and limits_compatible(own, t)
    if isinstance(t, TableType):
        return isinstance(own, TableType) and own.element == t.element and limits_compatible(own, t)
    if isinstance(t, TagType):
        return isinstance(own, TagType) and own == t
    if isinstance(t, GlobalType):
        if isinstance(own, GlobalType):
            return own == t
        if t.mutable or ann.wasm.get(Category.GLOBAL):
            return False
        return an.converts_to(a, v, t.content)
    if isinstance(t, FuncType):
        if isinstance(own, FuncType):
            return own == t
        jt = ann.js
        sig = jt.signature
        return (bool(jt.flags & Flag.FUNCTION) and not jt.flags & ~(Flag.FUNCTION | Flag.OBJECT)
                and sig is not None and not sig.wasm)
    return False


def import_candidates(ctx: an.Context, t) -> list[int]:
    return [v for v in ctx.recent() if import_satisfied_by(ctx.analysis, v, t)]


# Module shapes -------------------------------------------------------------------


class _ShapeGen:
    def __init__(self, rng: random.Random, b: ProgramBuilder, budget: GenerationBudget):
        self.rng = rng
        self.b = b
        self.profile = b.profile
        self.budget = budget
        self.memories = 0

    def _local_value(self, n_visible: int):
        rng, p = self.rng, self.profile
        opts: list = list(_NUMERIC) + [FUNCREF, EXTERNREF]
        if p.simd:
            opts.append(NumType.V128)
        if p.gc:
            opts += [ANYREF, EQREF, I31REF, STRUCTREF, ARRAYREF, NULLREF, RefType(AbsHeap.ANY, False)]
            if p.exceptions:
                opts.append(EXNREF)
            if n_visible:
                idx = rng.randrange(n_visible)
                opts += [RefType(idx, True), RefType(idx, False)]
        return rng.choice(opts)

    def type_defs(self) -> list[list]:
        """Step 1: random recursion groups in module-local index form."""
        rng = self.rng
        total = rng.randint(0, self.budget.max_type_defs)
        groups: list[list] = []
        n = 0
        while n < total:
            size = 1 if not self.profile.gc or rng.random() < 0.75 else min(2, total - n)
            visible = n + size
            group = []
            for _ in range(size):
                kind = rng.choice(("struct", "array", "func")) if self.profile.gc else "func"
                if kind == "func":
                    group.append(FuncType(tuple(self._local_value(visible) for _ in range(rng.randint(0, 3))),
                                          tuple(self._local_value(visible) for _ in range(rng.randint(0, 2)))))
                else:
                    def field_():
                        st = rng.choice((PackedType.I8, PackedType.I16)) if rng.random() < 0.2 \
                            else self._local_value(visible)
                        return FieldType(st, rng.random() < 0.5)
                    group.append(StructType(tuple(field_() for _ in range(rng.randint(0, 3)))) if kind == "struct"
                                 else ArrayType(field_()))
            groups.append(group)
            n += size
        return groups

    def _fresh_func(self, defs, unrestricted: bool) -> FuncType:
        rng = self.rng
        pal = value_palette(self.profile, defs, unrestricted=unrestricted)
        res = value_palette(self.profile, defs, unrestricted=unrestricted, nullable_only=True)
        return FuncType(tuple(rng.choice(pal) for _ in range(rng.randint(0, 3))),
                        tuple(rng.choice(res) for _ in range(rng.randint(0, 2))))

    def _kinds(self) -> list[str]:
        kinds = ["table", "global", "function"]
        if self.memories == 0 or self.profile.multiMemory:
            kinds.append("memory")
        if self.profile.exceptions:
            kinds.append("tag")
        return kinds

    def imports(self, defs) -> list[Import]:
        """Step 2: import types, preferring types of objects already in context."""
        rng, ctx, a = self.rng, self.b.ctx, self.b.analysis
        out = []
        for i in range(rng.randint(0, self.budget.max_imports)):
            kind = rng.choice(self._kinds())
            t = None
            if kind == "memory":
                have = an.query_wasm_object(ctx, Category.MEMORY, lambda m: self.profile.memory64 or not m.addr64)
                t = a.wasm_types[rng.choice(have)] if have and rng.random() < 0.85 else \
                    random_memory_type(rng, self.profile, self.budget)
                self.memories += 1
            elif kind == "table":
                have = an.query_wasm_object(ctx, Category.TABLE)
                t = a.wasm_types[rng.choice(have)] if have and rng.random() < 0.85 else \
                    random_table_type(rng, self.profile, self.budget)
            elif kind == "tag":
                have = an.query_wasm_object(ctx, Category.TAG)
                t = a.wasm_types[rng.choice(have)] if have and rng.random() < 0.85 else gen_wasm_tag(rng)
            elif kind == "global":
                globals_ = an.query_wasm_object(ctx, Category.GLOBAL)
                allowed = set(value_palette(self.profile, defs))
                valued = [(v, vt) for v in ctx.recent() if not a.annotations[v].wasm.get(Category.GLOBAL)
                          for vt in a.value_types(v) if vt in allowed]
                r = rng.random()
                if globals_ and r < 0.4:
                    t = a.wasm_types[rng.choice(globals_)]
                elif valued and r < 0.9:
                    t = GlobalType(rng.choice(valued)[1], False)
                else:
                    t = GlobalType(rng.choice(STANDALONE_VALUE_TYPES), rng.random() < 0.3)
            else:
                funcs = an.query_wasm_object(ctx, Category.FUNCTION)
                if funcs and rng.random() < 0.4:
                    t = a.wasm_types[rng.choice(funcs)]
                else:
                    # any JS callable is cast to an arbitrarily typed Wasm function
                    t = self._fresh_func(defs, unrestricted=False)
            if wt.mentions_excluded(t):
                continue
            out.append(Import("m", f"f{i}", t))
        return out

    def export_candidates(self, defs, imports) -> list:
        """Step 3: candidate export types with unrestricted value-type selection."""
        rng = self.rng
        cands = []
        elems = [t for t in value_palette(self.profile, defs, nullable_only=True) if isinstance(t, RefType)]
        for _ in range(rng.randint(0, self.budget.max_exports + 2)):
            r = rng.random()
            if imports and r < 0.1:
                cands.append(rng.choice(imports).type)
                continue
            kind = rng.choice(self._kinds() + ["function", "function"])
            if kind == "function":
                cands.append(self._fresh_func(defs, unrestricted=True))
            elif kind == "memory":
                self.memories += 1
                cands.append(random_memory_type(rng, self.profile, self.budget))
            elif kind == "table":
                cands.append(random_table_type(rng, self.profile, self.budget, elems))
            elif kind == "global":
                pal = value_palette(self.profile, defs, unrestricted=True, nullable_only=True)
                cands.append(GlobalType(rng.choice(pal), rng.random() < 0.5))
            else:
                pal = value_palette(self.profile, defs, unrestricted=True)
                cands.append(TagType(tuple(rng.choice(pal) for _ in range(rng.randint(0, 3)))))
        return cands


def gen_module_shape(rng: random.Random, b: ProgramBuilder, budget: GenerationBudget | None = None) -> ModuleType:
    budget = budget or b.budget
    g = _ShapeGen(rng, b, budget)
    local_groups = g.type_defs()
    tdefs = wt.TypeDefs(local_groups)
    defs = [tdefs.def_type(i) for i in range(len(tdefs))]
    imports = g.imports(defs)
    cands = g.export_candidates(defs, imports)
    # step 4: random subset, dropping anything that mentions v128 or the exn family
    chosen = [t for t in cands if rng.random() < 0.7 and not wt.mentions_excluded(t)][: budget.max_exports]
    exports = tuple(Export(f"e{i}", t) for i, t in enumerate(chosen))
    groups = tuple(tuple(tdefs._canon_group(gi)) for gi in range(len(tdefs.groups)))
    return canonical_shape(ModuleType(groups, tuple(imports), exports))


# Synthesis -----------------------------------------------------------------------


class ModuleSynthesizer(Protocol):
    def synthesize(self, shape: ModuleType, seed: int) -> bytes: ...


def _check_budget(shape: ModuleType, budget: GenerationBudget):
    if len(shape.imports) > budget.max_imports or len(shape.exports) > budget.max_exports:
        raise ShapeTooLarge("too many imports or exports")
    for ent in list(shape.imports) + list(shape.exports):
        t = ent.type
        if isinstance(t, MemoryType) and t.initial > budget.memory_page_cap:
            raise ShapeTooLarge(f"memory of {t.initial} pages exceeds the cap")
        if isinstance(t, TableType) and t.initial > budget.table_size_cap:
            raise ShapeTooLarge(f"table of {t.initial} elements exceeds the cap")


def _defaultable(t, ti) -> bool:
    if isinstance(t, GlobalType):
        return default_const(t.content, ti) is not None
    if isinstance(t, TableType):
        return t.element.nullable
    return True


def synthesize_minimal(shape: ModuleType, seed: int = 0, budget: GenerationBudget = DEFAULT_BUDGET) -> bytes:
    """Encode a module whose imports and exports are exactly ``shape``'s, with stub bodies."""
    shape = canonical_shape(shape)
    probs = shape_problems(shape)
    if probs:
        raise SynthesisFailed("; ".join(probs))
    _check_budget(shape, budget)
    rng = random.Random(seed)
    mb = ModuleBuilder(groups=list(shape.type_defs), imports=list(shape.imports))
    ti = _TypeIndex(mb.groups)
    imported = {k: [i.type for i in shape.imports if extern_kind(i.type) == k] for k in range(5)}
    counts = {k: len(v) for k, v in imported.items()}
    for e in shape.exports:
        kind = extern_kind(e.type)
        reuse = [i for i, t in enumerate(imported[kind]) if t == e.type]
        # re-exporting an imported memory avoids declaring a second one, and an import
        # of a non-defaultable type has no fresh equivalent
        if reuse and (isinstance(e.type, MemoryType) or not _defaultable(e.type, ti) or rng.random() < 0.5):
            mb.exports.append((e.name, kind, rng.choice(reuse)))
            continue
        t = e.type
        if isinstance(t, FuncType):
            mb.funcs.append((t, stub_body(t, ti)))
        elif isinstance(t, TableType):
            if not t.element.nullable:
                raise SynthesisFailed("table with non-nullable elements needs an initializer")
            mb.tables.append(t)
        elif isinstance(t, MemoryType):
            mb.memories.append(t)
        elif isinstance(t, GlobalType):
            init = default_const(t.content, ti)
            if init is None:
                raise SynthesisFailed("global of non-defaultable type")
            mb.globals.append((t, init))
        else:
            mb.tags.append(t)
        mb.exports.append((e.name, kind, counts[kind]))
        counts[kind] += 1
    return mb.encode()


@dataclass
class MinimalSynthesizer:
    budget: GenerationBudget = DEFAULT_BUDGET

    def synthesize(self, shape: ModuleType, seed: int) -> bytes:
        return synthesize_minimal(shape, seed, self.budget)


@dataclass
class CommandSynthesizer:
    """External backend: shape-module bytes on stdin, module bytes on stdout.

    Output is accepted only if its parsed shape equals the requested one.
    """

    command: Sequence[str]
    timeout: float = 10.0
    budget: GenerationBudget = DEFAULT_BUDGET

    def synthesize(self, shape: ModuleType, seed: int) -> bytes:
        want = canonical_shape(shape)
        request = synthesize_minimal(want, seed, self.budget)
        try:
            proc = subprocess.run([*self.command, str(seed)], input=request, capture_output=True,
                                  timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise SynthesisFailed(f"synthesizer command failed: {e}") from None
        if proc.returncode != 0:
            raise SynthesisFailed(f"synthesizer exited with {proc.returncode}")
        try:
            got = parse_shape(proc.stdout)
        except ValueError as e:
            raise SynthesisFailed(f"synthesizer output does not parse: {e}") from None
        if got != want:
            raise SynthesisFailed("synthesizer output does not match the requested shape")
        return proc.stdout


def make_synthesizer(choice: str, budget: GenerationBudget = DEFAULT_BUDGET) -> ModuleSynthesizer:
    if choice == "builtin":
        return MinimalSynthesizer(budget)
    if choice.startswith("cmd:"):
        import shlex
        return CommandSynthesizer(shlex.split(choice[4:]), budget=budget)
    raise ValueError(f"unknown synthesizer {choice!r}")


# Instance and exports --------------------------------------------------------------


def gen_instance_and_exports(rng: random.Random, b: ProgramBuilder, budget: GenerationBudget | None = None,
                             synthesizer: ModuleSynthesizer | None = None) -> list[ir.Instruction]:
    budget = budget or b.budget
    synthesizer = synthesizer or b.synthesizer or MinimalSynthesizer(budget)
    last: Exception | None = None
    for _ in range(3):
        shape = gen_module_shape(rng, b, budget)
        ctx = b.ctx
        bound = []
        kept = []
        for imp in shape.imports:
            cands = import_candidates(ctx, imp.type)
            if cands:  # unsatisfiable imports are pruned before synthesis
                kept.append(imp)
                bound.append(b.pick_recent(cands))
        shape = canonical_shape(ModuleType(shape.type_defs, tuple(kept), shape.exports))
        try:
            code = synthesizer.synthesize(shape, rng.getrandbits(32))
        except SynthesisFailed as e:
            last = e
            budget = budget.shrunk()
            continue
        out = [b.emit(Opcode.CompileWasmModule, (), ir.WasmModuleBlob(code, shape))]
        mod = out[0].outputs[0]
        bindings = tuple(ir.ImportBinding(i.module, i.name) for i in shape.imports)
        out.append(b.emit(Opcode.InstantiateWasmModule, (mod, *bound), bindings))
        inst = out[-1].outputs[0]
        for e in shape.exports:
            out.append(b.emit(Opcode.WasmInstanceExport, (inst,), ir.WasmExportRef(e.name, e.type)))
        return out
    raise SynthesisFailed(f"could not realize a module shape: {last}")

"""Flow-sensitive dual-type analysis and the context-query API."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import conversion as cv
from . import ir
from . import jstype as js
from . import wasm_types as wt
from .environment import ARRAY_INSTANCE, DEFAULT_ENVIRONMENT, StaticTypeEnvironment
from .ir import Opcode
from .jstype import Flag, JSType
from .wasm_types import Category, WasmTypeAnnotation, WasmTypeRecord


@dataclass(frozen=True)
class TypeAnnotation:
    js: JSType
    wasm: WasmTypeAnnotation = WasmTypeAnnotation()

    def values(self, record: WasmTypeRecord) -> list:
        return [record.lookup(Category.VALUE, i) for i in sorted(self.wasm.get(Category.VALUE))]


_ARITH = {"+", "-", "*", "/", "%", "**"}
_BITWISE = {"&", "|", "^", "<<", ">>", ">>>"}
_COMPARE = {"==", "===", "!=", "<", "<=", ">", ">="}
_LOGICAL = {"&&", "||", "??"}


def binary_result(op: str, a: JSType, b: JSType) -> JSType:
    if op in _COMPARE:
        return js.BOOLEAN
    if op in _LOGICAL:
        return a | b
    if a.is_(js.BIGINT) and b.is_(js.BIGINT) and op != ">>>":
        return js.BIGINT
    if op == "+" and (a.may_be(Flag.STRING) or b.may_be(Flag.STRING)):
        if a.is_(js.STRING) or b.is_(js.STRING):
            return js.STRING
        return js.STRING | js.NUMBER | js.BIGINT
    if op in _BITWISE:
        return js.INTEGER
    if op in ("+", "-", "*") and a.is_(js.INTEGER) and b.is_(js.INTEGER):
        return js.INTEGER
    if a.may_be(Flag.BIGINT) or b.may_be(Flag.BIGINT):
        return js.NUMBER | js.BIGINT
    return js.NUMBER


def unary_result(op: str, a: JSType) -> JSType:
    if op == "!":
        return js.BOOLEAN
    if op == "typeof":
        return js.STRING
    if op == "+":
        return js.NUMBER
    if a.is_(js.BIGINT):
        return js.BIGINT
    if op == "~":
        return js.INTEGER
    if a.is_(js.INTEGER):
        return js.INTEGER
    return js.NUMBER | js.BIGINT if a.may_be(Flag.BIGINT) else js.NUMBER


def literal_type(value) -> JSType:
    if isinstance(value, bool):
        return js.BOOLEAN
    if isinstance(value, int):
        return js.INTEGER
    return js.NUMBER


class Analysis:
    """Incremental analysis state; feed instructions in program order with ``step``."""

    def __init__(self, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT, record: WasmTypeRecord | None = None):
        self.env = env
        self.record = record if record is not None else WasmTypeRecord()
        self.annotations: dict[int, TypeAnnotation] = {}
        self.wasm_types: dict[int, object] = {}
        self.order: list[int] = []
        self.overrides: dict[str, JSType] = {}
        self._fn_stack: list[tuple[int, list[JSType]]] = []
        self.count = 0
        # variables known to hold exactly null (not undefined)
        self.nulls: set[int] = set()

    # -- bookkeeping ------------------------------------------------------

    def snapshot(self):
        return (self.count, len(self.order), dict(self.overrides), [(v, list(r)) for v, r in self._fn_stack],
                dict(self.annotations))

    def restore(self, snap):
        self.count, n, self.overrides, fn, self.annotations = snap
        self._fn_stack = [(v, list(r)) for v, r in fn]
        for v in self.order[n:]:
            self.wasm_types.pop(v, None)
            self.nulls.discard(v)
        del self.order[n:]

    def annotation(self, v: int) -> TypeAnnotation:
        return self.annotations[v]

    def js_type(self, v: int) -> JSType:
        return self.annotations[v].js

    def value_types(self, v: int) -> list:
        return self.annotations[v].values(self.record)

    def builtin(self, name: str) -> JSType:
        if name in self.overrides:
            return self.overrides[name]
        root = name.split(".")[0]
        if root != name and root in self.overrides:
            return js.ANYTHING
        t = self.env.template(name)
        return t if t is not None else js.ANYTHING

    def _value_set(self, t: JSType) -> frozenset[int]:
        cache = self.record.memo.setdefault("value_sets", {})
        hit = cache.get(t)
        if hit is None:
            # intern in a hash-independent order so record indices are reproducible
            hit = cache[t] = frozenset(self.record.intern(v) for v in sorted(cv.to_wasm_value_types(t), key=repr))
        return hit

    def _set_js(self, v: int, t: JSType):
        self.annotations[v] = TypeAnnotation(t, WasmTypeAnnotation.of({Category.VALUE: self._value_set(t)}))
        self.order.append(v)

    def _set_wasm(self, v: int, wasm_type, t: JSType):
        canon = wt.canonicalize(wasm_type)
        cat = wt.category_of(canon)
        idx = self.record.intern(canon)
        self.wasm_types[v] = canon
        ann = WasmTypeAnnotation.of({cat: {idx}, Category.VALUE: self._value_set(t)})
        self.annotations[v] = TypeAnnotation(t, ann)
        self.order.append(v)

    # -- transfer functions -----------------------------------------------

    def step(self, ins: ir.Instruction):
        self.count += 1
        op, p = ins.op, ins.payload
        t_in = [self.annotations[i].js if i in self.annotations else js.ANYTHING for i in ins.inputs]
        out = ins.outputs
        if op is Opcode.LoadBuiltin:
            self._set_js(out[0], self.builtin(p))
        elif op is Opcode.LoadNumber:
            self._set_js(out[0], literal_type(p))
        elif op is Opcode.LoadBigInt:
            self._set_js(out[0], js.BIGINT)
        elif op is Opcode.LoadString:
            self._set_js(out[0], js.STRING)
        elif op is Opcode.LoadBoolean:
            self._set_js(out[0], js.BOOLEAN)
        elif op in (Opcode.LoadNull, Opcode.LoadUndefined):
            self._set_js(out[0], js.NULLISH)
            if op is Opcode.LoadNull:
                self.nulls.add(out[0])
        elif op is Opcode.CreateObject:
            self._set_js(out[0], js.object_(p, (), None, dict(zip(p, t_in))))
        elif op is Opcode.CreateArray:
            self._set_js(out[0], ARRAY_INSTANCE)
        elif op is Opcode.GetProperty:
            self._set_js(out[0], self._property(t_in[0], p))
        elif op is Opcode.SetProperty:
            pass
        elif op is Opcode.StoreBuiltin:
            self.overrides[p] = t_in[0]
        elif op is Opcode.CallFunction:
            sig = t_in[0].signature
            self._set_js(out[0], sig.result if sig is not None else js.ANYTHING)
        elif op is Opcode.CallMethod:
            m = t_in[0].member(p.name)
            self._set_js(out[0], m.signature.result if m is not None and m.signature is not None else js.ANYTHING)
        elif op is Opcode.Construct:
            sig = t_in[0].signature
            self._set_js(out[0], sig.result if sig is not None and sig.constructs else js.object_())
        elif op is Opcode.BinaryOp:
            self._set_js(out[0], binary_result(p, t_in[0], t_in[1]))
        elif op is Opcode.UnaryOp:
            self._set_js(out[0], unary_result(p, t_in[0]))
        elif op is Opcode.BeginFunction:
            self._set_js(out[0], js.function([js.ANYTHING] * p, js.ANYTHING))
            self._fn_stack.append((out[0], []))
            for v in ins.inner_outputs:
                self._set_js(v, js.ANYTHING)
        elif op is Opcode.Return:
            if self._fn_stack:
                self._fn_stack[-1][1].append(t_in[0])
        elif op is Opcode.EndFunction:
            if self._fn_stack:
                fv, rets = self._fn_stack.pop()
                ret = js.join_all(rets) | js.UNDEFINED if rets else js.UNDEFINED
                old = self.annotations[fv].js
                t = js.function(old.signature.params, ret)
                self.annotations[fv] = TypeAnnotation(t, WasmTypeAnnotation.of({Category.VALUE: self._value_set(t)}))
        elif op is Opcode.BeginCatch:
            self._set_js(out[0], js.ANYTHING)
        elif op is Opcode.BeginForLoop:
            self._set_js(out[0], js.INTEGER)
        elif op is Opcode.CreateWasmMemory:
            self._set_wasm(out[0], p, cv.MEMORY_TEMPLATE)
        elif op is Opcode.CreateWasmTable:
            self._set_wasm(out[0], p.type, cv.TABLE_TEMPLATE)
        elif op is Opcode.CreateWasmGlobal:
            self._set_wasm(out[0], p.type, cv.GLOBAL_TEMPLATE)
        elif op is Opcode.CreateWasmTag:
            self._set_wasm(out[0], p, cv.TAG_TEMPLATE)
        elif op is Opcode.CompileWasmModule:
            self._set_wasm(out[0], p.shape, cv.MODULE_TEMPLATE)
        elif op is Opcode.InstantiateWasmModule:
            shape = self.wasm_types.get(ins.inputs[0])
            if isinstance(shape, wt.ModuleType):
                inst = wt.InstanceType(shape.type_defs, shape.imports, shape.exports, True)
                self._set_wasm(out[0], inst, cv.INSTANCE_TEMPLATE)
            else:
                self._set_js(out[0], cv.INSTANCE_TEMPLATE)
        elif op is Opcode.WasmInstanceExport:
            t = p.type
            try:
                jt = cv.wasm_object_to_js_type(t)
            except cv.UnsupportedTypeError:
                jt = js.ANYTHING
            self._set_wasm(out[0], t, jt)
        else:  # block markers without outputs
            pass

    def _property(self, recv: JSType, name: str) -> JSType:
        m = recv.member(name)
        if m is not None:
            return m
        if name == "length" and recv.is_(js.STRING):
            return js.INTEGER
        return js.ANYTHING


def analyze(program: ir.Program | Iterable[ir.Instruction], env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT,
            record: WasmTypeRecord | None = None) -> Analysis:
    a = Analysis(env, record)
    instrs = program.instructions if isinstance(program, ir.Program) else program
    for ins in instrs:
        a.step(ins)
    return a


# Queries -------------------------------------------------------------------


@dataclass
class Context:
    """An analyzed prefix: the analysis state plus the variables in scope."""

    analysis: Analysis
    visible: list[int] = field(default_factory=list)

    @classmethod
    def at(cls, program: ir.Program, upto: int | None = None, env=DEFAULT_ENVIRONMENT, record=None) -> "Context":
        instrs = program.instructions if upto is None else program.instructions[:upto]
        a = analyze(instrs, env, record)
        return cls(a, ir.visible_variables(instrs))

    def recent(self) -> list[int]:
        return list(reversed(self.visible))


def query_js(ctx: Context, want: JSType) -> list[int]:
    a = ctx.analysis
    return [v for v in ctx.recent() if a.js_type(v).intersects(want) or want.flags == Flag.ANYTHING]


def query_js_subsumed(ctx: Context, want: JSType) -> list[int]:
    """Variables whose type is entirely within ``want`` (stricter than query_js)."""
    a = ctx.analysis
    return [v for v in ctx.recent() if not a.js_type(v).is_nothing and a.js_type(v).is_(want)]


def query_wasm_value(ctx: Context, want) -> list[int]:
    a = ctx.analysis
    rec = a.record
    out = []
    for v in ctx.recent():
        idx = a.annotations[v].wasm.get(Category.VALUE)
        if any(wt.matches(want, rec.lookup(Category.VALUE, i)) for i in idx):
            out.append(v)
    return out


_UNDEFINED_OK = (wt.AbsHeap.ANY, wt.AbsHeap.EXTERN)


def converts_to(a: Analysis, v: int, want) -> bool:
    """Like the value-set query for one variable, but refuses a possibly-undefined value
    where only null is acceptable (every nullable reference except anyref and externref)."""
    if not any(wt.matches(want, a.record.lookup(Category.VALUE, i))
               for i in a.annotations[v].wasm.get(Category.VALUE)):
        return False
    if isinstance(want, wt.RefType) and want.heap not in _UNDEFINED_OK and v not in a.nulls:
        return not a.js_type(v).may_be(Flag.NULLISH)
    return True


def query_wasm_value_strict(ctx: Context, want) -> list[int]:
    return [v for v in ctx.recent() if converts_to(ctx.analysis, v, want)]


def query_wasm_object(ctx: Context, category: Category, predicate: Callable[[object], bool] | None = None) -> list[int]:
    a = ctx.analysis
    rec = a.record
    out = []
    for v in ctx.recent():
        idx = a.annotations[v].wasm.get(category)
        if idx and (predicate is None or any(predicate(rec.lookup(category, i)) for i in idx)):
            out.append(v)
    return out


def wasm_type_of(ctx: Context, v: int):
    return ctx.analysis.wasm_types.get(v)


def check_annotations(a: Analysis) -> list[str]:
    """Invariant audit: bounds and exclusion; returns problems found."""
    probs = []
    for v, ann in a.annotations.items():
        if not a.record.in_bounds(ann.wasm):
            probs.append(f"v{v}: out-of-bounds subscript")
        for t in ann.values(a.record):
            if t in cv.EXCLUDED or (isinstance(t, wt.RefType) and t.heap in wt.EXN_FAMILY):
                probs.append(f"v{v}: excluded value type {t!r}")
    return probs

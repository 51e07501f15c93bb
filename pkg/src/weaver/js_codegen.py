"""Type-aware JS code generators."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from . import analyzer as an
from . import jstype as js
from . import wasm_codegen as wg
from . import wasm_types as wt
from .builder import InsufficientContext, ProgramBuilder
from .ir import MethodCall, Opcode
from .jstype import Flag, JSType
from .wasm_types import Category

INTERESTING_INTS = (0, 1, 2, 3, 4, 5, 7, 8, 10, 16, 42, 64, 100, 127, 255, 256, 1000, 1024, 4096, 65535, 65536, -1,
                    -2, -128, 2**31 - 1, -2**31, 2**32 - 1, 2**53 - 1)
INTERESTING_FLOATS = (0.5, 1.5, -0.0, 3.14, 1e10, -1e-10, float("nan"), float("inf"), float("-inf"),
                      926.7333937898886, 2.220446049250313e-16)
INTERESTING_BIGINTS = (0, 1, -1, 42, 2**32, 2**63 - 1, -2**63, 2**64)
INTERESTING_STRINGS = ("", "a", "foo", "length", "valueOf", "externref", "i32", "anyfunc", "0", "hello world")
PROPERTY_NAMES = ("a", "b", "x", "length", "value", "constructor", "prototype", "name", "0", "foo")
_NEVER_READ = frozenset({"caller", "arguments", "callee"})

OBJECTISH = js.JSType(Flag.OBJECT | Flag.FUNCTION)


# Type fitting -------------------------------------------------------------------


def fits(t: JSType, want: JSType) -> bool:
    """Conservative argument compatibility used when picking arguments."""
    if t.is_nothing or t.flags & ~want.flags:
        return False
    if want.shape is not None and t.shape is not None:
        if want.shape.group and t.shape.group != want.shape.group and want.shape.properties:
            return False
        if not set(want.shape.properties) <= set(t.shape.properties):
            return False
    if want.signature is not None and t.signature is not None:
        if want.signature.constructs != t.signature.constructs:
            return False
    return True


def definitely(t: JSType, flags: Flag) -> bool:
    return not t.is_nothing and not (t.flags & ~flags)


def _literal_int(b: ProgramBuilder, small=True) -> int:
    v = b.rng.randint(0, 4) if small else b.rng.choice(INTERESTING_INTS)
    return b.out(Opcode.LoadNumber, (), v)


def _descriptor(b: ProgramBuilder, group: str) -> int | None:
    rng = b.rng
    if group == "MemoryDescriptor":
        return b.out(Opcode.CreateObject, (_literal_int(b),), ("initial",))
    if group == "TableDescriptor":
        el = b.out(Opcode.LoadString, (), rng.choice(("externref", "anyfunc")))
        return b.out(Opcode.CreateObject, (el, _literal_int(b)), ("element", "initial"))
    if group == "GlobalDescriptor":
        val = b.out(Opcode.LoadString, (), rng.choice(("i32", "f32", "f64", "externref")))
        mut = b.out(Opcode.LoadBoolean, (), rng.random() < 0.5)
        return b.out(Opcode.CreateObject, (val, mut), ("value", "mutable"))
    if group == "TagDescriptor":
        ps = [b.out(Opcode.LoadString, (), rng.choice(("i32", "f64", "externref"))) for _ in range(rng.randint(0, 2))]
        arr = b.out(Opcode.CreateArray, tuple(ps), len(ps))
        return b.out(Opcode.CreateObject, (arr,), ("parameters",))
    return None


def argument(b: ProgramBuilder, want: JSType) -> int:
    """Pick (or make) a variable for a parameter of type ``want``."""
    rng = b.rng
    if want.shape is not None and want.shape.group:
        d = _descriptor(b, want.shape.group)
        if d is not None:
            return d
    if want.flags and not want.flags & ~Flag.NUMBER and rng.random() < 0.6:
        return _literal_int(b)
    a = b.analysis
    cands = [v for v in b.ctx.recent() if fits(a.js_type(v), want)]
    if cands and rng.random() < 0.8:
        return b.pick_recent(cands)
    if want.flags and not want.flags & ~Flag.NUMBER:
        return _literal_int(b)
    if want.flags == Flag.BIGINT:
        return b.out(Opcode.LoadBigInt, (), rng.choice((0, 1, 42)))
    if want.flags == Flag.STRING:
        return b.out(Opcode.LoadString, (), rng.choice(INTERESTING_STRINGS))
    if want.flags == Flag.BOOLEAN:
        return b.out(Opcode.LoadBoolean, (), rng.random() < 0.5)
    if cands:
        return b.pick_recent(cands)
    if want.flags & Flag.NULLISH:
        return b.out(Opcode.LoadUndefined)
    loose = an.query_js(b.ctx, want)
    if loose:
        b.fallbacks += 1
        return b.pick(loose)
    b.fallbacks += 1
    return b.pick(b.visible())


def wasm_argument(b: ProgramBuilder, t) -> int:
    """Pick a variable whose Wasm value types satisfy ``t``; make a literal if none."""
    cands = [v for v in an.query_wasm_value_strict(b.ctx, t) if not b.analysis.annotations[v].wasm.get(Category.GLOBAL)]
    if cands and b.rng.random() < 0.7:
        return b.pick_recent(cands)
    if t in (wt.I32, wt.F32, wt.F64):
        return _literal_int(b, small=False)
    if t is wt.I64:
        return b.out(Opcode.LoadBigInt, (), b.rng.choice(INTERESTING_BIGINTS))
    if isinstance(t, wt.RefType) and t.nullable:
        return b.out(Opcode.LoadNull)
    if cands:
        return b.pick_recent(cands)
    raise InsufficientContext(f"no value for {t!r}")


# Generators -----------------------------------------------------------------------


def builtin_generator(b: ProgramBuilder):
    names = b.env.loadable
    if not names:
        raise InsufficientContext("empty builtin catalog")
    return b.emit(Opcode.LoadBuiltin, (), b.pick(names))


def primitive_generator(b: ProgramBuilder):
    rng = b.rng
    r = rng.random()
    if r < 0.4:
        return b.emit(Opcode.LoadNumber, (), rng.choice(INTERESTING_INTS))
    if r < 0.55:
        return b.emit(Opcode.LoadNumber, (), rng.choice(INTERESTING_FLOATS))
    if r < 0.7:
        return b.emit(Opcode.LoadBigInt, (), rng.choice(INTERESTING_BIGINTS))
    if r < 0.85:
        return b.emit(Opcode.LoadString, (), rng.choice(INTERESTING_STRINGS))
    if r < 0.92:
        return b.emit(Opcode.LoadBoolean, (), rng.random() < 0.5)
    if r < 0.96:
        return b.emit(Opcode.LoadNull)
    return b.emit(Opcode.LoadUndefined)


def object_literal_generator(b: ProgramBuilder):
    vis = b.visible()
    n = min(len(vis), b.rng.randint(0, 3))
    names = b.rng.sample(["a", "b", "c", "x", "y", "valueOf", "length"], n)
    return b.emit(Opcode.CreateObject, tuple(b.pick_recent(b.ctx.recent()) for _ in names), tuple(names))


def array_literal_generator(b: ProgramBuilder):
    vis = b.ctx.recent()
    n = min(len(vis), b.rng.randint(0, 3))
    return b.emit(Opcode.CreateArray, tuple(b.pick_recent(vis) for _ in range(n)), n)


def _receivers(b: ProgramBuilder, flags=Flag.OBJECT | Flag.FUNCTION) -> list[int]:
    a = b.analysis
    return [v for v in b.ctx.recent() if definitely(a.js_type(v), flags)]


def property_get_generator(b: ProgramBuilder):
    a = b.analysis
    recv = _receivers(b, Flag.ANYTHING & ~Flag.NULLISH)
    v = b.pick_recent(recv)
    shape = a.js_type(v).shape
    props = [p for p in (shape.properties if shape else ()) if p not in b.excluded]
    name = b.pick(props) if props and b.rng.random() < 0.8 else b.pick(PROPERTY_NAMES)
    if name in _NEVER_READ:
        name = "length"
    return b.emit(Opcode.GetProperty, (v,), name)


def property_set_generator(b: ProgramBuilder):
    a = b.analysis
    recv = _receivers(b)
    v = b.pick_recent(recv)
    own = a.wasm_types.get(v)
    if isinstance(own, wt.GlobalType):
        if not own.mutable:
            raise InsufficientContext("immutable global")
        return b.emit(Opcode.SetProperty, (v, wasm_argument(b, own.content)), "value")
    shape = a.js_type(v).shape
    props = list(shape.properties) if shape else []
    name = b.pick(props) if props and b.rng.random() < 0.3 else b.pick(PROPERTY_NAMES)
    value = b.pick_recent(b.ctx.recent())
    return b.emit(Opcode.SetProperty, (v, value), name)


def _callable(t: JSType) -> bool:
    return (definitely(t, Flag.FUNCTION | Flag.OBJECT) and bool(t.flags & Flag.FUNCTION)
            and t.signature is not None and not t.signature.constructs)


def call_generator(b: ProgramBuilder):
    a = b.analysis
    if b.rng.random() < 0.5:
        fns = [v for v in b.ctx.recent() if _callable(a.js_type(v))]
        if fns:
            f = b.pick_recent(fns)
            own = a.wasm_types.get(f)
            if isinstance(own, wt.FuncType):
                args = [wasm_argument(b, p) for p in own.params]
            else:
                sig = a.js_type(f).signature
                params = sig.params if not sig.generic else ()
                args = [argument(b, p) for p in params]
            return b.emit(Opcode.CallFunction, (f, *args), len(args))
    # method call on a receiver with a known method
    recvs = []
    for v in b.ctx.recent():
        t = a.js_type(v)
        if definitely(t, Flag.OBJECT | Flag.FUNCTION) and t.shape is not None:
            ms = [m for m in t.shape.methods if m not in b.excluded]
            if ms:
                recvs.append((v, ms))
    if not recvs:
        raise InsufficientContext("no callable")
    v, ms = b.pick_recent(recvs)
    name = b.pick(ms)
    member = a.js_type(v).member(name)
    own = a.wasm_types.get(v)
    if isinstance(own, wt.TableType) and name in ("get", "set", "grow"):
        args = [b.out(Opcode.LoadNumber, (), b.rng.randint(0, max(0, own.initial - 1)) if name != "grow"
                      else b.rng.randint(0, 2))]
        if name == "set":
            args.append(wasm_argument(b, own.element))
    elif member is not None and member.signature is not None and not member.signature.generic:
        args = [argument(b, p) for p in member.signature.params]
    else:
        args = []
    return b.emit(Opcode.CallMethod, (v, *args), MethodCall(name, len(args)))


_NOT_CONSTRUCTED = frozenset({"WebAssembly.Module", "WebAssembly.Instance"})


def construct_generator(b: ProgramBuilder):
    a = b.analysis
    ctors = []
    for v in b.ctx.recent():
        t = a.js_type(v)
        if (definitely(t, Flag.FUNCTION | Flag.OBJECT) and t.signature is not None and t.signature.constructs
                and not (t.shape and t.shape.group in _NOT_CONSTRUCTED)):
            ctors.append(v)
    if not ctors:
        # reach the constructor through a builtin namespace member
        wasm = [v for v in b.ctx.recent() if a.js_type(v).shape is not None
                and a.js_type(v).shape.group == "WebAssembly"]
        if not wasm:
            raise InsufficientContext("no constructor")
        name = b.pick(["Memory", "Table", "Global", "Tag"])
        ctors = [b.out(Opcode.GetProperty, (b.pick(wasm),), name)]
    c = b.pick_recent(ctors)
    sig = a.js_type(c).signature
    args = [argument(b, p) for p in sig.params]
    return b.emit(Opcode.Construct, (c, *args), len(args))


_ARITH_OPS = ("+", "-", "*", "/", "%", "**", "&", "|", "^", "<<", ">>")
_SAFE_OPS = ("===", "!==", "==", "&&", "||", "??")


def operator_generator(b: ProgramBuilder):
    a, rng = b.analysis, b.rng
    vis = b.ctx.recent()
    if not vis:
        raise InsufficientContext("no operands")
    x = b.pick_recent(vis)
    tx = a.js_type(x)
    if rng.random() < 0.25:
        if definitely(tx, Flag.BIGINT):
            op = rng.choice(("-", "~", "!", "typeof"))
        elif definitely(tx, Flag.NUMBER | Flag.BOOLEAN | Flag.STRING):
            op = rng.choice(("-", "+", "~", "!", "typeof"))
        else:
            op = rng.choice(("!", "typeof"))
        return b.emit(Opcode.UnaryOp, (x,), op)
    if definitely(tx, Flag.BIGINT):
        ys = [v for v in vis if definitely(a.js_type(v), Flag.BIGINT)]
        ops = _ARITH_OPS + ("<", ">", "<=", ">=") + _SAFE_OPS
    elif definitely(tx, Flag.NUMBER | Flag.BOOLEAN):
        ys = [v for v in vis if definitely(a.js_type(v), Flag.NUMBER | Flag.BOOLEAN)]
        ops = _ARITH_OPS + (">>>", "<", ">", "<=", ">=") + _SAFE_OPS
    elif definitely(tx, Flag.STRING):
        ys = [v for v in vis if definitely(a.js_type(v), Flag.STRING | Flag.NUMBER)]
        ops = ("+", "<", ">") + _SAFE_OPS
    else:
        ys, ops = vis, ("===", "!==", "&&", "||", "??")
    ops = tuple(o for o in ops if o != "!==")  # not in the IR operator set
    y = b.pick_recent(ys or [x])
    op = rng.choice(ops)
    if op == "/" and definitely(a.js_type(y), Flag.BIGINT):
        op = "*"  # bigint division by zero throws
    if op in ("%", "**") and definitely(tx, Flag.BIGINT):
        op = "+"
    return b.emit(Opcode.BinaryOp, (x, y), op)


def function_definition_generator(b: ProgramBuilder):
    if b.in_block("loop"):
        raise InsufficientContext("no functions inside loops")
    n = b.rng.randint(0, 3)
    b.emit(Opcode.BeginFunction, (), n)
    b.inner(b, b.rng.randint(1, 4))
    vis = b.ctx.recent()
    if vis and b.rng.random() < 0.7:
        b.emit(Opcode.Return, (b.pick_recent(vis),))
    return b.emit(Opcode.EndFunction)


def prototype_overwrite_generator(b: ProgramBuilder):
    a = b.analysis
    vis = b.ctx.recent()
    if len(vis) < 2:
        raise InsufficientContext("needs two variables")
    objs = [v for v in an.query_js(b.ctx, js.object_()) if definitely(a.js_type(v), Flag.OBJECT | Flag.FUNCTION)]
    recv_pool = objs or [v for v in vis if not a.js_type(v).may_be(Flag.NULLISH)]
    if not recv_pool:
        raise InsufficientContext("no receiver")
    recv = b.pick_recent(recv_pool)
    vals = [v for v in objs if v != recv] or [v for v in vis if v != recv]
    return b.emit(Opcode.SetProperty, (recv, b.pick_recent(vals)), "__proto__")


def builtin_overwrite_generator(b: ProgramBuilder):
    vis = b.ctx.recent()
    if not vis:
        raise InsufficientContext("empty context")
    return b.emit(Opcode.StoreBuiltin, (b.pick(vis),), b.pick(b.env.loadable))


def try_wrap_generator(b: ProgramBuilder):
    b.emit(Opcode.BeginTry)
    b.inner(b, b.rng.randint(1, 3))
    b.emit(Opcode.BeginCatch)
    if b.rng.random() < 0.5:
        b.inner(b, 1)
    return b.emit(Opcode.EndTry)


def loop_wrap_generator(b: ProgramBuilder):
    if b.in_block("loop") or b.in_block("function"):
        raise InsufficientContext("loops do not nest")
    b.emit(Opcode.BeginForLoop, (), b.rng.randint(50, 500))
    b.inner(b, b.rng.randint(1, 3))
    return b.emit(Opcode.EndForLoop)


# Registry -------------------------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    name: str
    fn: Callable[[ProgramBuilder], object]
    is_wasm: bool = False
    block: bool = False
    in_loops: bool = True
    feature: str | None = None

    def available(self, b: ProgramBuilder) -> bool:
        if self.feature and not b.profile.enabled(self.feature):
            return False
        if not self.in_loops and b.in_block("loop"):
            return False
        return True


def _w(fn):
    def run(b: ProgramBuilder):
        return fn(b.rng, b)
    run.__name__ = fn.__name__
    return run


JS_GENERATORS = (
    Generator("BuiltinGenerator", builtin_generator),
    Generator("PrimitiveGenerator", primitive_generator),
    Generator("ObjectLiteralGenerator", object_literal_generator),
    Generator("ArrayLiteralGenerator", array_literal_generator),
    Generator("PropertyGetGenerator", property_get_generator),
    Generator("PropertySetGenerator", property_set_generator),
    Generator("CallGenerator", call_generator),
    Generator("ConstructGenerator", construct_generator),
    Generator("OperatorGenerator", operator_generator),
    Generator("FunctionDefinitionGenerator", function_definition_generator, block=True, in_loops=False),
    Generator("PrototypeOverwriteGenerator", prototype_overwrite_generator),
    Generator("BuiltinOverwriteGenerator", builtin_overwrite_generator),
    Generator("TryWrapGenerator", try_wrap_generator, block=True),
    Generator("LoopWrapGenerator", loop_wrap_generator, block=True, in_loops=False),
)
WASM_GENERATORS = (
    Generator("WasmMemoryGenerator", _w(wg.gen_wasm_memory), is_wasm=True, in_loops=False),
    Generator("WasmTableGenerator", _w(wg.gen_wasm_table), is_wasm=True),
    Generator("WasmGlobalGenerator", _w(wg.gen_wasm_global), is_wasm=True),
    Generator("WasmTagGenerator", _w(wg.gen_wasm_tag), is_wasm=True, feature="exceptions"),
    Generator("WasmInstanceAndExportGenerator", _w(wg.gen_instance_and_exports), is_wasm=True, in_loops=False),
)
ALL_GENERATORS = JS_GENERATORS + WASM_GENERATORS


def run_generator(b: ProgramBuilder, g: Generator) -> bool:
    """Apply ``g``; on failure roll the builder back and return False."""
    if not g.available(b):
        return False
    snap = b.snapshot()
    try:
        g.fn(b)
        return True
    except (InsufficientContext, wg.SynthesisFailed):
        b.restore(snap)
        return False


def default_inner(b: ProgramBuilder, k: int, pool=None):
    """Fill a block body with ``k`` non-block generator applications (uniform choice)."""
    pool = [g for g in (pool or ALL_GENERATORS) if not g.block]
    done = tries = 0
    while done < k and tries < 8 * k:
        tries += 1
        if run_generator(b, pool[b.rng.randrange(len(pool))]):
            done += 1


ProgramBuilder.inner = staticmethod(default_inner)

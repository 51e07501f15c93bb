"""Dual-type conversion between Wasm types and JS types."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

from . import jstype as js
from .jstype import Flag, JSType
from .wasm_types import (
    EXN_FAMILY,
    AbsHeap,
    CompositeType,
    DefType,
    FuncType,
    GlobalType,
    InstanceType,
    MemoryType,
    ModuleType,
    NumType,
    RefType,
    StructType,
    ArrayType,
    TableType,
    TagType,
    TypeDefs,
    UnresolvedTypeIndex,
    ValueType,
    canonicalize,
)


class UnsupportedTypeError(TypeError):
    def __init__(self, valtype):
        super().__init__(f"{valtype!r} has no JS representation")
        self.valtype = valtype


# Heap kinds a nullish JS value can stand for; the exn family is never produced.
NULLISH_HEAPS = (
    AbsHeap.ANY,
    AbsHeap.EQ,
    AbsHeap.I31,
    AbsHeap.STRUCT,
    AbsHeap.ARRAY,
    AbsHeap.FUNC,
    AbsHeap.EXTERN,
    AbsHeap.NONE,
    AbsHeap.NOFUNC,
    AbsHeap.NOEXTERN,
)
EXCLUDED = frozenset({NumType.V128, RefType(AbsHeap.EXN, True), RefType(AbsHeap.NOEXN, True)})


def convert_to_abstract_type(heap, type_defs: Sequence[Sequence[CompositeType]] | TypeDefs = ()) -> AbsHeap:
    if isinstance(heap, AbsHeap):
        return heap
    if isinstance(heap, int):
        heap = canonicalize(RefType(heap), type_defs).heap
    if isinstance(heap, DefType):
        c = heap.composite
        if isinstance(c, StructType):
            return AbsHeap.STRUCT
        if isinstance(c, ArrayType):
            return AbsHeap.ARRAY
        return AbsHeap.FUNC
    raise UnresolvedTypeIndex(heap)


def to_js_type(valtype: ValueType, type_defs=()) -> JSType:
    if valtype in (NumType.I32, NumType.F32, NumType.F64):
        return js.NUMBER
    if valtype is NumType.I64:
        return js.BIGINT
    if valtype is NumType.V128:
        raise UnsupportedTypeError(valtype)
    if not isinstance(valtype, RefType):
        raise TypeError(f"not a value type: {valtype!r}")
    if isinstance(valtype.heap, AbsHeap) and valtype.heap in EXN_FAMILY:
        raise UnsupportedTypeError(valtype)
    kind = convert_to_abstract_type(valtype.heap, type_defs)
    if kind in (AbsHeap.STRUCT, AbsHeap.ARRAY):
        out = js.object_()
    elif kind is AbsHeap.FUNC:
        # funcref values surfacing in JS are always exported Wasm functions
        out = JSType(Flag.FUNCTION, signature=js.Signature(wasm=True, generic=True))
    elif kind is AbsHeap.I31:
        out = js.NUMBER
    else:
        out = js.ANYTHING
    if valtype.nullable:
        out = out | js.NULLISH
    return out


# Member annotations for the object templates.
ARRAY_BUFFER = js.object_(
    ["byteLength", "maxByteLength", "resizable", "detached"],
    ["slice", "resize", "transfer"],
    group="ArrayBuffer",
    members={"byteLength": js.INTEGER, "maxByteLength": js.INTEGER, "resizable": js.BOOLEAN,
             "detached": js.BOOLEAN},
)

MEMORY_TEMPLATE = js.object_(
    ["buffer"],
    ["grow", "toResizableBuffer", "toFixedLengthBuffer"],
    group="WebAssembly.Memory",
    members={
        "buffer": ARRAY_BUFFER,
        "grow": js.function([js.NUMBER], js.NUMBER),
        "toResizableBuffer": js.function([], ARRAY_BUFFER),
        "toFixedLengthBuffer": js.function([], ARRAY_BUFFER),
    },
)
TABLE_TEMPLATE = js.object_(
    ["length"],
    ["get", "grow", "set"],
    group="WebAssembly.Table",
    members={
        "length": js.NUMBER,
        "get": js.function([js.NUMBER], js.ANYTHING),
        "grow": js.function([js.NUMBER], js.NUMBER),
        "set": js.function([js.NUMBER, js.ANYTHING], js.UNDEFINED),
    },
)
GLOBAL_TEMPLATE = js.object_(
    ["value"],
    ["valueOf"],
    group="WebAssembly.Global",
    members={"value": js.ANYTHING, "valueOf": js.function([], js.ANYTHING)},
)
TAG_TEMPLATE = js.object_(group="WebAssembly.Tag")
MODULE_TEMPLATE = js.object_(group="WebAssembly.Module")
INSTANCE_TEMPLATE = js.object_(["exports"], [], group="WebAssembly.Instance", members={"exports": js.object_()})


def wasm_object_to_js_type(t, type_defs=()) -> JSType:
    if isinstance(t, MemoryType):
        return MEMORY_TEMPLATE
    if isinstance(t, TableType):
        return TABLE_TEMPLATE
    if isinstance(t, GlobalType):
        return GLOBAL_TEMPLATE
    if isinstance(t, TagType):
        return TAG_TEMPLATE
    if isinstance(t, ModuleType):
        return MODULE_TEMPLATE
    if isinstance(t, InstanceType):
        return INSTANCE_TEMPLATE
    if isinstance(t, FuncType):
        params = [to_js_type(p, type_defs) for p in t.params]
        results = [to_js_type(r, type_defs) for r in t.results]
        if not results:
            ret = js.UNDEFINED
        elif len(results) == 1:
            ret = results[0]
        else:
            ret = js.object_(["length"], [], group="Array", members={"length": js.INTEGER})
        return js.function(params, ret, wasm=True)
    raise TypeError(f"not a Wasm object type: {t!r}")


def _nonnull(heap) -> RefType:
    return RefType(heap, False)


def _null(heap) -> RefType:
    return RefType(heap, True)


@lru_cache(maxsize=4096)
def to_wasm_value_types(t: JSType) -> frozenset:
    """Wasm value types a JS value of type ``t`` can be passed as.

    Branches apply when ``t`` is subsumed by the branch's type. A type that
    mixes nullish with other flags only keeps nullable references.
    """
    out: set = set()
    if t.is_nothing:
        return frozenset()
    if t.is_(js.NULLISH):
        out.update(_null(h) for h in NULLISH_HEAPS)
    core = JSType(t.flags & ~Flag.NULLISH, t.shape, t.signature)
    if not core.is_nothing:
        if core.is_(js.INTEGER):
            out.update({NumType.I32, NumType.F32, NumType.F64, _nonnull(AbsHeap.I31), _null(AbsHeap.I31)})
        if core.is_(js.NUMBER):
            out.update({NumType.F32, NumType.F64})
        if core.is_(js.BIGINT):
            out.add(NumType.I64)
        if core.flags == Flag.FUNCTION and core.signature.wasm:
            out.update({_nonnull(AbsHeap.FUNC), _null(AbsHeap.FUNC)})
        # may not be nullish
        out.update({_nonnull(AbsHeap.ANY), _nonnull(AbsHeap.EXTERN), _null(AbsHeap.ANY), _null(AbsHeap.EXTERN)})
        if t.flags & Flag.NULLISH:
            out = {v for v in out if isinstance(v, RefType) and v.nullable}
    out -= EXCLUDED
    return frozenset(v for v in out if not (isinstance(v, RefType) and v.heap in EXN_FAMILY))

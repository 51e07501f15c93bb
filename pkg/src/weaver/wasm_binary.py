"""Wasm binary encoding of module shapes and the shape parser."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

from . import wasm_types as wt
from .wasm_types import (
    AbsHeap, ArrayType, DefType, Export, FieldType, FuncType, GlobalType, Import, MemoryType, ModuleType, NumType,
    PackedType, RecIdx, RefType, StructType, TableType, TagType,
)

MAGIC = b"\x00asm"
VERSION = b"\x01\x00\x00\x00"
HEADER = MAGIC + VERSION


class MalformedModule(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_NUM_CODE = {NumType.I32: 0x7F, NumType.I64: 0x7E, NumType.F32: 0x7D, NumType.F64: 0x7C, NumType.V128: 0x7B}
_PACKED_CODE = {PackedType.I8: 0x78, PackedType.I16: 0x77}
_HEAP_CODE = {
    AbsHeap.FUNC: 0x70, AbsHeap.EXTERN: 0x6F, AbsHeap.ANY: 0x6E, AbsHeap.EQ: 0x6D, AbsHeap.I31: 0x6C,
    AbsHeap.STRUCT: 0x6B, AbsHeap.ARRAY: 0x6A, AbsHeap.EXN: 0x69, AbsHeap.NONE: 0x71, AbsHeap.NOEXTERN: 0x72,
    AbsHeap.NOFUNC: 0x73, AbsHeap.NOEXN: 0x74,
}
_CODE_NUM = {v: k for k, v in _NUM_CODE.items()}
_CODE_PACKED = {v: k for k, v in _PACKED_CODE.items()}
_CODE_HEAP = {v: k for k, v in _HEAP_CODE.items()}

KIND_FUNC, KIND_TABLE, KIND_MEMORY, KIND_GLOBAL, KIND_TAG = range(5)


def extern_kind(t) -> int:
    if isinstance(t, FuncType):
        return KIND_FUNC
    if isinstance(t, TableType):
        return KIND_TABLE
    if isinstance(t, MemoryType):
        return KIND_MEMORY
    if isinstance(t, GlobalType):
        return KIND_GLOBAL
    if isinstance(t, TagType):
        return KIND_TAG
    raise TypeError(f"not an extern type: {t!r}")


# LEB128 --------------------------------------------------------------------


def uleb(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def sleb(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if (n == 0 and not b & 0x40) or (n == -1 and b & 0x40):
            out.append(b)
            return bytes(out)
        out.append(b | 0x80)


def vec(items: Sequence[bytes]) -> bytes:
    return uleb(len(items)) + b"".join(items)


def name(s: str) -> bytes:
    b = s.encode("utf-8")
    return uleb(len(b)) + b


# Shape canonicalisation -------------------------------------------------------


def _heaps_of_group(group) -> list[DefType]:
    out = []
    for c in group:
        for h in wt._iter_heaps(c):
            if isinstance(h, DefType):
                out.append(h)
    return out


def _signature_group(t) -> tuple:
    ft = t if isinstance(t, FuncType) else FuncType(t.params, ())
    return (ft,)


def ordered_groups(shape: ModuleType) -> list[tuple]:
    """All recursion groups a module for ``shape`` must declare, dependencies first."""
    out: list[tuple] = []

    def add(g):
        if g in out:
            return
        for d in _heaps_of_group(g):
            if d.group != g:
                add(d.group)
        if g not in out:
            out.append(g)

    def add_refs(t):
        for h in wt._iter_heaps(t):
            if isinstance(h, DefType):
                add(h.group)

    for g in shape.type_defs:
        add(g)
    for ent in list(shape.imports) + list(shape.exports):
        t = ent.type
        add_refs(t)
        if isinstance(t, (FuncType, TagType)):
            add(_signature_group(t))
    return out


def canonical_shape(shape: ModuleType) -> ModuleType:
    shape = wt.canonicalize(shape) if not wt.is_canonical(shape) else shape
    return ModuleType(tuple(ordered_groups(shape)), shape.imports, shape.exports)


# Encoder ---------------------------------------------------------------------


class _TypeIndex:
    def __init__(self, groups):
        self.groups = groups
        self.start = {}
        n = 0
        for g in groups:
            self.start[g] = n
            n += len(g)

    def of(self, d: DefType) -> int:
        return self.start[d.group] + d.index

    def sig(self, t) -> int:
        return self.start[_signature_group(t)]


def _enc_heap(h, ti: _TypeIndex, cur_start: int | None) -> bytes:
    if isinstance(h, AbsHeap):
        return bytes([_HEAP_CODE[h]])
    if isinstance(h, RecIdx):
        return sleb(cur_start + h.index)
    if isinstance(h, DefType):
        return sleb(ti.of(h))
    raise TypeError(f"non-canonical heap {h!r}")


def enc_valtype(t, ti: _TypeIndex, cur_start: int | None = None) -> bytes:
    if isinstance(t, NumType):
        return bytes([_NUM_CODE[t]])
    if isinstance(t, PackedType):
        return bytes([_PACKED_CODE[t]])
    if t.nullable and isinstance(t.heap, AbsHeap):
        return bytes([_HEAP_CODE[t.heap]])  # shorthand form
    return bytes([0x63 if t.nullable else 0x64]) + _enc_heap(t.heap, ti, cur_start)


def _enc_composite(c, ti, start) -> bytes:
    if isinstance(c, FuncType):
        return (b"\x60" + vec([enc_valtype(p, ti, start) for p in c.params])
                + vec([enc_valtype(r, ti, start) for r in c.results]))
    if isinstance(c, StructType):
        return b"\x5F" + vec([enc_valtype(f.storage, ti, start) + bytes([int(f.mutable)]) for f in c.fields])
    return b"\x5E" + enc_valtype(c.field.storage, ti, start) + bytes([int(c.field.mutable)])


def _limits(initial, maximum, addr64, shared) -> bytes:
    flags = (1 if maximum is not None else 0) | (2 if shared else 0) | (4 if addr64 else 0)
    out = bytes([flags]) + uleb(initial)
    if maximum is not None:
        out += uleb(maximum)
    return out


def enc_extern_type(t, ti: _TypeIndex) -> bytes:
    if isinstance(t, FuncType):
        return uleb(ti.sig(t))
    if isinstance(t, TableType):
        return enc_valtype(t.element, ti) + _limits(t.initial, t.maximum, t.addr64, t.shared)
    if isinstance(t, MemoryType):
        return _limits(t.initial, t.maximum, t.addr64, t.shared)
    if isinstance(t, GlobalType):
        return enc_valtype(t.content, ti) + bytes([int(t.mutable)])
    if isinstance(t, TagType):
        return b"\x00" + uleb(ti.sig(t))
    raise TypeError(t)


def default_const(t, ti: _TypeIndex) -> bytes | None:
    """Constant expression for the default value of ``t`` (None if not defaultable)."""
    if t is NumType.I32:
        return b"\x41\x00"
    if t is NumType.I64:
        return b"\x42\x00"
    if t is NumType.F32:
        return b"\x43" + struct.pack("<f", 0.0)
    if t is NumType.F64:
        return b"\x44" + struct.pack("<d", 0.0)
    if t is NumType.V128:
        return b"\xFD\x0C" + bytes(16)
    if isinstance(t, RefType) and t.nullable:
        return b"\xD0" + _enc_heap(t.heap, ti, None)
    return None


def section(sid: int, body: bytes) -> bytes:
    return bytes([sid]) + uleb(len(body)) + body


@dataclass
class ModuleBuilder:
    """Assembles a module whose import/export sections follow a shape."""

    groups: list = field(default_factory=list)
    imports: list = field(default_factory=list)
    funcs: list = field(default_factory=list)  # (FuncType, body bytes)
    tables: list = field(default_factory=list)
    memories: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    globals: list = field(default_factory=list)  # (GlobalType, init bytes)
    exports: list = field(default_factory=list)  # (name, kind, index)

    def encode(self) -> bytes:
        ti = _TypeIndex(self.groups)
        out = bytearray(HEADER)
        if self.groups:
            entries = []
            for g in self.groups:
                start = ti.start[g]
                if len(g) == 1:
                    entries.append(_enc_composite(g[0], ti, start))
                else:
                    entries.append(b"\x4E" + vec([_enc_composite(c, ti, start) for c in g]))
            out += section(1, vec(entries))
        if self.imports:
            out += section(2, vec([name(i.module) + name(i.name) + bytes([extern_kind(i.type)])
                                   + enc_extern_type(i.type, ti) for i in self.imports]))
        if self.funcs:
            out += section(3, vec([uleb(ti.sig(f)) for f, _ in self.funcs]))
        if self.tables:
            out += section(4, vec([enc_extern_type(t, ti) for t in self.tables]))
        if self.memories:
            out += section(5, vec([enc_extern_type(m, ti) for m in self.memories]))
        if self.tags:
            out += section(13, vec([enc_extern_type(t, ti) for t in self.tags]))
        if self.globals:
            out += section(6, vec([enc_extern_type(g, ti) + init + b"\x0B" for g, init in self.globals]))
        if self.exports:
            out += section(7, vec([name(n) + bytes([k]) + uleb(i) for n, k, i in self.exports]))
        if self.funcs:
            bodies = []
            for _, body in self.funcs:
                b = b"\x00" + body  # no locals
                bodies.append(uleb(len(b)) + b)
            out += section(10, vec(bodies))
        return bytes(out)


def stub_body(ft: FuncType, ti: _TypeIndex) -> bytes:
    parts = []
    for r in ft.results:
        c = default_const(r, ti)
        if c is None:
            return b"\x00\x0B"  # unreachable; end
        parts.append(c)
    return b"".join(parts) + b"\x0B"


# Parser ----------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def fail(self, msg):
        raise MalformedModule(msg, self.pos)

    def byte(self) -> int:
        if self.pos >= self.end:
            self.fail("unexpected end")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n) -> bytes:
        if n < 0 or self.pos + n > self.end:
            self.fail("unexpected end")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def uleb(self, bits=32) -> int:
        result = shift = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                return result
            if shift >= bits + 7:
                self.fail("LEB128 too long")

    def sleb(self, bits=64) -> int:
        result = shift = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                if b & 0x40:
                    result -= 1 << shift
                return result
            if shift >= bits + 7:
                self.fail("LEB128 too long")

    def name(self) -> str:
        n = self.uleb()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            self.fail("invalid UTF-8 name")


def _heap(r: _Reader):
    b = r.data[r.pos] if r.pos < r.end else None
    if b is None:
        r.fail("unexpected end")
    if b in _CODE_HEAP:
        r.pos += 1
        return _CODE_HEAP[b]
    idx = r.sleb(33)
    if idx < 0:
        r.fail("bad heap type")
    return idx


def _valtype(r: _Reader, storage=False):
    b = r.byte()
    if b in _CODE_NUM:
        return _CODE_NUM[b]
    if storage and b in _CODE_PACKED:
        return _CODE_PACKED[b]
    if b in _CODE_HEAP:
        return RefType(_CODE_HEAP[b], True)
    if b in (0x63, 0x64):
        return RefType(_heap(r), b == 0x63)
    r.pos -= 1
    r.fail(f"bad value type 0x{b:02x}")


def _composite(r: _Reader):
    b = r.byte()
    if b == 0x60:
        params = tuple(_valtype(r) for _ in range(r.uleb()))
        results = tuple(_valtype(r) for _ in range(r.uleb()))
        return FuncType(params, results)
    if b == 0x5F:
        fields = []
        for _ in range(r.uleb()):
            st = _valtype(r, storage=True)
            m = r.byte()
            if m > 1:
                r.fail("bad mutability")
            fields.append(FieldType(st, bool(m)))
        return StructType(tuple(fields))
    if b == 0x5E:
        st = _valtype(r, storage=True)
        m = r.byte()
        if m > 1:
            r.fail("bad mutability")
        return ArrayType(FieldType(st, bool(m)))
    if b in (0x50, 0x4F):
        supers = r.uleb()
        if supers or b == 0x50:
            r.fail("declared subtyping is not supported")
        return _composite(r)
    r.pos -= 1
    r.fail(f"bad composite type 0x{b:02x}")


def _limits_r(r: _Reader):
    flags = r.byte()
    if flags > 7:
        r.fail("bad limits flags")
    bits = 64 if flags & 4 else 32
    initial = r.uleb(bits)
    maximum = r.uleb(bits) if flags & 1 else None
    return initial, maximum, bool(flags & 4), bool(flags & 2)


def _const_expr(r: _Reader):
    while True:
        op = r.byte()
        if op == 0x0B:
            return
        if op == 0x41:
            r.sleb(32)
        elif op == 0x42:
            r.sleb(64)
        elif op == 0x43:
            r.take(4)
        elif op == 0x44:
            r.take(8)
        elif op == 0xD0:
            _heap(r)
        elif op in (0xD2, 0x23):
            r.uleb()
        elif op in (0x6A, 0x6B, 0x6C, 0x7C, 0x7D, 0x7E):
            pass
        elif op == 0xFD:
            sub = r.uleb()
            if sub != 12:
                r.fail("unsupported vector constant")
            r.take(16)
        elif op == 0xFB:
            sub = r.uleb()
            if sub in (0x1C, 0x1D, 0x1E):
                pass
            elif sub in (0, 1, 6, 7):
                r.uleb()
            elif sub == 8:
                r.uleb()
                r.uleb()
            else:
                r.fail("unsupported constant instruction")
        else:
            r.pos -= 1
            r.fail(f"unsupported constant instruction 0x{op:02x}")


_SECTION_ORDER = {1: 1, 2: 2, 3: 3, 4: 4, 5: 5, 13: 6, 6: 7, 7: 8, 8: 9, 9: 10, 12: 11, 10: 12, 11: 13}


def parse_shape(data: bytes) -> ModuleType:
    """Decode the type, import and export sections into a canonical shape."""
    data = bytes(data)
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise MalformedModule("bad magic", 0)
    if r.take(4) != VERSION:
        raise MalformedModule("unsupported version", 4)
    groups: list[list] = []
    raw_imports: list[tuple] = []
    func_types: list[int] = []
    tables: list = []
    memories: list = []
    tags: list[int] = []
    globals_: list = []
    raw_exports: list[tuple] = []
    bodies = 0
    last = 0
    while r.pos < r.end:
        sid = r.byte()
        size = r.uleb()
        start = r.pos
        if start + size > r.end:
            r.fail("section overruns module")
        s = _Reader(data, start, start + size)
        if sid != 0:
            order = _SECTION_ORDER.get(sid)
            if order is None:
                raise MalformedModule(f"unknown section id {sid}", start - 1)
            if order <= last:
                raise MalformedModule(f"section {sid} out of order", start - 1)
            last = order
        if sid == 1:
            for _ in range(s.uleb()):
                if s.pos < s.end and data[s.pos] == 0x4E:
                    s.pos += 1
                    groups.append([_composite(s) for _ in range(s.uleb())])
                else:
                    groups.append([_composite(s)])
        elif sid == 2:
            for _ in range(s.uleb()):
                mod, nm = s.name(), s.name()
                kind = s.byte()
                if kind == KIND_FUNC:
                    raw_imports.append((mod, nm, kind, s.uleb()))
                elif kind == KIND_TABLE:
                    el = _valtype(s)
                    raw_imports.append((mod, nm, kind, (el, _limits_r(s))))
                elif kind == KIND_MEMORY:
                    raw_imports.append((mod, nm, kind, _limits_r(s)))
                elif kind == KIND_GLOBAL:
                    vt = _valtype(s)
                    raw_imports.append((mod, nm, kind, (vt, s.byte())))
                elif kind == KIND_TAG:
                    if s.byte() != 0:
                        s.fail("bad tag attribute")
                    raw_imports.append((mod, nm, kind, s.uleb()))
                else:
                    s.fail(f"bad import kind {kind}")
        elif sid == 3:
            func_types = [s.uleb() for _ in range(s.uleb())]
        elif sid == 4:
            for _ in range(s.uleb()):
                if s.pos < s.end and data[s.pos] == 0x40:
                    s.pos += 1
                    if s.byte() != 0:
                        s.fail("bad table prefix")
                    el = _valtype(s)
                    lim = _limits_r(s)
                    _const_expr(s)
                else:
                    el = _valtype(s)
                    lim = _limits_r(s)
                tables.append((el, lim))
        elif sid == 5:
            memories = [_limits_r(s) for _ in range(s.uleb())]
        elif sid == 13:
            for _ in range(s.uleb()):
                if s.byte() != 0:
                    s.fail("bad tag attribute")
                tags.append(s.uleb())
        elif sid == 6:
            for _ in range(s.uleb()):
                vt = _valtype(s)
                m = s.byte()
                _const_expr(s)
                globals_.append((vt, m))
        elif sid == 7:
            for _ in range(s.uleb()):
                raw_exports.append((s.name(), s.byte(), s.uleb()))
        elif sid == 10:
            bodies = s.uleb()
            s.pos = s.end
        else:
            s.pos = s.end
        if sid in (1, 2, 3, 4, 5, 6, 7, 13) and s.pos != s.end:
            raise MalformedModule(f"section {sid} size mismatch", s.pos)
        r.pos = start + size
    if bodies != len(func_types):
        raise MalformedModule(f"{len(func_types)} functions declared but {bodies} bodies", r.pos)

    try:
        defs = wt.TypeDefs(groups)
        n_types = len(defs)

        def fix(t):
            return defs.canonicalize(t)

        def func_type(idx, offset_hint=0) -> FuncType:
            if idx >= n_types:
                raise MalformedModule(f"type index {idx} out of range", offset_hint)
            d = defs.def_type(idx)
            c = d.composite
            if not isinstance(c, FuncType):
                raise MalformedModule(f"type {idx} is not a function type", offset_hint)
            if len(d.group) == 1 and wt.is_canonical(c):
                return c
            return d.expand()

        def mem(lim):
            init, mx, a64, shared = lim
            if mx is not None and mx < init:
                raise MalformedModule("memory maximum below initial", 0)
            if shared and mx is None:
                raise MalformedModule("shared memory without maximum", 0)
            return MemoryType(init, mx, a64, shared)

        def table(el, lim):
            init, mx, a64, shared = lim
            if mx is not None and mx < init:
                raise MalformedModule("table maximum below initial", 0)
            return fix(TableType(el, init, mx, a64, shared))

        spaces = {k: [] for k in range(5)}
        imports = []
        for mod, nm, kind, desc in raw_imports:
            if kind == KIND_FUNC:
                t = func_type(desc)
            elif kind == KIND_TABLE:
                t = table(*desc)
            elif kind == KIND_MEMORY:
                t = mem(desc)
            elif kind == KIND_GLOBAL:
                vt, m = desc
                if m > 1:
                    raise MalformedModule("bad global mutability", 0)
                t = fix(GlobalType(vt, bool(m)))
            else:
                ft = func_type(desc)
                if ft.results:
                    raise MalformedModule("tag type with results", 0)
                t = TagType(ft.params)
            spaces[kind].append(t)
            imports.append(Import(mod, nm, t))
        spaces[KIND_FUNC] += [func_type(i) for i in func_types]
        spaces[KIND_TABLE] += [table(el, lim) for el, lim in tables]
        spaces[KIND_MEMORY] += [mem(lim) for lim in memories]
        for i in tags:
            ft = func_type(i)
            if ft.results:
                raise MalformedModule("tag type with results", 0)
            spaces[KIND_TAG].append(TagType(ft.params))
        spaces[KIND_GLOBAL] += [fix(GlobalType(vt, bool(m))) for vt, m in globals_]
        exports = []
        for nm, kind, idx in raw_exports:
            if kind not in spaces:
                raise MalformedModule(f"bad export kind {kind}", 0)
            if idx >= len(spaces[kind]):
                raise MalformedModule(f"export index {idx} out of range", 0)
            exports.append(Export(nm, spaces[kind][idx]))
        shape = ModuleType(wt.canonical_groups(groups), tuple(imports), tuple(exports))
    except wt.WasmTypeError as e:
        raise MalformedModule(str(e), 0) from None
    return shape

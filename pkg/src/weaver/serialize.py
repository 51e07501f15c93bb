"""Deterministic tagged binary encoding for programs (corpus files)."""

from __future__ import annotations

import dataclasses
import enum
import struct

from . import ir
from . import wasm_types as wt

MAGIC = b"WVIL"
VERSION = 1


class MalformedEncoding(ValueError):
    pass


_T_NONE, _T_FALSE, _T_TRUE, _T_INT, _T_FLOAT, _T_STR, _T_BYTES, _T_TUPLE, _T_ENUM, _T_DATA = range(10)

_ENUMS = {c.__name__: c for c in (wt.NumType, wt.PackedType, wt.AbsHeap, ir.Opcode)}
_CLASSES = {
    c.__name__: c
    for c in (
        wt.RecIdx, wt.FieldType, wt.StructType, wt.ArrayType, wt.FuncType, wt.DefType, wt.RefType, wt.MemoryType,
        wt.TableType, wt.GlobalType, wt.TagType, wt.Import, wt.Export, wt.ModuleType, wt.InstanceType,
        ir.MethodCall, ir.WasmTableSpec, ir.WasmGlobalSpec, ir.WasmModuleBlob, ir.ImportBinding, ir.WasmExportRef,
        ir.Instruction,
    )
}


def _uleb(n: int, out: bytearray):
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _encode(v, out: bytearray):
    if v is None:
        out.append(_T_NONE)
    elif v is False:
        out.append(_T_FALSE)
    elif v is True:
        out.append(_T_TRUE)
    elif isinstance(v, enum.Enum):
        out.append(_T_ENUM)
        _encode(type(v).__name__, out)
        _encode(v.name, out)
    elif isinstance(v, int):
        out.append(_T_INT)
        _uleb(v * 2 if v >= 0 else -v * 2 - 1, out)
    elif isinstance(v, float):
        out.append(_T_FLOAT)
        out += struct.pack("<d", v)
    elif isinstance(v, str):
        b = v.encode("utf-8", "surrogatepass")
        out.append(_T_STR)
        _uleb(len(b), out)
        out += b
    elif isinstance(v, (bytes, bytearray)):
        out.append(_T_BYTES)
        _uleb(len(v), out)
        out += v
    elif isinstance(v, (tuple, list)):
        out.append(_T_TUPLE)
        _uleb(len(v), out)
        for x in v:
            _encode(x, out)
    elif dataclasses.is_dataclass(v) and type(v).__name__ in _CLASSES:
        fs = dataclasses.fields(v)
        out.append(_T_DATA)
        _encode(type(v).__name__, out)
        _uleb(len(fs), out)
        for f in fs:
            _encode(getattr(v, f.name), out)
    else:
        raise TypeError(f"cannot encode {type(v).__name__}")


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def byte(self) -> int:
        if self.pos >= len(self.data):
            raise MalformedEncoding(f"unexpected end of input at offset {self.pos}")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedEncoding(f"unexpected end of input at offset {self.pos}")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def uleb(self) -> int:
        shift = result = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result
            shift += 7
            if shift > 7 * 64:
                raise MalformedEncoding("integer too long")

    def value(self, depth: int = 0):
        if depth > 200:
            raise MalformedEncoding("nesting too deep")
        tag = self.byte()
        if tag == _T_NONE:
            return None
        if tag == _T_FALSE:
            return False
        if tag == _T_TRUE:
            return True
        if tag == _T_INT:
            z = self.uleb()
            return z >> 1 if not z & 1 else -((z + 1) >> 1)
        if tag == _T_FLOAT:
            return struct.unpack("<d", self.take(8))[0]
        if tag == _T_STR:
            try:
                return self.take(self.uleb()).decode("utf-8", "surrogatepass")
            except UnicodeDecodeError as e:
                raise MalformedEncoding(str(e)) from None
        if tag == _T_BYTES:
            return bytes(self.take(self.uleb()))
        if tag == _T_TUPLE:
            n = self.uleb()
            return tuple(self.value(depth + 1) for _ in range(n))
        if tag == _T_ENUM:
            cls = _ENUMS.get(self.value(depth + 1))
            name = self.value(depth + 1)
            if cls is None or not isinstance(name, str) or name not in cls.__members__:
                raise MalformedEncoding("unknown enum member")
            return cls[name]
        if tag == _T_DATA:
            cls = _CLASSES.get(self.value(depth + 1))
            if cls is None:
                raise MalformedEncoding("unknown record class")
            n = self.uleb()
            if n != len(dataclasses.fields(cls)):
                raise MalformedEncoding(f"field count mismatch for {cls.__name__}")
            args = [self.value(depth + 1) for _ in range(n)]
            try:
                return cls(*args)
            except Exception as e:  # invariant checks in constructors
                raise MalformedEncoding(f"invalid {cls.__name__}: {e}") from None
        raise MalformedEncoding(f"unknown tag {tag} at offset {self.pos - 1}")


def encode_value(v) -> bytes:
    out = bytearray()
    _encode(v, out)
    return bytes(out)


def decode_value(data: bytes):
    r = _Reader(data)
    v = r.value()
    if r.pos != len(data):
        raise MalformedEncoding(f"trailing bytes at offset {r.pos}")
    return v


def serialize(program: ir.Program) -> bytes:
    out = bytearray(MAGIC)
    out.append(VERSION)
    _encode(program.next_variable, out)
    _encode(program.instructions, out)
    return bytes(out)


def deserialize(data: bytes) -> ir.Program:
    if len(data) < 5 or data[:4] != MAGIC:
        raise MalformedEncoding("missing WVIL magic")
    if data[4] != VERSION:
        raise MalformedEncoding(f"unsupported version {data[4]}")
    r = _Reader(data, 5)
    nxt = r.value()
    instrs = r.value()
    if r.pos != len(data):
        raise MalformedEncoding(f"trailing bytes at offset {r.pos}")
    if not isinstance(nxt, int) or isinstance(nxt, bool) or nxt < 0:
        raise MalformedEncoding("bad variable counter")
    if not isinstance(instrs, tuple) or not all(isinstance(i, ir.Instruction) for i in instrs):
        raise MalformedEncoding("bad instruction list")
    for i in instrs:
        if not isinstance(i.op, ir.Opcode):
            raise MalformedEncoding("bad opcode")
    return ir.Program(instrs, nxt)

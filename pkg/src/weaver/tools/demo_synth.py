"""Example external module synthesizer.

Protocol: a module carrying the requested shape arrives on stdin and the seed
is the last argument; a module with the same imports and exports goes to
stdout. This one returns seed-dependent constants from exported functions and
adds an unexported global, so its output differs from the built-in stubs.
"""

from __future__ import annotations

import random
import struct
import sys

from .. import wasm_types as wt
from ..wasm_binary import ModuleBuilder, _TypeIndex, default_const, extern_kind, parse_shape, sleb


def _body(ft: wt.FuncType, ti: _TypeIndex, rng: random.Random) -> bytes:
    parts = []
    for r in ft.results:
        if r is wt.I32:
            parts.append(b"\x41" + sleb(rng.randint(-2**31, 2**31 - 1)))
        elif r is wt.I64:
            parts.append(b"\x42" + sleb(rng.randint(-2**63, 2**63 - 1)))
        elif r is wt.F32:
            parts.append(b"\x43" + struct.pack("<f", rng.uniform(-1e6, 1e6)))
        elif r is wt.F64:
            parts.append(b"\x44" + struct.pack("<d", rng.uniform(-1e9, 1e9)))
        else:
            c = default_const(r, ti)
            if c is None:
                return b"\x00\x0B"
            parts.append(c)
    return b"".join(parts) + b"\x0B"


def synthesize(request: bytes, seed: int) -> bytes:
    shape = parse_shape(request)
    rng = random.Random(seed)
    mb = ModuleBuilder(groups=list(shape.type_defs), imports=list(shape.imports))
    ti = _TypeIndex(mb.groups)
    counts = {k: sum(1 for i in shape.imports if extern_kind(i.type) == k) for k in range(5)}
    imported = {k: [i.type for i in shape.imports if extern_kind(i.type) == k] for k in range(5)}
    for e in shape.exports:
        t, kind = e.type, extern_kind(e.type)
        fresh_ok = not (isinstance(t, wt.GlobalType) and default_const(t.content, ti) is None) and \
            not (isinstance(t, wt.TableType) and not t.element.nullable)
        if t in imported[kind] and (isinstance(t, wt.MemoryType) or not fresh_ok):
            mb.exports.append((e.name, kind, imported[kind].index(t)))
            continue
        if isinstance(t, wt.FuncType):
            mb.funcs.append((t, _body(t, ti, rng)))
        elif isinstance(t, wt.TableType):
            mb.tables.append(t)
        elif isinstance(t, wt.MemoryType):
            mb.memories.append(t)
        elif isinstance(t, wt.GlobalType):
            mb.globals.append((t, default_const(t.content, ti)))
        else:
            mb.tags.append(t)
        mb.exports.append((e.name, kind, counts[kind]))
        counts[kind] += 1
    mb.globals.append((wt.GlobalType(wt.I32, True), b"\x41" + sleb(seed & 0x7FFFFFFF)))
    return mb.encode()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    seed = int(argv[-1]) if argv else 0
    sys.stdout.buffer.write(synthesize(sys.stdin.buffer.read(), seed))
    return 0


if __name__ == "__main__":
    sys.exit(main())

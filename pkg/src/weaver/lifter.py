"""IR to JavaScript source text."""

from __future__ import annotations

import json
import math
import re

from . import ir
from . import wasm_types as wt
from .ir import Opcode

_IDENT = re.compile(r"^[A-Za-z_$][A-Za-z0-9_$]*$")
_RESERVED = {"class", "const", "delete", "do", "else", "enum", "export", "extends", "for", "function", "if",
             "import", "in", "instanceof", "let", "new", "return", "super", "switch", "this", "throw", "try",
             "typeof", "var", "void", "while", "with", "yield", "await", "break", "case", "catch", "continue",
             "debugger", "default", "finally", "null", "true", "false"}


class UnliftableProgram(ValueError):
    pass


def var(v: int) -> str:
    return f"v{v}"


def _num(x) -> str:
    if isinstance(x, bool):
        raise UnliftableProgram("boolean number literal")
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return repr(x)


def _str(s: str) -> str:
    return json.dumps(s)


def _key(name: str) -> str:
    return name if _IDENT.match(name) else _str(name)


def _member(obj: str, name: str) -> str:
    return f"{obj}.{name}" if _IDENT.match(name) else f"{obj}[{_str(name)}]"


def _builtin_path(name: str) -> str:
    parts = name.split(".")
    if not all(_IDENT.match(p) for p in parts):
        raise UnliftableProgram(f"bad builtin name {name!r}")
    return name


def js_type_name(t) -> str:
    """JS API name of a value type (descriptor strings)."""
    if t == wt.FUNCREF:
        return "anyfunc"
    if isinstance(t, wt.NumType):
        return t.value
    return wt.wat(t)


def _limits(t) -> list[str]:
    parts = [f"initial:{t.initial}"]
    if t.maximum is not None:
        parts.append(f"maximum:{t.maximum}")
    if t.addr64:
        parts.append('address:"i64"')
    if t.shared:
        parts.append("shared:true")
    return parts


def _bytes(code: bytes) -> str:
    return "new Uint8Array([" + ",".join(str(b) for b in code) + "])"


def lift(program: ir.Program, indent: str = "  ") -> str:
    lines: list[str] = []
    depth = 0
    for ins in program.instructions:
        op, p, i, o = ins.op, ins.payload, [var(x) for x in ins.inputs], [var(x) for x in ins.outputs]
        pad = indent * depth

        def decl(expr: str):
            lines.append(f"{pad}const {o[0]} = {expr};")

        if op is Opcode.LoadBuiltin:
            decl(_builtin_path(p))
        elif op is Opcode.LoadNumber:
            decl(_num(p))
        elif op is Opcode.LoadBigInt:
            decl(f"{p}n")
        elif op is Opcode.LoadString:
            decl(_str(p))
        elif op is Opcode.LoadBoolean:
            decl("true" if p else "false")
        elif op is Opcode.LoadNull:
            decl("null")
        elif op is Opcode.LoadUndefined:
            decl("undefined")
        elif op is Opcode.CreateObject:
            decl("{" + ", ".join(f"{_key(k)}:{v}" for k, v in zip(p, i)) + "}")
        elif op is Opcode.CreateArray:
            decl("[" + ", ".join(i) + "]")
        elif op is Opcode.GetProperty:
            decl(_member(i[0], p))
        elif op is Opcode.SetProperty:
            lines.append(f"{pad}{_member(i[0], p)} = {i[1]};")
        elif op is Opcode.StoreBuiltin:
            lines.append(f"{pad}{_builtin_path(p)} = {i[0]};")
        elif op is Opcode.CallFunction:
            decl(f"{i[0]}({', '.join(i[1:])})")
        elif op is Opcode.CallMethod:
            decl(f"{_member(i[0], p.name)}({', '.join(i[1:])})")
        elif op is Opcode.Construct:
            decl(f"new {i[0]}({', '.join(i[1:])})")
        elif op is Opcode.BinaryOp:
            decl(f"{i[0]} {p} {i[1]}")
        elif op is Opcode.UnaryOp:
            decl(f"typeof {i[0]}" if p == "typeof" else f"{p}{i[0]}")
        elif op is Opcode.BeginFunction:
            params = ", ".join(var(x) for x in ins.inner_outputs)
            lines.append(f"{pad}function {o[0]}({params}) {{")
            depth += 1
        elif op is Opcode.EndFunction:
            depth -= 1
            lines.append(f"{indent * depth}}}")
        elif op is Opcode.Return:
            lines.append(f"{pad}return {i[0]};")
        elif op is Opcode.BeginTry:
            lines.append(f"{pad}try {{")
            depth += 1
        elif op is Opcode.BeginCatch:
            lines.append(f"{indent * (depth - 1)}}} catch ({o[0]}) {{")
        elif op is Opcode.EndTry:
            depth -= 1
            lines.append(f"{indent * depth}}}")
        elif op is Opcode.BeginForLoop:
            c = o[0]
            lines.append(f"{pad}for (let {c} = 0; {c} < {p}; {c}++) {{")
            depth += 1
        elif op is Opcode.EndForLoop:
            depth -= 1
            lines.append(f"{indent * depth}}}")
        elif op is Opcode.CreateWasmMemory:
            decl("new WebAssembly.Memory({" + ", ".join(_limits(p)) + "})")
        elif op is Opcode.CreateWasmTable:
            desc = "{" + ", ".join([f"element:{_str(js_type_name(p.type.element))}"] + _limits(p.type)) + "}"
            decl(f"new WebAssembly.Table({desc}{', ' + i[0] if p.with_init else ''})")
        elif op is Opcode.CreateWasmGlobal:
            desc = f"{{value:{_str(js_type_name(p.type.content))}, mutable:{'true' if p.type.mutable else 'false'}}}"
            decl(f"new WebAssembly.Global({desc}{', ' + i[0] if p.with_init else ''})")
        elif op is Opcode.CreateWasmTag:
            decl("new WebAssembly.Tag({parameters:[" + ", ".join(_str(js_type_name(t)) for t in p.params) + "]})")
        elif op is Opcode.CompileWasmModule:
            decl(f"new WebAssembly.Module({_bytes(p.code)})")
        elif op is Opcode.InstantiateWasmModule:
            groups: dict[str, list[str]] = {}
            for b, v in zip(p, i[1:]):
                groups.setdefault(b.module, []).append(f"{_key(b.name)}:{v}")
            imports = "{" + ", ".join(f"{_key(m)}:{{{', '.join(fs)}}}" for m, fs in groups.items()) + "}"
            decl(f"new WebAssembly.Instance({i[0]}, {imports})")
        elif op is Opcode.WasmInstanceExport:
            decl(_member(f"{i[0]}.exports", p.name))
        else:
            raise UnliftableProgram(f"unknown opcode {op!r}")
    if depth != 0:
        raise UnliftableProgram("unbalanced blocks")
    return "\n".join(lines) + "\n"

"""JS-side type lattice used by type-aware generation.

A JSType is a union of primitive flags plus an optional object shape and an
optional function signature. ``number`` is ``INTEGER | FLOAT`` so that
``integer`` is a refinement of ``number``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Iterable, Mapping


class Flag(enum.IntFlag):
    NOTHING = 0
    INTEGER = 1
    FLOAT = 2
    BIGINT = 4
    STRING = 8
    BOOLEAN = 16
    NULLISH = 32
    OBJECT = 64
    FUNCTION = 128

    NUMBER = INTEGER | FLOAT
    ANYTHING = INTEGER | FLOAT | BIGINT | STRING | BOOLEAN | NULLISH | OBJECT | FUNCTION


_FLAG_NAMES = [
    (Flag.NUMBER, "number"),
    (Flag.INTEGER, "integer"),
    (Flag.FLOAT, "float"),
    (Flag.BIGINT, "bigint"),
    (Flag.STRING, "string"),
    (Flag.BOOLEAN, "boolean"),
    (Flag.NULLISH, "nullish"),
    (Flag.OBJECT, "object"),
    (Flag.FUNCTION, "function"),
]


@dataclass(frozen=True)
class ObjectShape:
    properties: tuple[str, ...] = ()
    methods: tuple[str, ...] = ()
    group: str | None = None
    members: tuple[tuple[str, "JSType"], ...] = ()

    def member(self, name: str) -> "JSType | None":
        for n, t in self.members:
            if n == name:
                return t
        return None


@dataclass(frozen=True)
class Signature:
    params: tuple["JSType", ...] = ()
    # None stands for anything (avoids a self-referential default)
    returns: "JSType | None" = None
    constructs: bool = False
    # Wasm exported function; only these are valid funcref values.
    wasm: bool = False
    generic: bool = False

    @property
    def result(self) -> "JSType":
        return ANYTHING if self.returns is None else self.returns


@dataclass(frozen=True)
class JSType:
    flags: Flag = Flag.NOTHING
    shape: ObjectShape | None = None
    signature: Signature | None = None

    def __post_init__(self):
        object.__setattr__(self, "flags", Flag(self.flags))
        if self.flags & Flag.OBJECT and self.shape is None:
            object.__setattr__(self, "shape", ObjectShape())
        if not self.flags & Flag.OBJECT and self.shape is not None:
            object.__setattr__(self, "shape", None)
        if self.flags & Flag.FUNCTION and self.signature is None:
            object.__setattr__(self, "signature", Signature(generic=True))
        if not self.flags & Flag.FUNCTION and self.signature is not None:
            object.__setattr__(self, "signature", None)

    # lattice ---------------------------------------------------------------

    def __or__(self, other: "JSType") -> "JSType":
        return union(self, other)

    def __and__(self, other: "JSType") -> "JSType":
        return intersection(self, other)

    def intersects(self, other: "JSType") -> bool:
        return bool(self.flags & other.flags)

    def is_(self, other: "JSType") -> bool:
        """Subsumption: every value of ``self`` is a value of ``other``."""
        if self.flags & ~other.flags:
            return False
        if other.shape is not None and self.shape is not None:
            if not set(other.shape.properties) <= set(self.shape.properties):
                return False
            if not set(other.shape.methods) <= set(self.shape.methods):
                return False
        if other.signature is not None and not other.signature.generic and self.signature is not None:
            if self.signature != other.signature:
                return False
        return True

    def may_be(self, flag: Flag) -> bool:
        return bool(self.flags & flag)

    @property
    def is_nothing(self) -> bool:
        return self.flags == Flag.NOTHING

    def member(self, name: str) -> "JSType | None":
        return self.shape.member(name) if self.shape else None

    def __str__(self):
        return describe(self)

    __repr__ = __str__


def _merge_members(a, b, names, combine):
    out = []
    for n in names:
        ta, tb = a.member(n), b.member(n)
        if ta is not None and tb is not None:
            out.append((n, combine(ta, tb)))
        elif ta is not None or tb is not None:
            out.append((n, ta if ta is not None else tb))
    return tuple(out)


def union(a: JSType, b: JSType) -> JSType:
    flags = a.flags | b.flags
    shape = None
    if a.shape is not None and b.shape is not None:
        props = tuple(p for p in a.shape.properties if p in b.shape.properties)
        methods = tuple(m for m in a.shape.methods if m in b.shape.methods)
        names = [n for n in props + methods]
        members = tuple((n, union(a.shape.member(n), b.shape.member(n)))
                        for n in names if a.shape.member(n) is not None and b.shape.member(n) is not None)
        group = a.shape.group if a.shape.group == b.shape.group else None
        shape = ObjectShape(props, methods, group, members)
    else:
        shape = a.shape or b.shape
    if a.signature is not None and b.signature is not None:
        sig = a.signature if a.signature == b.signature else Signature(generic=True)
    else:
        sig = a.signature or b.signature
    return JSType(flags, shape, sig)


def intersection(a: JSType, b: JSType) -> JSType:
    flags = a.flags & b.flags
    shape = None
    if flags & Flag.OBJECT:
        sa, sb = a.shape or ObjectShape(), b.shape or ObjectShape()
        props = tuple(dict.fromkeys(sa.properties + sb.properties))
        methods = tuple(dict.fromkeys(sa.methods + sb.methods))
        members = _merge_members(sa, sb, dict.fromkeys(props + methods), intersection)
        shape = ObjectShape(props, methods, sa.group or sb.group, members)
    sig = None
    if flags & Flag.FUNCTION:
        sig = a.signature if a.signature and not a.signature.generic else b.signature
    return JSType(flags, shape, sig)


def join_all(types: Iterable[JSType]) -> JSType:
    out = NOTHING
    for t in types:
        out = out | t
    return out


# constructors ----------------------------------------------------------------

NOTHING = JSType(Flag.NOTHING)
ANYTHING = JSType(Flag.ANYTHING)
INTEGER = JSType(Flag.INTEGER)
FLOAT = JSType(Flag.FLOAT)
NUMBER = JSType(Flag.NUMBER)
BIGINT = JSType(Flag.BIGINT)
STRING = JSType(Flag.STRING)
BOOLEAN = JSType(Flag.BOOLEAN)
NULLISH = JSType(Flag.NULLISH)
UNDEFINED = NULLISH


def object_(properties: Iterable[str] = (), methods: Iterable[str] = (), group: str | None = None,
            members: Mapping[str, JSType] | None = None) -> JSType:
    members = members or {}
    return JSType(Flag.OBJECT, ObjectShape(tuple(properties), tuple(methods), group, tuple(members.items())))


def function(params: Iterable[JSType] = (), returns: JSType | None = None, *, wasm=False) -> JSType:
    return JSType(Flag.FUNCTION, signature=Signature(tuple(params), returns, wasm=wasm))


def constructor(params: Iterable[JSType] = (), returns: JSType | None = None, *,
                properties=(), methods=(), members=None, group=None) -> JSType:
    """A constructor function; static members live on its object shape."""
    sig = Signature(tuple(params), returns if returns is not None else object_(), constructs=True)
    shape = ObjectShape(tuple(properties), tuple(methods), group, tuple((members or {}).items()))
    return JSType(Flag.FUNCTION | Flag.OBJECT, shape, sig)


def describe(t: JSType) -> str:
    if t.flags == Flag.NOTHING:
        return "nothing"
    if t.flags == Flag.ANYTHING:
        return "anything"
    parts = []
    rest = t.flags
    for flag, name in _FLAG_NAMES:
        if flag and (rest & flag) == flag:
            if flag is Flag.OBJECT:
                s = t.shape
                parts.append(f"object(properties: {list(s.properties)}, methods: {list(s.methods)})"
                             if (s.properties or s.methods) else "object()")
            elif flag is Flag.FUNCTION:
                sig = t.signature
                if sig.generic:
                    parts.append("function()")
                else:
                    ps = ", ".join(describe(p) for p in sig.params)
                    parts.append(f"function(({ps}) => {describe(sig.result)})")
            else:
                parts.append(name)
            rest &= ~flag
    return " | ".join(parts)


# JSON templates ----------------------------------------------------------------

def to_json(t: JSType) -> dict[str, Any]:
    out: dict[str, Any] = {"flags": [n for f, n in _FLAG_NAMES[1:] if t.flags & f]}
    if t.shape is not None:
        s = t.shape
        out["properties"] = list(s.properties)
        out["methods"] = list(s.methods)
        if s.group:
            out["group"] = s.group
        if s.members:
            out["members"] = {n: to_json(m) for n, m in s.members}
    if t.signature is not None and not t.signature.generic:
        sig = t.signature
        out["signature"] = {
            "params": [to_json(p) for p in sig.params],
            "returns": to_json(sig.result),
            "constructs": sig.constructs,
            "wasm": sig.wasm,
        }
    return out


def from_json(d: Mapping[str, Any]) -> JSType:
    names = {n: f for f, n in _FLAG_NAMES}
    flags = Flag.NOTHING
    for n in d.get("flags", []):
        if n == "anything":
            flags |= Flag.ANYTHING
        else:
            flags |= names[n]
    shape = None
    if flags & Flag.OBJECT:
        members = tuple((n, from_json(m)) for n, m in d.get("members", {}).items())
        shape = ObjectShape(tuple(d.get("properties", ())), tuple(d.get("methods", ())), d.get("group"), members)
    sig = None
    if "signature" in d and flags & Flag.FUNCTION:
        s = d["signature"]
        sig = Signature(tuple(from_json(p) for p in s.get("params", [])), from_json(s["returns"]),
                        bool(s.get("constructs")), bool(s.get("wasm")))
    return JSType(flags, shape, sig)

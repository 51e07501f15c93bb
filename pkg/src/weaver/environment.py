"""Static type environment: JS builtin templates plus the Wasm object templates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import conversion as cv
from . import jstype as js
from .jstype import ANYTHING, BIGINT, BOOLEAN, INTEGER, NULLISH, NUMBER, STRING, UNDEFINED, JSType
from .wasm_types import Category

OBJ = js.object_()
FN = js.function()

ARRAY_INSTANCE = js.object_(
    ["length"],
    ["push", "pop", "slice", "join", "indexOf", "includes", "fill", "reverse", "concat", "at", "keys"],
    group="Array",
    members={
        "length": INTEGER,
        "push": js.function([ANYTHING], INTEGER),
        "pop": js.function([], ANYTHING),
        "slice": js.function([INTEGER, INTEGER], OBJ),
        "join": js.function([STRING], STRING),
        "indexOf": js.function([ANYTHING], INTEGER),
        "includes": js.function([ANYTHING], BOOLEAN),
        "fill": js.function([ANYTHING], OBJ),
        "reverse": js.function([], OBJ),
        "concat": js.function([ANYTHING], OBJ),
        "at": js.function([INTEGER], ANYTHING),
        "keys": js.function([], OBJ),
    },
)
# keep the array-typed results precise
ARRAY_INSTANCE = js.object_(
    ARRAY_INSTANCE.shape.properties, ARRAY_INSTANCE.shape.methods, "Array",
    {**dict(ARRAY_INSTANCE.shape.members),
     "slice": js.function([INTEGER, INTEGER], ARRAY_INSTANCE),
     "fill": js.function([ANYTHING], ARRAY_INSTANCE),
     "reverse": js.function([], ARRAY_INSTANCE),
     "concat": js.function([ANYTHING], ARRAY_INSTANCE)},
)

DATE_INSTANCE = js.object_([], ["getTime", "getFullYear", "toISOString", "valueOf"], group="Date", members={
    "getTime": js.function([], NUMBER), "getFullYear": js.function([], NUMBER),
    "toISOString": js.function([], STRING), "valueOf": js.function([], NUMBER)})
PROMISE_INSTANCE = js.object_([], ["then", "catch", "finally"], group="Promise", members={
    "then": js.function([FN], OBJ), "catch": js.function([FN], OBJ), "finally": js.function([FN], OBJ)})
ERROR_INSTANCE = js.object_(["message", "name", "stack"], ["toString"], group="Error", members={
    "message": STRING, "name": STRING, "stack": STRING, "toString": js.function([], STRING)})
WEAKMAP_INSTANCE = js.object_([], ["get", "set", "has", "delete"], group="WeakMap", members={
    "get": js.function([OBJ], ANYTHING), "set": js.function([OBJ, ANYTHING], OBJ),
    "has": js.function([OBJ], BOOLEAN), "delete": js.function([OBJ], BOOLEAN)})
DATAVIEW_INSTANCE = js.object_(["byteLength", "byteOffset", "buffer"],
                               ["getInt8", "getUint8", "getInt32", "getFloat64", "getBigInt64"], group="DataView",
                               members={
                                   "byteLength": INTEGER, "byteOffset": INTEGER, "buffer": cv.ARRAY_BUFFER,
                                   "getInt8": js.function([], INTEGER), "getUint8": js.function([], INTEGER),
                                   "getInt32": js.function([], INTEGER), "getFloat64": js.function([], NUMBER),
                                   "getBigInt64": js.function([], BIGINT)})
NUMBER_INSTANCE = NUMBER
STRING_INSTANCE = js.object_(["length"], ["charAt", "toUpperCase", "trim"], group="String", members={
    "length": INTEGER, "charAt": js.function([INTEGER], STRING), "toUpperCase": js.function([], STRING),
    "trim": js.function([], STRING)})

# Descriptor shapes consumed by the WebAssembly constructors.
MEMORY_DESC = js.object_(["initial"], group="MemoryDescriptor", members={"initial": INTEGER})
TABLE_DESC = js.object_(["element", "initial"], group="TableDescriptor", members={"element": STRING,
                                                                                  "initial": INTEGER})
GLOBAL_DESC = js.object_(["value", "mutable"], group="GlobalDescriptor", members={"value": STRING,
                                                                                  "mutable": BOOLEAN})
TAG_DESC = js.object_(["parameters"], group="TagDescriptor", members={"parameters": ARRAY_INSTANCE})

WASM_NAMESPACE_MEMBERS = {
    "Memory": js.constructor([MEMORY_DESC], cv.MEMORY_TEMPLATE, group="WebAssembly.Memory"),
    "Table": js.constructor([TABLE_DESC], cv.TABLE_TEMPLATE, group="WebAssembly.Table"),
    "Global": js.constructor([GLOBAL_DESC], cv.GLOBAL_TEMPLATE, group="WebAssembly.Global"),
    "Tag": js.constructor([TAG_DESC], cv.TAG_TEMPLATE, group="WebAssembly.Tag"),
    "Module": js.constructor([OBJ], cv.MODULE_TEMPLATE, group="WebAssembly.Module"),
    "Instance": js.constructor([cv.MODULE_TEMPLATE, OBJ], cv.INSTANCE_TEMPLATE, group="WebAssembly.Instance"),
}
WEBASSEMBLY = js.object_(
    list(WASM_NAMESPACE_MEMBERS),
    ["validate"],
    group="WebAssembly",
    members={**WASM_NAMESPACE_MEMBERS, "validate": js.function([cv.ARRAY_BUFFER], BOOLEAN)},
)

_NUM1 = js.function([NUMBER], NUMBER)

DEFAULT_BUILTINS: dict[str, JSType] = {
    "Object": js.constructor(
        [], OBJ, methods=["keys", "freeze", "create", "getPrototypeOf", "isFrozen", "seal", "entries", "assign"],
        members={"keys": js.function([OBJ], ARRAY_INSTANCE), "freeze": js.function([OBJ], OBJ),
                 "create": js.function([OBJ], OBJ), "getPrototypeOf": js.function([OBJ], ANYTHING),
                 "isFrozen": js.function([OBJ], BOOLEAN), "seal": js.function([OBJ], OBJ),
                 "entries": js.function([OBJ], ARRAY_INSTANCE), "assign": js.function([OBJ, OBJ], OBJ)},
        group="Object"),
    "Reflect": js.object_(
        [],
        ["apply", "construct", "defineProperty", "deleteProperty", "get", "getOwnPropertyDescriptor",
         "getPrototypeOf", "has", "isExtensible", "ownKeys", "preventExtensions", "set", "setPrototypeOf"],
        group="Reflect",
        members={
            "apply": js.function([FN, ANYTHING, ARRAY_INSTANCE], ANYTHING),
            "construct": js.function([js.constructor(), ARRAY_INSTANCE], OBJ),
            "defineProperty": js.function([OBJ, STRING, OBJ], BOOLEAN),
            "deleteProperty": js.function([OBJ, STRING], BOOLEAN),
            "get": js.function([OBJ, STRING], ANYTHING),
            "getOwnPropertyDescriptor": js.function([OBJ, STRING], ANYTHING),
            "getPrototypeOf": js.function([OBJ], ANYTHING),
            "has": js.function([OBJ, STRING], BOOLEAN),
            "isExtensible": js.function([OBJ], BOOLEAN),
            "ownKeys": js.function([OBJ], ARRAY_INSTANCE),
            "preventExtensions": js.function([OBJ], BOOLEAN),
            "set": js.function([OBJ, STRING, ANYTHING], BOOLEAN),
            "setPrototypeOf": js.function([OBJ, OBJ], BOOLEAN),
        },
    ),
    "Math": js.object_(
        ["PI", "E", "LN2", "SQRT2"],
        ["abs", "floor", "ceil", "sqrt", "max", "min", "random", "imul", "clz32", "fround", "sign", "trunc"],
        group="Math",
        members={"PI": NUMBER, "E": NUMBER, "LN2": NUMBER, "SQRT2": NUMBER, "abs": _NUM1,
                 "floor": js.function([NUMBER], INTEGER), "ceil": js.function([NUMBER], INTEGER), "sqrt": _NUM1,
                 "max": js.function([NUMBER, NUMBER], NUMBER), "min": js.function([NUMBER, NUMBER], NUMBER),
                 "random": js.function([], NUMBER), "imul": js.function([NUMBER, NUMBER], INTEGER),
                 "clz32": js.function([NUMBER], INTEGER), "fround": _NUM1, "sign": _NUM1,
                 "trunc": js.function([NUMBER], INTEGER)},
    ),
    "Array": js.constructor([INTEGER], ARRAY_INSTANCE, methods=["isArray", "of"], group="Array",
                            members={"isArray": js.function([ANYTHING], BOOLEAN),
                                     "of": js.function([ANYTHING], ARRAY_INSTANCE)}),
    "JSON": js.object_([], ["stringify"], group="JSON",
                       members={"stringify": js.function([OBJ], STRING | NULLISH)}),
    "Date": js.constructor([], DATE_INSTANCE, methods=["now"], group="Date",
                           members={"now": js.function([], NUMBER)}),
    "Promise": js.constructor([js.function([FN, FN], UNDEFINED)], PROMISE_INSTANCE,
                              methods=["resolve", "all"], group="Promise",
                              members={"resolve": js.function([ANYTHING], PROMISE_INSTANCE),
                                       "all": js.function([ARRAY_INSTANCE], PROMISE_INSTANCE)}),
    "Proxy": js.constructor([OBJ, OBJ], OBJ, group="Proxy"),
    "Symbol": js.JSType(js.Flag.FUNCTION | js.Flag.OBJECT,
                        js.ObjectShape(("iterator", "toPrimitive"), (), "Symbol"),
                        js.Signature((STRING,), ANYTHING)),
    "Number": js.constructor([ANYTHING], OBJ, properties=["MAX_SAFE_INTEGER", "EPSILON", "NaN"],
                             methods=["isInteger", "isFinite", "parseFloat"], group="Number",
                             members={"MAX_SAFE_INTEGER": INTEGER, "EPSILON": NUMBER, "NaN": NUMBER,
                                      "isInteger": js.function([ANYTHING], BOOLEAN),
                                      "isFinite": js.function([ANYTHING], BOOLEAN),
                                      "parseFloat": js.function([STRING], NUMBER)}),
    "BigInt": js.JSType(js.Flag.FUNCTION | js.Flag.OBJECT,
                        js.ObjectShape((), ("asIntN", "asUintN"), "BigInt",
                                       (("asIntN", js.function([INTEGER, BIGINT], BIGINT)),
                                        ("asUintN", js.function([INTEGER, BIGINT], BIGINT)))),
                        js.Signature((INTEGER,), BIGINT)),
    "String": js.constructor([ANYTHING], STRING_INSTANCE, methods=["fromCharCode"], group="String",
                             members={"fromCharCode": js.function([INTEGER], STRING)}),
    "Boolean": js.constructor([ANYTHING], OBJ, group="Boolean"),
    "Error": js.constructor([STRING], ERROR_INSTANCE, group="Error"),
    "ArrayBuffer": js.constructor([INTEGER], cv.ARRAY_BUFFER, methods=["isView"], group="ArrayBuffer",
                                  members={"isView": js.function([ANYTHING], BOOLEAN)}),
    "DataView": js.constructor([cv.ARRAY_BUFFER], DATAVIEW_INSTANCE, group="DataView"),
    "Atomics": js.object_([], ["isLockFree"], group="Atomics",
                          members={"isLockFree": js.function([INTEGER], BOOLEAN)}),
    "WeakMap": js.constructor([], WEAKMAP_INSTANCE, group="WeakMap"),
    "Function": js.constructor([STRING], FN, group="Function"),
    "WebAssembly": WEBASSEMBLY,
}
for _name, _t in WASM_NAMESPACE_MEMBERS.items():
    DEFAULT_BUILTINS[f"WebAssembly.{_name}"] = _t

WASM_TEMPLATES: dict[Category, JSType] = {
    Category.MEMORY: cv.MEMORY_TEMPLATE,
    Category.TABLE: cv.TABLE_TEMPLATE,
    Category.GLOBAL: cv.GLOBAL_TEMPLATE,
    Category.TAG: cv.TAG_TEMPLATE,
    Category.MODULE: cv.MODULE_TEMPLATE,
    Category.INSTANCE: cv.INSTANCE_TEMPLATE,
}


@dataclass(frozen=True)
class StaticTypeEnvironment:
    builtins: Mapping[str, JSType] = field(default_factory=lambda: dict(DEFAULT_BUILTINS))
    wasm_templates: Mapping[Category, JSType] = field(default_factory=lambda: dict(WASM_TEMPLATES))
    # members the generators must not touch on this engine (missing APIs)
    excluded_members: frozenset[str] = frozenset()

    def template(self, name: str) -> JSType | None:
        return self.builtins.get(name)

    @property
    def names(self) -> list[str]:
        return list(self.builtins)

    @property
    def loadable(self) -> list[str]:
        """Top-level names sampled by builtin loads."""
        return [n for n in self.builtins if "." not in n]

    def restricted(self, names) -> "StaticTypeEnvironment":
        keep = set(names)
        return StaticTypeEnvironment({n: t for n, t in self.builtins.items() if n.split(".")[0] in keep},
                                     self.wasm_templates, self.excluded_members)

    def with_excluded_members(self, names) -> "StaticTypeEnvironment":
        return StaticTypeEnvironment(self.builtins, self.wasm_templates, frozenset(names))


DEFAULT_ENVIRONMENT = StaticTypeEnvironment()


def load_environment(path: str | Path) -> StaticTypeEnvironment:
    """Load a catalog file: ``{"builtins": {name: template-json | null}, "include": [...]}``.

    A name mapped to ``null`` keeps its default template; ``include`` trims
    the default catalog to the listed top-level names.
    """
    data = json.loads(Path(path).read_text())
    env = DEFAULT_ENVIRONMENT
    if "include" in data:
        env = env.restricted(data["include"])
    builtins = dict(env.builtins)
    for name, tmpl in data.get("builtins", {}).items():
        if tmpl is None:
            if name in DEFAULT_BUILTINS:
                builtins[name] = DEFAULT_BUILTINS[name]
        else:
            builtins[name] = js.from_json(tmpl)
    return StaticTypeEnvironment(builtins, env.wasm_templates, frozenset(data.get("excludedMembers", ())))

"""Wasm type model: value/heap types, the object type categories, canonical
forms for concrete type definitions, and the per-category type record."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union


class WasmTypeError(Exception):
    pass


class UnresolvedTypeIndex(WasmTypeError):
    def __init__(self, index):
        super().__init__(f"unresolved type index {index!r}")
        self.index = index


class NumType(enum.Enum):
    I32 = "i32"
    I64 = "i64"
    F32 = "f32"
    F64 = "f64"
    V128 = "v128"

    def __repr__(self):
        return self.value


class PackedType(enum.Enum):
    I8 = "i8"
    I16 = "i16"

    def __repr__(self):
        return self.value


class AbsHeap(enum.Enum):
    ANY = "any"
    EQ = "eq"
    I31 = "i31"
    STRUCT = "struct"
    ARRAY = "array"
    FUNC = "func"
    EXTERN = "extern"
    EXN = "exn"
    NONE = "none"
    NOFUNC = "nofunc"
    NOEXTERN = "noextern"
    NOEXN = "noexn"

    def __repr__(self):
        return self.value


EXN_FAMILY = frozenset({AbsHeap.EXN, AbsHeap.NOEXN})
BOTTOMS = {
    AbsHeap.NONE: AbsHeap.ANY,
    AbsHeap.NOFUNC: AbsHeap.FUNC,
    AbsHeap.NOEXTERN: AbsHeap.EXTERN,
    AbsHeap.NOEXN: AbsHeap.EXN,
}
_TOPS = {
    AbsHeap.ANY: AbsHeap.ANY,
    AbsHeap.EQ: AbsHeap.ANY,
    AbsHeap.I31: AbsHeap.ANY,
    AbsHeap.STRUCT: AbsHeap.ANY,
    AbsHeap.ARRAY: AbsHeap.ANY,
    AbsHeap.FUNC: AbsHeap.FUNC,
    AbsHeap.EXTERN: AbsHeap.EXTERN,
    AbsHeap.EXN: AbsHeap.EXN,
    **BOTTOMS,
}


@dataclass(frozen=True)
class RecIdx:
    """Reference to a member of the enclosing recursion group (canonical form only)."""

    index: int

    def __repr__(self):
        return f"rec.{self.index}"


@dataclass(frozen=True)
class FieldType:
    storage: "ValueType | PackedType"
    mutable: bool = False


@dataclass(frozen=True)
class StructType:
    fields: tuple[FieldType, ...] = ()


@dataclass(frozen=True)
class ArrayType:
    field: FieldType


@dataclass(frozen=True)
class FuncType:
    params: tuple["ValueType", ...] = ()
    results: tuple["ValueType", ...] = ()


CompositeType = Union[StructType, ArrayType, FuncType]


@dataclass(frozen=True)
class DefType:
    """A concrete type definition in canonical form: a closed recursion group
    plus the position of the definition inside it."""

    group: tuple[CompositeType, ...]
    index: int

    @property
    def composite(self) -> CompositeType:
        return self.group[self.index]

    def expand(self) -> CompositeType:
        """The definition with group-local references replaced by DefTypes."""
        return _map_heaps(self.composite, lambda h: DefType(self.group, h.index) if isinstance(h, RecIdx) else h)

    def __repr__(self):
        return f"def({_composite_kind(self.composite).value}#{abs(hash(self)) % 10**6})"


HeapType = Union[AbsHeap, int, RecIdx, DefType]


@dataclass(frozen=True)
class RefType:
    heap: HeapType
    nullable: bool = True

    def __repr__(self):
        return wat(self)


ValueType = Union[NumType, RefType]


def ref(heap, nullable=True) -> RefType:
    return RefType(heap, nullable)


I32, I64, F32, F64, V128 = NumType.I32, NumType.I64, NumType.F32, NumType.F64, NumType.V128
EXTERNREF = RefType(AbsHeap.EXTERN, True)
ANYREF = RefType(AbsHeap.ANY, True)
FUNCREF = RefType(AbsHeap.FUNC, True)
EQREF = RefType(AbsHeap.EQ, True)
I31REF = RefType(AbsHeap.I31, True)
STRUCTREF = RefType(AbsHeap.STRUCT, True)
ARRAYREF = RefType(AbsHeap.ARRAY, True)
EXNREF = RefType(AbsHeap.EXN, True)
NULLREF = RefType(AbsHeap.NONE, True)
NULLFUNCREF = RefType(AbsHeap.NOFUNC, True)
NULLEXTERNREF = RefType(AbsHeap.NOEXTERN, True)
NULLEXNREF = RefType(AbsHeap.NOEXN, True)

SHORTHANDS = {
    "externref": EXTERNREF,
    "anyref": ANYREF,
    "funcref": FUNCREF,
    "eqref": EQREF,
    "i31ref": I31REF,
    "structref": STRUCTREF,
    "arrayref": ARRAYREF,
    "exnref": EXNREF,
    "nullref": NULLREF,
    "nullfuncref": NULLFUNCREF,
    "nullexternref": NULLEXTERNREF,
    "nullexnref": NULLEXNREF,
}
_SHORTHAND_NAMES = {v: k for k, v in SHORTHANDS.items()}


# Object categories ---------------------------------------------------------


@dataclass(frozen=True)
class MemoryType:
    initial: int
    maximum: int | None = None
    addr64: bool = False
    shared: bool = False

    def __post_init__(self):
        if self.initial < 0 or (self.maximum is not None and self.maximum < self.initial):
            raise WasmTypeError(f"bad memory limits {self.initial}..{self.maximum}")
        if self.shared and self.maximum is None:
            raise WasmTypeError("shared memory requires a maximum")


@dataclass(frozen=True)
class TableType:
    element: RefType
    initial: int
    maximum: int | None = None
    addr64: bool = False
    shared: bool = False

    def __post_init__(self):
        if not isinstance(self.element, RefType):
            raise WasmTypeError("table element type must be a reference type")
        if self.initial < 0 or (self.maximum is not None and self.maximum < self.initial):
            raise WasmTypeError(f"bad table limits {self.initial}..{self.maximum}")
        if self.shared and self.maximum is None:
            raise WasmTypeError("shared table requires a maximum")


@dataclass(frozen=True)
class GlobalType:
    content: ValueType
    mutable: bool = False


@dataclass(frozen=True)
class TagType:
    params: tuple[ValueType, ...] = ()

    @property
    def results(self) -> tuple:
        return ()


ExternType = Union[MemoryType, TableType, GlobalType, TagType, FuncType]


@dataclass(frozen=True)
class Import:
    module: str
    name: str
    type: ExternType


@dataclass(frozen=True)
class Export:
    name: str
    type: ExternType


@dataclass(frozen=True)
class ModuleType:
    type_defs: tuple[tuple[CompositeType, ...], ...] = ()
    imports: tuple[Import, ...] = ()
    exports: tuple[Export, ...] = ()

    def __post_init__(self):
        names = [e.name for e in self.exports]
        if len(names) != len(set(names)):
            raise WasmTypeError("duplicate export names")


@dataclass(frozen=True)
class InstanceType:
    type_defs: tuple[tuple[CompositeType, ...], ...] = ()
    imports: tuple[Import, ...] = ()
    exports: tuple[Export, ...] = ()
    instantiated: bool = True


class Category(enum.Enum):
    VALUE = "value"
    MEMORY = "memory"
    TABLE = "table"
    GLOBAL = "global"
    FUNCTION = "function"
    TAG = "tag"
    MODULE = "module"
    INSTANCE = "instance"


OBJECT_CATEGORIES = (
    Category.MEMORY,
    Category.TABLE,
    Category.GLOBAL,
    Category.FUNCTION,
    Category.TAG,
    Category.MODULE,
    Category.INSTANCE,
)


def category_of(t) -> Category:
    if isinstance(t, (NumType, RefType)):
        return Category.VALUE
    try:
        return _CATEGORY_BY_CLASS[type(t)]
    except KeyError:
        raise WasmTypeError(f"not a categorised Wasm type: {t!r}") from None


_CATEGORY_BY_CLASS = {
    MemoryType: Category.MEMORY,
    TableType: Category.TABLE,
    GlobalType: Category.GLOBAL,
    FuncType: Category.FUNCTION,
    TagType: Category.TAG,
    ModuleType: Category.MODULE,
    InstanceType: Category.INSTANCE,
}


# Structural helpers --------------------------------------------------------


def _composite_kind(c: CompositeType) -> AbsHeap:
    if isinstance(c, StructType):
        return AbsHeap.STRUCT
    if isinstance(c, ArrayType):
        return AbsHeap.ARRAY
    return AbsHeap.FUNC


def _map_heaps(t, fn):
    """Rebuild ``t`` with every heap type replaced by ``fn(heap)``."""
    if isinstance(t, NumType) or isinstance(t, PackedType):
        return t
    if isinstance(t, RefType):
        return RefType(fn(t.heap), t.nullable)
    if isinstance(t, FieldType):
        return FieldType(_map_heaps(t.storage, fn), t.mutable)
    if isinstance(t, StructType):
        return StructType(tuple(_map_heaps(f, fn) for f in t.fields))
    if isinstance(t, ArrayType):
        return ArrayType(_map_heaps(t.field, fn))
    if isinstance(t, FuncType):
        return FuncType(tuple(_map_heaps(p, fn) for p in t.params), tuple(_map_heaps(r, fn) for r in t.results))
    if isinstance(t, MemoryType):
        return t
    if isinstance(t, TableType):
        return TableType(_map_heaps(t.element, fn), t.initial, t.maximum, t.addr64, t.shared)
    if isinstance(t, GlobalType):
        return GlobalType(_map_heaps(t.content, fn), t.mutable)
    if isinstance(t, TagType):
        return TagType(tuple(_map_heaps(p, fn) for p in t.params))
    raise WasmTypeError(f"cannot map heaps of {t!r}")


def _iter_heaps(t):
    if isinstance(t, (NumType, PackedType, MemoryType)):
        return
    if isinstance(t, RefType):
        yield t.heap
    elif isinstance(t, FieldType):
        yield from _iter_heaps(t.storage)
    elif isinstance(t, StructType):
        for f in t.fields:
            yield from _iter_heaps(f)
    elif isinstance(t, ArrayType):
        yield from _iter_heaps(t.field)
    elif isinstance(t, (FuncType,)):
        for v in t.params + t.results:
            yield from _iter_heaps(v)
    elif isinstance(t, TableType):
        yield t.element.heap
    elif isinstance(t, GlobalType):
        yield from _iter_heaps(t.content)
    elif isinstance(t, TagType):
        for v in t.params:
            yield from _iter_heaps(v)
    elif isinstance(t, (ModuleType, InstanceType)):
        for imp in t.imports:
            yield from _iter_heaps(imp.type)
        for exp in t.exports:
            yield from _iter_heaps(exp.type)
    else:
        raise WasmTypeError(f"cannot walk {t!r}")


def _iter_leaves(t):
    """Yield every numeric/packed storage type mentioned directly by ``t``."""
    if isinstance(t, (NumType, PackedType)):
        yield t
    elif isinstance(t, FieldType):
        yield from _iter_leaves(t.storage)
    elif isinstance(t, StructType):
        for f in t.fields:
            yield from _iter_leaves(f)
    elif isinstance(t, ArrayType):
        yield from _iter_leaves(t.field)
    elif isinstance(t, FuncType):
        for v in t.params + t.results:
            yield from _iter_leaves(v)
    elif isinstance(t, GlobalType):
        yield from _iter_leaves(t.content)
    elif isinstance(t, TagType):
        for v in t.params:
            yield from _iter_leaves(v)
    elif isinstance(t, (ModuleType, InstanceType)):
        for imp in t.imports:
            yield from _iter_leaves(imp.type)
        for exp in t.exports:
            yield from _iter_leaves(exp.type)


def mentions_excluded(t, type_defs: Sequence[Sequence[CompositeType]] = ()) -> bool:
    """True if ``t`` transitively mentions v128 or an exn-family reference.

    Module-local indices are followed through ``type_defs``.
    """
    flat = [c for g in type_defs for c in g]
    seen: set = set()

    def visit(x) -> bool:
        if any(leaf is NumType.V128 for leaf in _iter_leaves(x)):
            return True
        for h in _iter_heaps(x):
            if isinstance(h, AbsHeap):
                if h in EXN_FAMILY:
                    return True
            elif isinstance(h, DefType):
                if h not in seen:
                    seen.add(h)
                    if any(visit(c) for c in h.group):
                        return True
            elif isinstance(h, int):
                if h >= len(flat):
                    raise UnresolvedTypeIndex(h)
                if h not in seen:
                    seen.add(h)
                    if visit(flat[h]):
                        return True
        return False

    return visit(t)


# Canonicalisation ----------------------------------------------------------


class TypeDefs:
    """Resolves module-local type indices against a module's recursion groups."""

    def __init__(self, groups: Sequence[Sequence[CompositeType]] = ()):
        self.groups = tuple(tuple(g) for g in groups)
        self._owner: list[tuple[int, int]] = []
        for gi, g in enumerate(self.groups):
            for pos in range(len(g)):
                self._owner.append((gi, pos))
        self._canon_groups: dict[int, tuple[CompositeType, ...]] = {}

    def __len__(self):
        return len(self._owner)

    def flat(self) -> list[CompositeType]:
        return [c for g in self.groups for c in g]

    def group_start(self, gi: int) -> int:
        return sum(len(g) for g in self.groups[:gi])

    def _canon_group(self, gi: int) -> tuple[CompositeType, ...]:
        if gi in self._canon_groups:
            return self._canon_groups[gi]
        start = self.group_start(gi)
        end = start + len(self.groups[gi])

        def fix(h):
            if isinstance(h, int):
                if start <= h < end:
                    return RecIdx(h - start)
                if h < 0 or h >= end:
                    # forward references outside the group are not allowed
                    raise UnresolvedTypeIndex(h)
                return self.def_type(h)
            if isinstance(h, RecIdx):
                raise UnresolvedTypeIndex(h)
            return h

        canon = tuple(_map_heaps(c, fix) for c in self.groups[gi])
        self._canon_groups[gi] = canon
        return canon

    def def_type(self, index: int) -> DefType:
        if not isinstance(index, int) or not 0 <= index < len(self._owner):
            raise UnresolvedTypeIndex(index)
        gi, pos = self._owner[index]
        return DefType(self._canon_group(gi), pos)

    def canonicalize(self, t):
        def fix(h):
            if isinstance(h, int):
                return self.def_type(h)
            if isinstance(h, RecIdx):
                raise UnresolvedTypeIndex(h)
            return h

        if isinstance(t, (ModuleType, InstanceType)):
            imports = tuple(Import(i.module, i.name, self.canonicalize(i.type)) for i in t.imports)
            exports = tuple(Export(e.name, self.canonicalize(e.type)) for e in t.exports)
            groups = canonical_groups(self.groups)
            if isinstance(t, ModuleType):
                return ModuleType(groups, imports, exports)
            return InstanceType(groups, imports, exports, t.instantiated)
        return _map_heaps(t, fix)


def canonical_groups(groups: Sequence[Sequence[CompositeType]]) -> tuple[tuple[CompositeType, ...], ...]:
    """Recursion groups in canonical form, de-duplicated in first-seen order."""
    defs = TypeDefs(groups)
    out: list[tuple[CompositeType, ...]] = []
    for gi in range(len(defs.groups)):
        g = defs._canon_group(gi)
        if g not in out:
            out.append(g)
    return tuple(out)


def canonicalize(t, type_defs: Sequence[Sequence[CompositeType]] | TypeDefs = ()):
    """Canonical form of ``t``; module-local indices resolve via ``type_defs``.

    Already-canonical input is returned unchanged (projection).
    """
    defs = type_defs if isinstance(type_defs, TypeDefs) else TypeDefs(type_defs)
    return defs.canonicalize(t)


def is_canonical(t) -> bool:
    return not any(isinstance(h, (int, RecIdx)) for h in _iter_heaps(t))


# Subtyping -----------------------------------------------------------------


def heap_top(h: HeapType) -> AbsHeap:
    if isinstance(h, DefType):
        return AbsHeap.FUNC if isinstance(h.composite, FuncType) else AbsHeap.ANY
    if isinstance(h, AbsHeap):
        return _TOPS[h]
    raise UnresolvedTypeIndex(h)


def abstract_kind(h: HeapType) -> AbsHeap:
    if isinstance(h, DefType):
        return _composite_kind(h.composite)
    if isinstance(h, AbsHeap):
        return h
    raise UnresolvedTypeIndex(h)


def heap_subtype(sub: HeapType, sup: HeapType) -> bool:
    if sub == sup:
        return True
    if heap_top(sub) is not heap_top(sup):
        return False
    if sub in BOTTOMS:
        return True
    if sup in BOTTOMS:
        return False
    if isinstance(sup, DefType):
        # all generated definitions are final with no declared supertypes
        return False
    if sup is heap_top(sup):
        return True
    kind = abstract_kind(sub)
    if sup is AbsHeap.EQ:
        return kind in (AbsHeap.I31, AbsHeap.STRUCT, AbsHeap.ARRAY)
    if sup in (AbsHeap.STRUCT, AbsHeap.ARRAY):
        return isinstance(sub, DefType) and kind is sup
    return False


def matches(required: ValueType, provided: ValueType) -> bool:
    """Whether a value of type ``provided`` can be used where ``required`` is expected."""
    if isinstance(required, NumType) or isinstance(provided, NumType):
        return required == provided
    if provided.nullable and not required.nullable:
        return False
    return heap_subtype(provided.heap, required.heap)


# Printing ------------------------------------------------------------------


def wat(t) -> str:
    if isinstance(t, (NumType, PackedType)):
        return t.value
    if isinstance(t, RefType):
        if t in _SHORTHAND_NAMES:
            return _SHORTHAND_NAMES[t]
        h = t.heap
        hs = h.value if isinstance(h, AbsHeap) else (str(h) if isinstance(h, int) else repr(h))
        return f"(ref {'null ' if t.nullable else ''}{hs})"
    if isinstance(t, FuncType):
        return f"(func (param {' '.join(map(wat, t.params))}) (result {' '.join(map(wat, t.results))}))"
    return repr(t)


# Type record ---------------------------------------------------------------


@dataclass(frozen=True)
class WasmTypeAnnotation:
    """Per-category index sets pointing into a WasmTypeRecord."""

    sets: tuple[tuple[Category, frozenset[int]], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[Category, Iterable[int]]) -> "WasmTypeAnnotation":
        items = [(c, frozenset(v)) for c, v in mapping.items() if v]
        items.sort(key=lambda kv: kv[0].value)
        return cls(tuple(items))

    def get(self, category: Category) -> frozenset[int]:
        for c, s in self.sets:
            if c is category:
                return s
        return frozenset()

    def categories(self) -> list[Category]:
        return [c for c, _ in self.sets]

    def as_dict(self) -> dict[Category, frozenset[int]]:
        return dict(self.sets)


@dataclass
class WasmTypeRecord:
    """One append-only canonical list per category plus a reverse index."""

    lists: dict[Category, list] = field(default_factory=lambda: {c: [] for c in Category})
    _index: dict[Category, dict] = field(default_factory=lambda: {c: {} for c in Category})
    # raw type -> index, for types interned without module-local context
    _fast: dict = field(default_factory=dict, compare=False, repr=False)
    # scratch space for callers that derive data from the record (e.g. value sets)
    memo: dict = field(default_factory=dict, compare=False, repr=False)

    def canonicalize(self, t, type_defs=()):
        return canonicalize(t, type_defs)

    def intern(self, t, type_defs=()) -> int:
        if not type_defs:
            hit = self._fast.get(t)
            if hit is not None:
                return hit
        canon = canonicalize(t, type_defs)
        cat = category_of(canon)
        idx = self._index[cat].get(canon)
        if idx is None:
            idx = len(self.lists[cat])
            self.lists[cat].append(canon)
            self._index[cat][canon] = idx
        if not type_defs:
            self._fast[t] = idx
        return idx

    def lookup(self, category: Category, index: int):
        return self.lists[category][index]

    def find(self, t, type_defs=()) -> int | None:
        canon = canonicalize(t, type_defs)
        return self._index[category_of(canon)].get(canon)

    def size(self, category: Category) -> int:
        return len(self.lists[category])

    def in_bounds(self, ann: WasmTypeAnnotation) -> bool:
        return all(0 <= i < len(self.lists[c]) for c, s in ann.sets for i in s)

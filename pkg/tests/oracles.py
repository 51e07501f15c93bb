"""Independent reference implementations used as test oracles.

None of these import the code under test beyond plain data constructors.
"""

from __future__ import annotations

import math
import random

import mpmath

from weaver import wasm_types as wt
from weaver.jstype import Flag

# -- abstract heap subtyping, written out as explicit upward closures ---------------

SUPERS = {
    "any": {"any"},
    "eq": {"eq", "any"},
    "i31": {"i31", "eq", "any"},
    "struct": {"struct", "eq", "any"},
    "array": {"array", "eq", "any"},
    "none": {"none", "i31", "struct", "array", "eq", "any"},
    "func": {"func"},
    "nofunc": {"nofunc", "func"},
    "extern": {"extern"},
    "noextern": {"noextern", "extern"},
    "exn": {"exn"},
    "noexn": {"noexn", "exn"},
}


def _kind_name(d: wt.DefType) -> str:
    c = d.composite
    return "struct" if isinstance(c, wt.StructType) else "array" if isinstance(c, wt.ArrayType) else "func"


def heap_le(sub, sup) -> bool:
    """Oracle for heap subtyping over canonical heaps."""
    if isinstance(sub, wt.DefType) and isinstance(sup, wt.DefType):
        return sub == sup
    if isinstance(sub, wt.DefType):
        return sup.value in SUPERS[_kind_name(sub)]
    if isinstance(sup, wt.DefType):
        bottom = {"struct": "none", "array": "none", "func": "nofunc"}[_kind_name(sup)]
        return sub.value == bottom
    return sup.value in SUPERS[sub.value]


def matches_oracle(required, provided) -> bool:
    if not isinstance(required, wt.RefType) or not isinstance(provided, wt.RefType):
        return required == provided
    if provided.nullable and not required.nullable:
        return False
    return heap_le(provided.heap, required.heap)


# -- JS to Wasm coercion matrix ----------------------------------------------------
# A Wasm value type is offered for a JS type only if every value of every flag
# in the type coerces to it; so a union maps to the intersection of its rows.

NONNULL_TOPS = {wt.RefType(wt.AbsHeap.ANY, False), wt.RefType(wt.AbsHeap.EXTERN, False), wt.ANYREF, wt.EXTERNREF}
NULLABLE_NON_EXN = {wt.RefType(h, True) for h in wt.AbsHeap if h not in (wt.AbsHeap.EXN, wt.AbsHeap.NOEXN)}

COERCION_ROWS = {
    Flag.INTEGER: {wt.I32, wt.F32, wt.F64, wt.RefType(wt.AbsHeap.I31, False), wt.I31REF} | NONNULL_TOPS,
    Flag.FLOAT: {wt.F32, wt.F64} | NONNULL_TOPS,
    Flag.BIGINT: {wt.I64} | NONNULL_TOPS,
    Flag.STRING: set(NONNULL_TOPS),
    Flag.BOOLEAN: set(NONNULL_TOPS),
    Flag.OBJECT: set(NONNULL_TOPS),
    Flag.NULLISH: set(NULLABLE_NON_EXN),
}
WASM_FUNCTION_ROW = {wt.RefType(wt.AbsHeap.FUNC, False), wt.FUNCREF} | NONNULL_TOPS
PLAIN_FUNCTION_ROW = set(NONNULL_TOPS)


def coercion_oracle(flags: Flag, wasm_function: bool = False) -> set:
    rows = [COERCION_ROWS[f] for f in COERCION_ROWS if flags & f]
    if flags & Flag.FUNCTION:
        rows.append(WASM_FUNCTION_ROW if wasm_function else PLAIN_FUNCTION_ROW)
    if not rows:
        return set()
    out = set(rows[0])
    for r in rows[1:]:
        out &= r
    return out


# -- scheduler weight ------------------------------------------------------------


def weight_oracle(valid: int, total: int, grand: int, amplification: float = 1.0, wasm: bool = False) -> float:
    """UCB-1 weight evaluated in 50-digit arithmetic."""
    with mpmath.workdps(50):
        p = mpmath.mpf(valid) / total
        w = (p + mpmath.sqrt(2 * mpmath.log(grand) / total)) * 100
        if wasm:
            w *= mpmath.mpf(amplification)
        return float(w)


# -- iso-recursive equivalence by direct comparison ---------------------------------


class ModuleDefs:
    """Module-local type definitions: groups of composites with int references."""

    def __init__(self, groups):
        self.groups = [list(g) for g in groups]
        self.owner = []
        for gi, g in enumerate(self.groups):
            for p in range(len(g)):
                self.owner.append((gi, p))

    def start(self, gi):
        return sum(len(g) for g in self.groups[:gi])


def _heaps_equiv(A, ha, ga, B, hb, gb, memo) -> bool:
    a_int, b_int = isinstance(ha, int), isinstance(hb, int)
    if not a_int and not b_int:
        return ha == hb
    if a_int != b_int:
        return False
    sa, sb = A.start(ga), B.start(gb)
    ina, inb = sa <= ha < sa + len(A.groups[ga]), sb <= hb < sb + len(B.groups[gb])
    if ina and inb:
        return ha - sa == hb - sb
    if ina or inb:
        return False
    return defs_equiv(A, ha, B, hb, memo)


def _vt_equiv(A, x, ga, B, y, gb, memo) -> bool:
    if isinstance(x, wt.RefType) and isinstance(y, wt.RefType):
        return x.nullable == y.nullable and _heaps_equiv(A, x.heap, ga, B, y.heap, gb, memo)
    return x == y


def _field_equiv(A, f, ga, B, g, gb, memo):
    return f.mutable == g.mutable and _vt_equiv(A, f.storage, ga, B, g.storage, gb, memo)


def _comp_equiv(A, c, ga, B, d, gb, memo) -> bool:
    if type(c) is not type(d):
        return False
    if isinstance(c, wt.StructType):
        return len(c.fields) == len(d.fields) and all(
            _field_equiv(A, f, ga, B, g, gb, memo) for f, g in zip(c.fields, d.fields))
    if isinstance(c, wt.ArrayType):
        return _field_equiv(A, c.field, ga, B, d.field, gb, memo)
    return (len(c.params) == len(d.params) and len(c.results) == len(d.results)
            and all(_vt_equiv(A, x, ga, B, y, gb, memo) for x, y in zip(c.params + c.results, d.params + d.results)))


def defs_equiv(A: ModuleDefs, i: int, B: ModuleDefs, j: int, memo=None) -> bool:
    memo = {} if memo is None else memo
    key = (id(A), i, id(B), j)
    if key in memo:
        return memo[key]
    (ga, pa), (gb, pb) = A.owner[i], B.owner[j]
    GA, GB = A.groups[ga], B.groups[gb]
    ok = pa == pb and len(GA) == len(GB) and all(
        _comp_equiv(A, c, ga, B, d, gb, memo) for c, d in zip(GA, GB))
    memo[key] = ok
    return ok


# -- random module-local types ---------------------------------------------------

_SCALARS = [wt.I32, wt.I64, wt.F32, wt.F64, wt.ANYREF, wt.EXTERNREF, wt.FUNCREF, wt.I31REF,
            wt.RefType(wt.AbsHeap.STRUCT, False), wt.NULLREF]


def random_valtype(rng: random.Random, limit: int):
    """A value type whose concrete references are below ``limit``."""
    if limit and rng.random() < 0.35:
        return wt.RefType(rng.randrange(limit), rng.random() < 0.5)
    return rng.choice(_SCALARS[:4] if rng.random() < 0.3 else _SCALARS)


def random_composite(rng: random.Random, limit: int):
    k = rng.random()
    if k < 0.4:
        return wt.StructType(tuple(wt.FieldType(random_valtype(rng, limit), rng.random() < 0.5)
                                   for _ in range(rng.randint(0, 3))))
    if k < 0.6:
        return wt.ArrayType(wt.FieldType(rng.choice([wt.PackedType.I8, random_valtype(rng, limit)]),
                                         rng.random() < 0.5))
    return wt.FuncType(tuple(random_valtype(rng, limit) for _ in range(rng.randint(0, 2))),
                       tuple(random_valtype(rng, limit) for _ in range(rng.randint(0, 2))))


def random_groups(rng: random.Random, n_groups: int | None = None):
    groups, count = [], 0
    for _ in range(n_groups if n_groups is not None else rng.randint(1, 3)):
        size = rng.randint(1, 3)
        limit = count + size  # members may reference their own group and earlier ones
        groups.append([random_composite(rng, limit) for _ in range(size)])
        count += size
    return groups


def shift_groups(groups, prefix):
    """Prepend ``prefix`` groups, renumbering references in ``groups``."""
    k = sum(len(g) for g in prefix)

    def vt(t):
        if isinstance(t, wt.RefType) and isinstance(t.heap, int):
            return wt.RefType(t.heap + k, t.nullable)
        return t

    def fld(f):
        return wt.FieldType(vt(f.storage), f.mutable)

    def comp(c):
        if isinstance(c, wt.StructType):
            return wt.StructType(tuple(fld(f) for f in c.fields))
        if isinstance(c, wt.ArrayType):
            return wt.ArrayType(fld(c.field))
        return wt.FuncType(tuple(map(vt, c.params)), tuple(map(vt, c.results)))

    moved = [[comp(c) for c in g] for g in groups]
    return [list(g) for g in prefix] + moved


def random_value_type_in(rng: random.Random, groups):
    n = sum(len(g) for g in groups)
    return random_valtype(rng, n)


ALL_ABS = list(wt.AbsHeap)


def random_canonical_valtype(rng: random.Random, defs_pool):
    r = rng.random()
    if r < 0.2:
        return rng.choice([wt.I32, wt.I64, wt.F32, wt.F64, wt.V128])
    if r < 0.45 and defs_pool:
        return wt.RefType(rng.choice(defs_pool), rng.random() < 0.5)
    return wt.RefType(rng.choice(ALL_ABS), rng.random() < 0.5)


def isclose(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel)

"""Interestingness sources deciding which executed programs enter the corpus."""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Protocol

from .. import ir
from .. import wasm_types as wt
from ..ir import Opcode, Program
from .executor import Outcome, OutcomeKind

log = logging.getLogger(__name__)

_KIND_NAMES = {wt.MemoryType: "memory", wt.TableType: "table", wt.GlobalType: "global", wt.TagType: "tag",
               wt.FuncType: "func"}


class MissingCoverageDump(FileNotFoundError):
    pass


class FeedbackSource(Protocol):
    def evaluate(self, program: Program, outcome: Outcome) -> bool:
        """True when the program is novel; must be deterministic for identical inputs and state."""
        ...


def _kind(t) -> str:
    for cls, name in _KIND_NAMES.items():
        if isinstance(t, cls):
            return name
    return "func"  # module-local function type forms


def structural_features(program: Program) -> set[str]:
    feats: set[str] = set()
    ins_list = program.instructions
    definer: dict[int, ir.Instruction] = {}
    prev2, prev = "START", "START"
    for ins in ins_list:
        op = ins.op.value
        feats.add(f"op:{op}")
        feats.add(f"bi:{prev}>{op}")
        feats.add(f"tri:{prev2}>{prev}>{op}")
        prev2, prev = prev, op
        if ins.op in (Opcode.LoadBuiltin, Opcode.StoreBuiltin, Opcode.GetProperty, Opcode.SetProperty,
                      Opcode.BinaryOp, Opcode.UnaryOp):
            feats.add(f"{op}:{ins.payload}")
        elif ins.op is Opcode.CallMethod:
            feats.add(f"{op}:{ins.payload.name}/{ins.payload.argc}")
        for v in ins.outputs:
            definer[v] = ins
        p = ins.payload
        if ins.op is Opcode.CreateWasmMemory:
            feats.add("cat:memory" + (":64" if p.addr64 else "") + (":shared" if p.shared else ""))
        elif ins.op is Opcode.CreateWasmTable:
            feats.add(f"cat:table:{wt.wat(p.type.element)}:{'init' if p.with_init else 'noinit'}")
        elif ins.op is Opcode.CreateWasmGlobal:
            feats.add(f"cat:global:{wt.wat(p.type.content)}:{'mut' if p.type.mutable else 'const'}")
        elif ins.op is Opcode.CreateWasmTag:
            feats.add(f"cat:tag:{len(p.params)}")
        elif ins.op is Opcode.CompileWasmModule:
            ik = [_kind(i.type) for i in p.shape.imports]
            ek = [_kind(e.type) for e in p.shape.exports]
            for a in ik:
                feats.add(f"import:{a}")
            for b in ek:
                feats.add(f"export:{b}")
            for a in ik:
                for b in ek:
                    feats.add(f"ie:{a}>{b}")
        elif ins.op is Opcode.InstantiateWasmModule:
            mod = definer.get(ins.inputs[0])
            shape = mod.payload.shape if mod is not None and mod.op is Opcode.CompileWasmModule else None
            for bind, v in zip(p, ins.inputs[1:]):
                src = definer.get(v)
                imp = next((i for i in shape.imports if (i.module, i.name) == (bind.module, bind.name)), None) \
                    if shape else None
                kind = _kind(imp.type) if imp else "?"
                feats.add(f"edge:{src.op.value if src else '?'}>import:{kind}")
        elif ins.op is Opcode.WasmInstanceExport:
            feats.add(f"export-use:{_kind(p.type)}")
        # JS use of Wasm-derived values
        for j, v in enumerate(ins.inputs):
            src = definer.get(v)
            if src is not None and ins.op in (Opcode.CallFunction, Opcode.Construct, Opcode.CallMethod) and j == 0:
                callee = src.payload if src.op is Opcode.LoadBuiltin else src.op.value
                feats.add(f"callee:{op}:{callee}")
            if src is not None and src.op is Opcode.WasmInstanceExport:
                feats.add(f"edge:export:{_kind(src.payload.type)}>{op}:{j}")
            if ins.op is Opcode.CallMethod and src is not None and src.op.value.startswith("CreateWasm"):
                feats.add(f"method:{src.op.value}.{p.name}")
    for ins in ins_list:
        if ins.op is Opcode.SetProperty and ins.payload == "__proto__":
            a, b = (definer.get(v) for v in ins.inputs)
            feats.add(f"proto:{a.op.value if a else '?'}<{b.op.value if b else '?'}")
    return feats


class StructuralFeedback:
    """Novel iff a program exhibits a structural feature never seen before.

    Only programs that ran cleanly contribute features, so the corpus holds valid seeds.
    """

    def __init__(self, admit=(OutcomeKind.VALID,)):
        self.seen: set[str] = set()
        self.admit = frozenset(admit)

    def evaluate(self, program: Program, outcome: Outcome) -> bool:
        if outcome.kind not in self.admit:
            return False
        new = structural_features(program) - self.seen
        self.seen |= new
        return bool(new)


_TOKEN = re.compile(r"(\d+)(?::(\d+))?")


def parse_coverage_dump(text: str) -> set[int]:
    """Whitespace-separated ``index`` or ``index:count`` tokens; zero counts are ignored."""
    out = set()
    for tok in text.split():
        m = _TOKEN.fullmatch(tok)
        if not m:
            continue
        if m.group(2) is None or int(m.group(2)) > 0:
            out.add(int(m.group(1)))
    return out


class CoverageFileFeedback:
    """Consumes a per-run coverage dump written by an instrumented engine."""

    def __init__(self, path_template: str):
        self.path_template = path_template
        self.bitmap: set[int] = set()
        self.runs = 0

    def evaluate(self, program: Program, outcome: Outcome) -> bool:
        path = Path(self.path_template.format(n=self.runs))
        self.runs += 1
        try:
            hits = self.read(path)
        except MissingCoverageDump as e:
            log.warning("%s; treating run as known", e)
            return False
        new = hits - self.bitmap
        self.bitmap |= new
        return bool(new)

    @staticmethod
    def read(path: Path) -> set[int]:
        try:
            return parse_coverage_dump(path.read_text())
        except FileNotFoundError:
            raise MissingCoverageDump(f"coverage dump {path} missing") from None

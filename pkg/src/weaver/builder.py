"""Single-owner program builder: emits instructions while keeping the
analysis and the scope structure up to date."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import ir
from .analyzer import Analysis, Context
from .environment import DEFAULT_ENVIRONMENT, StaticTypeEnvironment
from .ir import Instruction, Opcode
from .profiles import DEFAULT_BUDGET, GenerationBudget, FeatureProfile, get_profile
from .wasm_types import WasmTypeRecord


class InsufficientContext(Exception):
    pass


_END_FOR = {"function": Opcode.EndFunction, "loop": Opcode.EndForLoop, "catch": Opcode.EndTry}


class ProgramBuilder:
    def __init__(self, rng: random.Random | None = None, env: StaticTypeEnvironment = DEFAULT_ENVIRONMENT,
                 profile: FeatureProfile | None = None, budget: GenerationBudget = DEFAULT_BUDGET,
                 record: WasmTypeRecord | None = None, synthesizer=None):
        self.rng = rng or random.Random(0)
        self.env = env
        self.profile = profile or get_profile("generic")
        self.budget = budget
        self.synthesizer = synthesizer
        self.instructions: list[Instruction] = []
        self.next_var = 0
        self.analysis = Analysis(env, record)
        self.scopes: list[list[int]] = [[]]
        self.blocks: list[str] = []
        self.fallbacks = 0

    # -- state ---------------------------------------------------------------

    @property
    def record(self) -> WasmTypeRecord:
        return self.analysis.record

    @property
    def ctx(self) -> Context:
        return Context(self.analysis, self.visible())

    def visible(self) -> list[int]:
        return [v for s in self.scopes for v in s]

    @property
    def excluded(self) -> frozenset[str]:
        return self.env.excluded_members | self.profile.excluded_members

    def in_block(self, kind: str) -> bool:
        return kind in self.blocks

    def __len__(self):
        return len(self.instructions)

    def snapshot(self):
        return (len(self.instructions), self.next_var, [list(s) for s in self.scopes], list(self.blocks),
                self.fallbacks, self.analysis.snapshot())

    def restore(self, snap):
        n, self.next_var, scopes, blocks, self.fallbacks, asnap = snap
        del self.instructions[n:]
        self.scopes = [list(s) for s in scopes]
        self.blocks = list(blocks)
        self.analysis.restore(asnap)

    # -- emission ------------------------------------------------------------

    def emit(self, op: Opcode, inputs=(), payload=None) -> Instruction:
        visible = set(self.visible())
        for v in inputs:
            if v not in visible:
                raise ir.UndefinedInput(f"v{v} is not visible")
        c = ir.CONTRACTS[op]
        if c.block in ("middle", "end"):
            expect = {"middle": "try", "end": c.block_kind}[c.block]
            if not self.blocks or self.blocks[-1] != expect:
                raise ir.IRError(f"{op.value} does not close the open block")
        ins = ir.make(op, tuple(inputs), payload, first_output=self.next_var)
        errs = ins.arity_errors()
        if errs:
            raise ir.ArityMismatch("; ".join(errs))
        self.next_var += len(ins.outputs)
        self.instructions.append(ins)
        if c.block == "begin":
            self.scopes[-1].extend(ins.outer_outputs)
            self.scopes.append(list(ins.inner_outputs))
            self.blocks.append(c.block_kind)
        elif c.block == "middle":
            self.scopes[-1] = list(ins.inner_outputs)
            self.blocks[-1] = "catch"
        elif c.block == "end":
            self.scopes.pop()
            self.blocks.pop()
        else:
            self.scopes[-1].extend(ins.outputs)
        self.analysis.step(ins)
        return ins

    def out(self, op: Opcode, inputs=(), payload=None) -> int:
        """Emit and return the single output variable."""
        return self.emit(op, inputs, payload).outputs[0]

    def close_blocks(self):
        while self.blocks:
            kind = self.blocks[-1]
            if kind == "try":
                self.emit(Opcode.BeginCatch)
                continue
            self.emit(_END_FOR[kind])

    def finish(self) -> ir.Program:
        self.close_blocks()
        return ir.Program(tuple(self.instructions), self.next_var)

    # -- helpers used by generators -----------------------------------------

    def pick(self, seq):
        if not seq:
            raise InsufficientContext("nothing to choose from")
        return seq[self.rng.randrange(len(seq))]

    def pick_recent(self, seq, bias: float = 0.5):
        """Prefer recent variables (query results are ordered newest first)."""
        if not seq:
            raise InsufficientContext("nothing to choose from")
        if len(seq) > 1 and self.rng.random() < bias:
            return seq[self.rng.randrange(min(3, len(seq)))]
        return seq[self.rng.randrange(len(seq))]

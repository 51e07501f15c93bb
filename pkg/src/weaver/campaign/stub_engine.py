"""Deterministic stand-in for a JS shell.

Classifies a program by a parse check followed by an ordered table of textual
rules. Usable in-process (``run_inline``) or as a shell:
``python3 -m weaver.campaign.stub_engine [--rules FILE] case.js``.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .executor import EngineConfig, Outcome, OutcomeKind


@functools.lru_cache(maxsize=1)
def _parser():
    import tree_sitter as ts
    import tree_sitter_javascript as tsj
    return ts.Parser(ts.Language(tsj.language()))


def parses(source: str) -> bool:
    return not _parser().parse(source.encode("utf-8")).root_node.has_error


@dataclass(frozen=True)
class Rule:
    pattern: re.Pattern
    kind: OutcomeKind
    message: str


_BUILTIN_ROOTS = ("WebAssembly", "Reflect", "Object", "Math", "Array", "JSON", "Promise", "Proxy", "Symbol", "Number",
                  "BigInt", "String", "Boolean", "Error", "ArrayBuffer", "DataView", "Atomics", "WeakMap", "Function",
                  "Date")

DEFAULT_RULES: tuple[Rule, ...] = (
    Rule(re.compile(r"while\s*\(\s*true\s*\)|for\s*\(\s*;\s*;\s*\)"), OutcomeKind.TIMEOUT, "infinite loop"),
    Rule(re.compile(r"^\s*throw\b", re.M), OutcomeKind.RUNTIME_ERROR, "Error: uncaught exception"),
)

_TABLE_DECL = re.compile(r"const (v\d+) = new WebAssembly\.Table\(")
_PROTO_SET = re.compile(r"^\s*(v\d+)\.__proto__ = ", re.M)
_BUILTIN_STORE = re.compile(r"^\s*(" + "|".join(_BUILTIN_ROOTS) + r") = ", re.M)


def load_rules(path: str | Path) -> tuple[Rule, ...]:
    """JSON list of {"pattern": regex, "outcome": kind, "message": text}, checked before the defaults."""
    out = []
    for r in json.loads(Path(path).read_text()):
        out.append(Rule(re.compile(r["pattern"], re.M), OutcomeKind(r["outcome"]), r.get("message", r["pattern"])))
    return tuple(out)


def evaluate(source: str, rules: tuple[Rule, ...] = ()) -> tuple[OutcomeKind, str]:
    if not parses(source):
        return OutcomeKind.RUNTIME_ERROR, "SyntaxError: unparsable program"
    for r in rules + DEFAULT_RULES:
        if r.pattern.search(source):
            return r.kind, r.message
    tables = set(_TABLE_DECL.findall(source))
    if any(v in tables for v in _PROTO_SET.findall(source)):
        return OutcomeKind.CRASH, "ASSERTION FAILED: stub prototype chain on a WebAssembly.Table"
    m = _BUILTIN_STORE.search(source)
    if m and re.search(r"\b" + m.group(1) + r"\b", source[m.end():]):
        return OutcomeKind.RUNTIME_ERROR, f"TypeError: use of overwritten builtin {m.group(1)}"
    return OutcomeKind.VALID, ""


def _rules_from_args(args) -> tuple[Rule, ...]:
    args = list(args)
    if "--rules" in args:
        return load_rules(args[args.index("--rules") + 1])
    return ()


def run_inline(source: str, cfg: EngineConfig) -> Outcome:
    kind, msg = evaluate(source, _rules_from_args(cfg.extra_args))
    if kind is OutcomeKind.VALID:
        return Outcome(kind, 0, 0.0, "")
    if kind is OutcomeKind.TIMEOUT:
        return Outcome(kind, None, float(cfg.timeout_ms), "")
    if kind is OutcomeKind.CRASH:
        return Outcome(kind, -6, 0.0, msg, 6)
    return Outcome(kind, 1, 0.0, msg)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="weaver-stub-engine")
    ap.add_argument("--rules")
    ap.add_argument("file")
    a = ap.parse_args(argv)
    kind, msg = evaluate(Path(a.file).read_text(encoding="utf-8"), load_rules(a.rules) if a.rules else ())
    if kind is OutcomeKind.VALID:
        return 0
    if kind is OutcomeKind.TIMEOUT:
        time.sleep(3600)
    print(msg, file=sys.stderr, flush=True)
    if kind is OutcomeKind.CRASH:
        os.abort()
    return 1


if __name__ == "__main__":
    sys.exit(main())

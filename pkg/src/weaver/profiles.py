"""Engine feature profiles and generation budgets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

FEATURES = ("memory64", "multiMemory", "relaxedSimd", "simd", "gc", "exceptions")


@dataclass(frozen=True)
class GenerationBudget:
    memory_page_cap: int = 16
    table_size_cap: int = 64
    max_type_defs: int = 4
    max_imports: int = 4
    max_exports: int = 6

    def __post_init__(self):
        for k in ("memory_page_cap", "table_size_cap", "max_type_defs", "max_imports", "max_exports"):
            if getattr(self, k) <= 0:
                raise ValueError(f"budget field {k} must be positive")

    def shrunk(self) -> "GenerationBudget":
        return replace(self, max_type_defs=max(1, self.max_type_defs // 2), max_imports=max(1, self.max_imports // 2),
                       max_exports=max(1, self.max_exports // 2))


DEFAULT_BUDGET = GenerationBudget()


@dataclass(frozen=True)
class FeatureProfile:
    name: str
    memory64: bool = True
    multiMemory: bool = True
    relaxedSimd: bool = True
    simd: bool = True
    gc: bool = True
    exceptions: bool = True
    # JS API members known to be missing on the engine; generators skip them
    excluded_members: frozenset[str] = frozenset()
    # stderr substrings that mark an abnormal abort
    crash_markers: tuple[str, ...] = ()

    def enabled(self, feature: str) -> bool:
        return bool(getattr(self, feature))

    def to_json(self) -> dict:
        d = {f: getattr(self, f) for f in FEATURES}
        d["name"] = self.name
        d["excludedMembers"] = sorted(self.excluded_members)
        d["crashMarkers"] = list(self.crash_markers)
        return d


_COMMON_MARKERS = ("Assertion failed", "ASSERTION FAILED", "Fatal error", "AddressSanitizer", "Segmentation fault")

PROFILES: dict[str, FeatureProfile] = {
    "jsc": FeatureProfile("jsc", memory64=False, multiMemory=False, relaxedSimd=False,
                          crash_markers=_COMMON_MARKERS + ("SHOULD NEVER BE REACHED", "RELEASE_ASSERT")),
    "v8": FeatureProfile("v8", crash_markers=_COMMON_MARKERS + ("Check failed", "Debug check failed")),
    "spidermonkey": FeatureProfile("spidermonkey", crash_markers=_COMMON_MARKERS + ("MOZ_CRASH", "Hit MOZ_")),
    "generic": FeatureProfile("generic", memory64=False, multiMemory=False, relaxedSimd=False, gc=False,
                              excluded_members=frozenset({"toResizableBuffer", "toFixedLengthBuffer"}),
                              crash_markers=_COMMON_MARKERS + ("Check failed",)),
}


def get_profile(name: str) -> FeatureProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def load_profile(path: str | Path, base: str | None = None) -> FeatureProfile:
    """Read a JSON profile file; unspecified features inherit from ``base`` (or the file's ``base`` key)."""
    data = json.loads(Path(path).read_text())
    prof = get_profile(data.get("base", base or "generic"))
    kw = {f: bool(data[f]) for f in FEATURES if f in data}
    if "excludedMembers" in data:
        kw["excluded_members"] = frozenset(data["excludedMembers"])
    if "crashMarkers" in data:
        kw["crash_markers"] = tuple(data["crashMarkers"])
    return replace(prof, name=data.get("name", prof.name), **kw)

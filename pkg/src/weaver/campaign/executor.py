"""Run lifted programs in a JS shell and classify the result."""

from __future__ import annotations

import enum
import os
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..profiles import PROFILES, get_profile

STDERR_LIMIT = 4096
DEFAULT_TIMEOUT_MS = 600
STUB_SHELL = "stub"


class EngineUnavailable(RuntimeError):
    pass


class OutcomeKind(str, enum.Enum):
    VALID = "Valid"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"
    CRASH = "Crash"


@dataclass(frozen=True)
class EngineConfig:
    shell_path: str
    extra_args: tuple[str, ...] = ()
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    profile: str = "generic"

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.profile not in PROFILES:
            get_profile(self.profile)  # raises with the list of choices

    @property
    def is_stub(self) -> bool:
        return self.shell_path == STUB_SHELL


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    exit_status: int | None
    duration_ms: float
    stderr_excerpt: str = ""
    signal: int | None = field(default=None)

    @property
    def is_valid(self) -> bool:
        return self.kind is OutcomeKind.VALID


def classify(returncode: int | None, timed_out: bool, stderr: str, crash_markers=()) -> OutcomeKind:
    """Total, mutually exclusive classification of one execution."""
    if timed_out:
        return OutcomeKind.TIMEOUT
    if returncode is not None and returncode < 0:
        return OutcomeKind.CRASH
    if any(m in stderr for m in crash_markers):
        return OutcomeKind.CRASH
    if returncode == 0:
        return OutcomeKind.VALID
    return OutcomeKind.RUNTIME_ERROR


def _kill(proc: subprocess.Popen):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def execute(source: str, cfg: EngineConfig) -> Outcome:
    if cfg.is_stub:
        from .stub_engine import run_inline
        return run_inline(source, cfg)
    markers = get_profile(cfg.profile).crash_markers
    with tempfile.TemporaryDirectory(prefix="weaver-") as tmp:
        path = Path(tmp) / "case.js"
        path.write_text(source, encoding="utf-8")
        start = time.monotonic()
        try:
            proc = subprocess.Popen([cfg.shell_path, *cfg.extra_args, str(path)], stdout=subprocess.DEVNULL,
                                    stderr=subprocess.PIPE, stdin=subprocess.DEVNULL, start_new_session=True)
        except OSError as e:
            raise EngineUnavailable(f"cannot start {cfg.shell_path}: {e}") from e
        timed_out = False
        try:
            _, err = proc.communicate(timeout=cfg.timeout_ms / 1000)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill(proc)
            _, err = proc.communicate()
        dur = (time.monotonic() - start) * 1000
    rc = proc.returncode
    kind = classify(rc, timed_out, err.decode("utf-8", "replace"), markers)
    excerpt = err[:STDERR_LIMIT].decode("utf-8", "replace")
    return Outcome(kind, rc, dur, excerpt, -rc if rc is not None and rc < 0 else None)

"""Command-line client. Runs operations in-process, or against ``--server URL``."""

from __future__ import annotations

import argparse
import base64
import json
import sys
from pathlib import Path

from .profiles import PROFILES
from .service import core
from .service.schemas import (EngineModel, FuzzRequest, GenerateRequest, GenerateResponse, LiftRequest,
                              LiftResponse, ProfileOverride, StatsRequest, StatsSummary)


class Client:
    """Dispatch a request either to the local core or to a running service."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, route: str, req, local, response_model=None):
        if self.server is None:
            return local(req)
        import httpx
        r = httpx.post(f"{self.server}{route}", json=req.model_dump(), timeout=None)
        if r.status_code >= 400:
            raise SystemExit(f"server error {r.status_code}: {r.text}")
        data = r.json()
        return response_model.model_validate(data) if response_model else data


def _override(path: str | None) -> ProfileOverride | None:
    if not path:
        return None
    return ProfileOverride.model_validate(json.loads(Path(path).read_text()))


def cmd_fuzz(a, client: Client) -> int:
    req = FuzzRequest(engine=EngineModel(shell_path=a.engine, extra_args=a.engine_arg or [], timeout_ms=a.timeout_ms,
                                         profile=a.profile),
                      seed=a.seed, corpus=str(Path(a.corpus).resolve()), crashes=str(Path(a.crashes).resolve()),
                      stats=str(Path(a.stats).resolve()), max_execs=a.max_execs,
                      wasm_amplification=a.wasm_amplification, rebalance_interval=a.rebalance_interval,
                      generative_phase_target=a.generative_target, generation_ratio=a.generation_ratio,
                      synthesizer=a.synthesizer, workers=a.workers, profile_override=_override(a.profile_file))
    stats = client.call("/fuzz", req, core.fuzz)
    print(core.summarize(StatsRequest(stats=stats)).text)
    return 0


def cmd_generate(a, client: Client) -> int:
    req = GenerateRequest(n=a.n, seed=a.seed, profile=a.profile, synthesizer=a.synthesizer,
                          profile_override=_override(a.profile_file))
    resp: GenerateResponse = client.call("/generate", req, core.generate, GenerateResponse)
    out = Path(a.output)
    out.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(resp.programs):
        stem = out / f"{i:05d}-{p.hash}"
        stem.with_suffix(".js").write_text(p.source, encoding="utf-8")
        stem.with_suffix(".wvil").write_bytes(base64.b64decode(p.wvil_b64))
    print(f"wrote {len(resp.programs)} programs to {out}")
    return 0


def cmd_lift(a, client: Client) -> int:
    req = LiftRequest(wvil_b64=base64.b64encode(Path(a.file).read_bytes()).decode())
    try:
        resp: LiftResponse = client.call("/lift", req, core.lift, LiftResponse)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(resp.source)
    return 0


def cmd_stats(a, client: Client) -> int:
    req = StatsRequest(stats=json.loads(Path(a.file).read_text()))
    resp: StatsSummary = client.call("/stats", req, core.summarize, StatsSummary)
    print(resp.text)
    return 0


def cmd_serve(a, client: Client) -> int:
    import uvicorn
    from .service.app import create_app
    uvicorn.run(create_app(), host=a.host, port=a.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weaver", description="Greybox fuzzer for the JS and WebAssembly boundary.")
    ap.add_argument("--server", help="base URL of a running weaver service; default runs in-process")
    sub = ap.add_subparsers(dest="command", required=True)
    profiles = sorted(PROFILES)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign")
    f.add_argument("--engine", required=True, help="JS shell path, or 'stub' for the bundled evaluator")
    f.add_argument("--engine-arg", action="append", help="extra shell argument (repeatable)")
    f.add_argument("--timeout-ms", type=int, default=600)
    f.add_argument("--profile", choices=profiles, default="generic")
    f.add_argument("--profile-file", help="JSON feature profile overriding --profile")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--corpus", required=True)
    f.add_argument("--crashes", required=True)
    f.add_argument("--stats", required=True)
    f.add_argument("--max-execs", type=int, default=1000)
    f.add_argument("--wasm-amplification", type=float, default=4.0)
    f.add_argument("--rebalance-interval", type=int, default=2000)
    f.add_argument("--generative-target", type=int, default=200, help="corpus size that starts mutation")
    f.add_argument("--generation-ratio", type=float, default=0.1, help="share of generation once mutating")
    f.add_argument("--synthesizer", default="builtin", help="'builtin' or 'cmd:PATH'")
    f.add_argument("--workers", type=int, default=1)
    f.set_defaults(func=cmd_fuzz)

    g = sub.add_parser("generate", help="emit lifted programs")
    g.add_argument("-n", type=int, default=10)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--profile", choices=profiles, default="generic")
    g.add_argument("--profile-file")
    g.add_argument("--synthesizer", default="builtin")
    g.set_defaults(func=cmd_generate)

    li = sub.add_parser("lift", help="print the JavaScript for a serialized program")
    li.add_argument("file")
    li.set_defaults(func=cmd_lift)

    st = sub.add_parser("stats", help="summarize a campaign stats file")
    st.add_argument("file")
    st.set_defaults(func=cmd_stats)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    return a.func(a, Client(a.server))


if __name__ == "__main__":
    sys.exit(main())

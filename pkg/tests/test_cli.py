from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import uvicorn

from weaver.cli import main
from weaver.service.app import create_app


def test_generate_then_lift(tmp_path, capsys):
    assert main(["generate", "-n", "3", "-o", str(tmp_path), "--seed", "1"]) == 0
    wvil = sorted(tmp_path.glob("*.wvil"))
    js = sorted(tmp_path.glob("*.js"))
    assert len(wvil) == len(js) == 3
    capsys.readouterr()
    assert main(["lift", str(wvil[0])]) == 0
    assert capsys.readouterr().out == js[0].read_text()


def test_lift_rejects_garbage(tmp_path, capsys):
    f = tmp_path / "bad.wvil"
    f.write_bytes(b"garbage")
    assert main(["lift", str(f)]) == 1
    assert "error" in capsys.readouterr().err


def test_fuzz_and_stats(tmp_path, capsys):
    args = ["fuzz", "--engine", "stub", "--corpus", str(tmp_path / "c"), "--crashes", str(tmp_path / "x"),
            "--stats", str(tmp_path / "s.json"), "--max-execs", "50", "--generative-target", "20"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "executions   50" in out
    assert json.loads((tmp_path / "s.json").read_text())["totals"]["executions"] == 50
    assert main(["stats", str(tmp_path / "s.json")]) == 0
    assert "validity" in capsys.readouterr().out


def test_profile_file(tmp_path):
    pf = tmp_path / "p.json"
    pf.write_text(json.dumps({"base": "v8", "gc": False}))
    assert main(["generate", "-n", "2", "-o", str(tmp_path / "o"), "--profile-file", str(pf)]) == 0


def test_unknown_profile_is_a_usage_error():
    with pytest.raises(SystemExit):
        main(["generate", "-o", "x", "--profile", "chakra"])


@pytest.fixture(scope="module")
def server():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    srv = uvicorn.Server(uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="warning"))
    t = threading.Thread(target=srv.run, daemon=True)
    t.start()
    for _ in range(100):
        if srv.started:
            break
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    srv.should_exit = True
    t.join(5)


def test_thin_client_against_server(server, tmp_path, capsys):
    local, remote = tmp_path / "l", tmp_path / "r"
    assert main(["generate", "-n", "2", "-o", str(local), "--seed", "8"]) == 0
    assert main(["--server", server, "generate", "-n", "2", "-o", str(remote), "--seed", "8"]) == 0
    assert [f.read_bytes() for f in sorted(local.iterdir())] == [f.read_bytes() for f in sorted(remote.iterdir())]
    capsys.readouterr()
    assert main(["--server", server, "lift", str(sorted(remote.glob("*.wvil"))[0])]) == 0
    assert capsys.readouterr().out == sorted(remote.glob("*.js"))[0].read_text()

import os
import socket
import stat
import subprocess
import sys
import time

import pytest

from olbsq.endpoint.cli import cell_filename, main


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_for_port(port: int, proc, timeout: float = 15.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise RuntimeError(f"server exited early: {proc.stderr.read()}")
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                return
        except OSError:
            time.sleep(0.1)
    raise TimeoutError("server did not start")


@pytest.fixture
def services(tmp_path):
    src = tmp_path / "services"
    src.mkdir()
    for i in range(1, 5):
        for j in range(1, 5):
            if (i, j) != (3, 3):  # one missing file becomes an empty payload
                (src / cell_filename(i, j)).write_bytes(f"service at column {i} row {j}".encode())
    return src


def test_setup_serve_query(services, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["setup", "4", "4", str(services), str(out), "--seed", "1"]) == 0
    for name in ("catalog.bin", "params.bin", "secret.key"):
        assert (out / name).is_file()
    assert stat.S_IMODE(os.stat(out / "secret.key").st_mode) == 0o600

    port = _free_port()
    server = subprocess.Popen(
        [sys.executable, "-m", "olbsq.endpoint.cli", "serve",
         "--catalog", str(out / "catalog.bin"), "--key", str(out / "secret.key"), "--port", str(port)],
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        _wait_for_port(port, server)
        got = tmp_path / "got"
        rc = main(["query", "127.0.0.1", "2", "2", "2", "2", "--port", str(port), "--catalog", str(out / "catalog.bin"), "--out", str(got)])
        assert rc == 0
        files = sorted(p.name for p in got.iterdir())
        assert files == sorted(cell_filename(i, j) for i in (3, 4) for j in (3, 4))
        assert (got / cell_filename(4, 3)).read_bytes() == b"service at column 4 row 3"
        assert (got / cell_filename(3, 3)).read_bytes() == b""

        rc = main(["query", f"127.0.0.1:{port}", "1", "1", "1", "1", "--catalog", str(out / "catalog.bin"), "--out", str(got)])
        assert rc == 0
    finally:
        server.terminate()
        server.wait(timeout=10)


def test_query_range_error_before_network(services, tmp_path, capsys):
    out = tmp_path / "out"
    main(["setup", "4", "4", str(services), str(out)])
    capsys.readouterr()
    rc = main(["query", "127.0.0.1", "3", "1", "2", "1", "--port", "9", "--catalog", str(out / "catalog.bin")])
    assert rc == 2
    assert "outside" in capsys.readouterr().err


def test_query_needs_full_catalog(services, tmp_path, capsys):
    out = tmp_path / "out"
    main(["setup", "2", "2", str(services), str(out)])
    assert main(["query", "127.0.0.1", "1", "1", "1", "1", "--catalog", str(out / "params.bin")]) == 2


def test_query_refused_connection(services, tmp_path, capsys):
    out = tmp_path / "out"
    main(["setup", "2", "2", str(services), str(out)])
    rc = main(["query", "127.0.0.1", "1", "1", "1", "1", "--port", str(_free_port()), "--catalog", str(out / "catalog.bin")])
    assert rc == 1


def test_setup_missing_directory(tmp_path, capsys):
    assert main(["setup", "2", "2", str(tmp_path / "nope"), str(tmp_path / "out")]) == 2


def test_serve_bad_files(tmp_path, capsys):
    assert main(["serve", "--catalog", str(tmp_path / "x"), "--key", str(tmp_path / "y")]) == 1


def test_bench_prints_report(capsys):
    assert main(["bench", "8", "8", "2", "3", "--seed", "1", "--no-fit"]) == 0
    out = capsys.readouterr().out
    assert "pairings(setup)=65" in out
    assert "bytes(user_to_provider)=11268" in out
    assert main(["bench", "2", "2", "2", "1"]) == 2

import hashlib
import shutil
import socket
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def make_workspace(tmp_path):
    """Copy a fixture project into a scratch workspace."""

    def _make(name: str) -> Path:
        dest = tmp_path / name
        shutil.copytree(FIXTURES / name, dest)
        return dest

    return _make


@pytest.fixture
def transcript():
    def _path(name: str) -> str:
        return str(FIXTURES / "transcripts" / name)

    return _path


def hash_tree(root: Path, ignore: tuple[str, ...] = (".migmate",)) -> str:
    """Stable digest of every file path + content under root."""
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        rel = path.relative_to(root)
        if any(part in ignore or part == "__pycache__" for part in rel.parts):
            continue
        if path.is_file():
            digest.update(rel.as_posix().encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"[ACCEPTANCE {outcome}] {name}")


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test if in-process code opens a network connection."""

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during a mock-backed run")

    monkeypatch.setattr(socket.socket, "connect", _blocked)

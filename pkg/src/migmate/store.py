"""Session persistence under the work directory.

One migration session lives at ``<workdir>/sessions/<id>/`` with a fixed
layout shared by the CLI, the service, and the review UI::

    config      resolved configuration (JSON, schema-versioned)
    state       session state, verdict, progress, round index (JSON)
    pristine/   snapshot of relevant files + the dependency file
    rounds/NN-<kind>/{report.xml, files/, comparison, notes}
    review/     hunk states
    events.log  line-delimited telemetry events
    log.txt     human-readable migration log

Everything a consumer needs is on disk; sessions survive process restarts.
A lockfile with a liveness token serializes pipeline runs per workspace.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    CorruptSession,
    RoundImmutable,
    SessionAlreadyRunning,
    SessionNotFound,
)

SCHEMA_VERSION = 1

INITIALIZING = "initializing"
RUNNING = "running"
AWAITING_REVIEW = "awaiting_review"
APPLYING = "applying"
DONE = "done"
ABORTED = "aborted"

_STATE_ORDER = [INITIALIZING, RUNNING, AWAITING_REVIEW, APPLYING, DONE]

EVENT_KINDS = (
    "migration_started",
    "hunk_applied",
    "file_applied",
    "all_applied",
    "preview_closed",
    "tests_viewed",
)

PREMIG = "premig"
LLMMIG = "llmmig"
REINCLUDE = "reinclude"
ASYNCFIX = "asyncfix"
ROUND_ORDER = (PREMIG, LLMMIG, REINCLUDE, ASYNCFIX)


def utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, data: dict) -> None:
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorruptSession(f"missing session file: {path}")
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptSession(f"unreadable session file {path}: {exc}")
    if not isinstance(data, dict) or data.get("schema") != SCHEMA_VERSION:
        raise CorruptSession(f"schema mismatch in {path}")
    return data


@dataclass
class MigrationSession:
    id: str
    dir: Path
    source: str
    target: str
    config: dict
    created_at: str
    state: str = INITIALIZING
    rounds: list[str] = field(default_factory=list)  # round dir names, in order
    verdict: dict | None = None
    final_round: str | None = None
    progress: dict = field(default_factory=dict)
    preview_suppressed: bool = False

    @property
    def pristine_dir(self) -> Path:
        return self.dir / "pristine"

    @property
    def rounds_dir(self) -> Path:
        return self.dir / "rounds"

    @property
    def review_dir(self) -> Path:
        return self.dir / "review"

    def round_dir(self, name: str) -> Path:
        return self.rounds_dir / name

    def round_kind(self, name: str) -> str:
        return name.split("-", 1)[1]


class SessionStore:
    def __init__(self, workspace: str | Path, workdir: str = ".migmate"):
        self.workspace = Path(workspace).resolve()
        self.root = (self.workspace / workdir).resolve()
        self.sessions_dir = self.root / "sessions"
        self.lock_path = self.root / "lock"
        self.workdir_name = Path(workdir).name

    # --- locking -------------------------------------------------------------

    def acquire_lock(self, session_id: str, force: bool = False) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        if self.lock_path.exists():
            holder = self._read_lock()
            if holder and _pid_alive(holder.get("pid", -1)):
                raise SessionAlreadyRunning(
                    f"session {holder.get('session_id', '?')} is running (pid {holder['pid']})"
                )
            if not force:
                raise SessionAlreadyRunning(
                    "a stale session lock exists; rerun with --force to reclaim it"
                )
        _write_json(
            self.lock_path,
            {
                "schema": SCHEMA_VERSION,
                "pid": os.getpid(),
                "session_id": session_id,
                "started_at": utcnow(),
            },
        )

    def release_lock(self, session_id: str) -> None:
        holder = self._read_lock()
        if holder and holder.get("session_id") == session_id:
            self.lock_path.unlink(missing_ok=True)

    def _read_lock(self) -> dict | None:
        try:
            return json.loads(self.lock_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None

    # --- lifecycle -----------------------------------------------------------

    def create_session(
        self,
        source: str,
        target: str,
        config: dict,
        pristine_files: dict[str, str],
        force: bool = False,
    ) -> MigrationSession:
        created_at = utcnow()
        session_id = self._new_session_id(created_at, source, target)
        self.acquire_lock(session_id, force=force)
        session = MigrationSession(
            id=session_id,
            dir=self.sessions_dir / session_id,
            source=source,
            target=target,
            config=config,
            created_at=created_at,
        )
        session.dir.mkdir(parents=True)
        _write_json(
            session.dir / "config",
            {
                "schema": SCHEMA_VERSION,
                "source": source,
                "target": target,
                **{k: v for k, v in config.items() if k not in ("source", "target")},
            },
        )
        for rel_path, content in pristine_files.items():
            target_path = session.pristine_dir / rel_path
            target_path.parent.mkdir(parents=True, exist_ok=True)
            target_path.write_text(content, encoding="utf-8")
        (session.dir / "events.log").touch()
        (session.dir / "log.txt").touch()
        self.save_state(session)
        return session

    def _new_session_id(self, created_at: str, source: str, target: str) -> str:
        stamp = created_at.replace(":", "").replace("-", "")[:15]
        base = f"{stamp}-{source}-to-{target}"
        candidate, n = base, 1
        while (self.sessions_dir / candidate).exists():
            n += 1
            candidate = f"{base}-{n}"
        return candidate

    def save_state(self, session: MigrationSession) -> None:
        _write_json(
            session.dir / "state",
            {
                "schema": SCHEMA_VERSION,
                "id": session.id,
                "created_at": session.created_at,
                "source": session.source,
                "target": session.target,
                "state": session.state,
                "rounds": session.rounds,
                "verdict": session.verdict,
                "final_round": session.final_round,
                "progress": session.progress,
                "preview_suppressed": session.preview_suppressed,
            },
        )

    def set_state(self, session: MigrationSession, state: str) -> None:
        if session.state == state:
            return
        if session.state in (DONE, ABORTED):
            raise CorruptSession(f"illegal state transition {session.state} -> {state}")
        if state != ABORTED and _STATE_ORDER.index(state) < _STATE_ORDER.index(session.state):
            raise CorruptSession(f"illegal state transition {session.state} -> {state}")
        session.state = state
        self.save_state(session)

    def update_progress(self, session: MigrationSession, **progress) -> None:
        session.progress = progress
        self.save_state(session)

    def load_session(self, session_id: str) -> MigrationSession:
        session_dir = self.sessions_dir / session_id
        if not session_dir.is_dir():
            raise SessionNotFound(f"no session {session_id!r} under {self.sessions_dir}")
        state = _read_json(session_dir / "state")
        config = _read_json(session_dir / "config")
        try:
            return MigrationSession(
                id=state["id"],
                dir=session_dir,
                source=state["source"],
                target=state["target"],
                config=config,
                created_at=state["created_at"],
                state=state["state"],
                rounds=list(state["rounds"]),
                verdict=state["verdict"],
                final_round=state["final_round"],
                progress=dict(state["progress"]),
                preview_suppressed=bool(state.get("preview_suppressed", False)),
            )
        except KeyError as exc:
            raise CorruptSession(f"missing key {exc} in {session_dir / 'state'}")

    def list_sessions(self) -> list[str]:
        if not self.sessions_dir.is_dir():
            return []
        return sorted(p.name for p in self.sessions_dir.iterdir() if p.is_dir())

    def latest_session_id(self) -> str:
        sessions = self.list_sessions()
        if not sessions:
            raise SessionNotFound(f"no sessions under {self.sessions_dir}")
        return sessions[-1]

    # --- rounds ----------------------------------------------------------------

    def archive_round(
        self,
        session: MigrationSession,
        kind: str,
        report_xml: str | None,
        snapshots: dict[str, str],
        comparison: dict | None,
        notes: dict | None = None,
    ) -> str:
        name = f"{len(session.rounds):02d}-{kind}"
        round_dir = session.round_dir(name)
        if round_dir.exists():
            raise RoundImmutable(f"round {name} is already archived")
        files_dir = round_dir / "files"
        files_dir.mkdir(parents=True)
        if report_xml is not None:
            (round_dir / "report.xml").write_text(report_xml, encoding="utf-8")
        for rel_path, content in snapshots.items():
            path = files_dir / rel_path
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding="utf-8")
        _write_json(round_dir / "comparison", {"schema": SCHEMA_VERSION, **(comparison or {})})
        _write_json(round_dir / "notes", {"schema": SCHEMA_VERSION, **(notes or {})})
        session.rounds.append(name)
        self.save_state(session)
        return name

    def round_report_xml(self, session: MigrationSession, name: str) -> str | None:
        path = session.round_dir(name) / "report.xml"
        return path.read_text(encoding="utf-8") if path.exists() else None

    def round_comparison(self, session: MigrationSession, name: str) -> dict:
        return _read_json(session.round_dir(name) / "comparison")

    def round_snapshots(self, session: MigrationSession, name: str) -> dict[str, str]:
        files_dir = session.round_dir(name) / "files"
        snapshots: dict[str, str] = {}
        if files_dir.is_dir():
            for path in sorted(files_dir.rglob("*")):
                if path.is_file():
                    snapshots[path.relative_to(files_dir).as_posix()] = path.read_text(
                        encoding="utf-8"
                    )
        return snapshots

    def pristine_content(self, session: MigrationSession, rel_path: str) -> str:
        return (session.pristine_dir / rel_path).read_text(encoding="utf-8")

    # --- review state ----------------------------------------------------------

    def save_review_state(self, session: MigrationSession, review: dict) -> None:
        _write_json(session.review_dir / "state.json", {"schema": SCHEMA_VERSION, **review})

    def load_review_state(self, session: MigrationSession) -> dict | None:
        path = session.review_dir / "state.json"
        if not path.exists():
            return None
        return _read_json(path)

    # --- events & log ------------------------------------------------------------

    def record_event(self, session: MigrationSession, kind: str, attrs: dict | None = None) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown telemetry event kind: {kind}")
        line = json.dumps(
            {"schema": SCHEMA_VERSION, "kind": kind, "attrs": attrs or {}, "at": utcnow()},
            sort_keys=True,
        )
        try:
            with open(session.dir / "events.log", "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
        except OSError as exc:
            print(f"warning: telemetry event dropped: {exc}", file=sys.stderr)

    def read_events(self, session: MigrationSession) -> list[dict]:
        path = session.dir / "events.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]

    def log(self, session: MigrationSession, message: str) -> None:
        try:
            with open(session.dir / "log.txt", "a", encoding="utf-8") as handle:
                handle.write(f"[{utcnow()}] {message}\n")
        except OSError as exc:
            print(f"warning: log line dropped: {exc}", file=sys.stderr)

    def read_log(self, session: MigrationSession) -> str:
        path = session.dir / "log.txt"
        return path.read_text(encoding="utf-8") if path.exists() else ""


def _pid_alive(pid: int) -> bool:
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True

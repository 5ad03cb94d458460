"""Selective application of a session's change set to the workspace.

The review set is regenerated entirely from the session directory (pristine
snapshots vs the final round's snapshots); only hunk states are persisted.
Before any write, the on-disk file must still equal the original with the
already-applied hunks composed in; an external edit invalidates the file's
pending hunks with ContextMismatch rather than guessing.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import diffs, store as store_mod
from .diffs import ACCEPTED, APPLIED, PENDING, REJECTED, FileDiff
from .errors import AlreadyApplied, ContextMismatch, CorruptSession, UnknownHunkId
from .store import MigrationSession, SessionStore


@dataclass
class ReviewSet:
    session_id: str
    preview_style: str
    files: list[FileDiff] = field(default_factory=list)

    def file_for(self, path: str) -> FileDiff | None:
        for fd in self.files:
            if fd.path == path:
                return fd
        return None

    def find_hunk(self, hunk_id: str) -> tuple[FileDiff, diffs.Hunk]:
        path = hunk_id.rsplit(":", 1)[0]
        fd = self.file_for(path)
        if fd is None:
            raise UnknownHunkId(f"no file under review for hunk {hunk_id!r}")
        return fd, fd.hunk(hunk_id)

    def states(self) -> dict[str, dict[str, str]]:
        return {fd.path: {h.id: h.state for h in fd.hunks} for fd in self.files}


def build_review(
    session: MigrationSession,
    snapshots: dict[str, str],
    pristine: dict[str, str],
    dependency_path: str | None,
    context_lines: int = 3,
) -> ReviewSet:
    """Compute the initial review set from final snapshots (all hunks pending)."""
    review = ReviewSet(
        session_id=session.id,
        preview_style=session.config.get("preview_style", "incremental"),
    )
    for path in sorted(snapshots):
        original = pristine.get(path, "")
        kind = diffs.DEPENDENCY if path == dependency_path else diffs.SOURCE
        fd = diffs.compute_file_diff(path, original, snapshots[path], kind, context_lines)
        if fd.hunks:
            review.files.append(fd)
    return review


def persist_review(store: SessionStore, session: MigrationSession, review: ReviewSet) -> None:
    store.save_review_state(
        session,
        {
            "preview_style": review.preview_style,
            "files": [
                {
                    "path": fd.path,
                    "kind": fd.kind,
                    "crlf": fd.crlf,
                    "states": {h.id: h.state for h in fd.hunks},
                }
                for fd in review.files
            ],
        },
    )


def load_review(store: SessionStore, session: MigrationSession) -> ReviewSet:
    """Rebuild the review set from disk: snapshots + persisted hunk states."""
    state = store.load_review_state(session)
    if state is None:
        raise CorruptSession(f"session {session.id} has no review state")
    if session.final_round is None:
        raise CorruptSession(f"session {session.id} has no final round")
    snapshots = store.round_snapshots(session, session.final_round)
    review = ReviewSet(session_id=session.id, preview_style=state["preview_style"])
    for entry in state["files"]:
        path = entry["path"]
        if path not in snapshots:
            raise CorruptSession(f"review references missing snapshot {path!r}")
        fd = diffs.compute_file_diff(
            path,
            store.pristine_content(session, path),
            snapshots[path],
            entry["kind"],
            session.config.get("context_lines", 3),
        )
        fd.crlf = entry.get("crlf", fd.crlf)
        states = entry["states"]
        if set(states) != {h.id for h in fd.hunks}:
            raise CorruptSession(f"hunk states out of sync for {path!r}")
        for hunk in fd.hunks:
            hunk.state = states[hunk.id]
        review.files.append(fd)
    return review


# --- application ---------------------------------------------------------------


def _applied_ids(fd: FileDiff) -> set[str]:
    return {h.id for h in fd.hunks if h.state == APPLIED}


def _workspace_path(store: SessionStore, fd: FileDiff) -> Path:
    return store.workspace / fd.path


def _expected_content(fd: FileDiff) -> str:
    return diffs.apply_selection(fd, _applied_ids(fd))


def _verify_workspace(store: SessionStore, fd: FileDiff) -> None:
    path = _workspace_path(store, fd)
    try:
        on_disk = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ContextMismatch(f"{fd.path}: cannot read workspace file: {exc}")
    if diffs.normalize_newlines(on_disk) != _expected_content(fd):
        raise ContextMismatch(
            f"{fd.path}: workspace file changed outside this review; "
            f"its pending hunks are no longer applicable"
        )


def _write_workspace(store: SessionStore, fd: FileDiff, content: str) -> None:
    path = _workspace_path(store, fd)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = diffs.restore_newlines(content, fd.crlf)
    fd_num, tmp = tempfile.mkstemp(dir=path.parent, prefix=".migmate-")
    try:
        with os.fdopen(fd_num, "w", encoding="utf-8", newline="") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_session_applyable(session: MigrationSession) -> None:
    if session.state == store_mod.DONE:
        raise AlreadyApplied(f"session {session.id} is closed; its review is over")
    if session.state not in (store_mod.AWAITING_REVIEW, store_mod.APPLYING):
        raise ContextMismatch(
            f"session {session.id} is {session.state}; nothing to apply"
        )


def _mark_applying(store: SessionStore, session: MigrationSession) -> None:
    if session.state == store_mod.AWAITING_REVIEW:
        store.set_state(session, store_mod.APPLYING)


def apply_hunk(
    store: SessionStore,
    session: MigrationSession,
    review: ReviewSet,
    hunk_id: str,
    record_event: bool = True,
) -> None:
    """Incrementally write a single hunk to the workspace file."""
    _check_session_applyable(session)
    fd, hunk = review.find_hunk(hunk_id)
    if hunk.state == APPLIED:
        raise AlreadyApplied(f"hunk {hunk_id} was already applied")
    if hunk.state == REJECTED:
        raise ContextMismatch(f"hunk {hunk_id} was rejected earlier in this review")
    _verify_workspace(store, fd)
    hunk.state = APPLIED
    _write_workspace(store, fd, _expected_content(fd))
    _mark_applying(store, session)
    persist_review(store, session, review)
    if record_event:
        store.record_event(session, "hunk_applied", {"granularity": "hunk", "id": hunk_id})


def apply_file(
    store: SessionStore,
    session: MigrationSession,
    review: ReviewSet,
    path: str,
) -> list[str]:
    """Apply every remaining hunk of one file in a single write."""
    _check_session_applyable(session)
    fd = review.file_for(path)
    if fd is None:
        raise UnknownHunkId(f"no file under review: {path!r}")
    todo = [h for h in fd.hunks if h.state in (PENDING, ACCEPTED)]
    if not todo:
        raise AlreadyApplied(f"{path}: no hunks left to apply")
    _verify_workspace(store, fd)
    for hunk in todo:
        hunk.state = APPLIED
    _write_workspace(store, fd, _expected_content(fd))
    _mark_applying(store, session)
    persist_review(store, session, review)
    store.record_event(session, "file_applied", {"granularity": "file", "path": path})
    return [h.id for h in todo]


def apply_bulk(
    store: SessionStore,
    session: MigrationSession,
    review: ReviewSet,
    hunk_ids: set[str] | None = None,
    record_event: bool = True,
) -> list[str]:
    """Apply an accepted subset across files; verify-all before any write.

    With ``hunk_ids`` omitted, every pending/accepted hunk is applied. A
    ContextMismatch aborts the whole bulk edit with no file modified.
    """
    _check_session_applyable(session)
    per_file: dict[str, list[diffs.Hunk]] = {}
    if hunk_ids is None:
        chosen = [
            (fd, h) for fd in review.files for h in fd.hunks if h.state in (PENDING, ACCEPTED)
        ]
    else:
        chosen = [review.find_hunk(h) for h in sorted(hunk_ids)]
    applied_ids: list[str] = []
    for fd, hunk in chosen:
        if hunk.state == APPLIED:
            raise AlreadyApplied(f"hunk {hunk.id} was already applied")
        per_file.setdefault(fd.path, []).append(hunk)
    for path in per_file:
        _verify_workspace(store, review.file_for(path))
    for path, hunks in per_file.items():
        fd = review.file_for(path)
        for hunk in hunks:
            hunk.state = APPLIED
            applied_ids.append(hunk.id)
        _write_workspace(store, fd, _expected_content(fd))
    if per_file:
        _mark_applying(store, session)
        persist_review(store, session, review)
    if record_event:
        store.record_event(
            session, "all_applied", {"granularity": "all", "count": len(applied_ids)}
        )
    return applied_ids


def close_review(store: SessionStore, session: MigrationSession, review: ReviewSet) -> None:
    """End the review: unapplied hunks are discarded permanently."""
    if session.state == store_mod.DONE:
        raise AlreadyApplied(f"session {session.id} is already closed")
    for fd in review.files:
        for hunk in fd.hunks:
            if hunk.state != APPLIED:
                hunk.state = REJECTED
    persist_review(store, session, review)
    if session.state == store_mod.AWAITING_REVIEW:
        store.set_state(session, store_mod.APPLYING)
    store.set_state(session, store_mod.DONE)
    store.record_event(session, "preview_closed")

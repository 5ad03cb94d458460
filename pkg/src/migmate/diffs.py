"""Unified-diff computation and selective hunk application.

Diffs are computed on line sequences (``splitlines(keepends=True)``) with
LCS-based grouping, so a missing trailing newline is carried in the line
bytes themselves and survives every splice. Texts are normalized to "\\n"
before diffing; the original line-ending flavor is recorded per file and
restored when results are written back to disk.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from .errors import UnknownHunkId

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
APPLIED = "applied"

CONTEXT = "context"
DEL = "del"
ADD = "add"

SOURCE = "source"
DEPENDENCY = "dependency"

NO_NEWLINE_MARKER = "\\ No newline at end of file"


@dataclass
class Hunk:
    id: str  # "<path>:<index>"
    old_start: int  # unified-header numbers (1-based; empty range prints
    old_len: int    # the line before the gap, matching diff tools)
    new_start: int
    new_len: int
    lines: list[tuple[str, str]]  # (CONTEXT|DEL|ADD, text with newline)
    state: str = PENDING

    @property
    def old_lo(self) -> int:
        """0-based slice start of the old range."""
        return self.old_start - 1 if self.old_len else self.old_start

    def new_side(self) -> list[str]:
        return [text for tag, text in self.lines if tag != DEL]

    def old_side(self) -> list[str]:
        return [text for tag, text in self.lines if tag != ADD]

    def header(self) -> str:
        return "@@ -{} +{} @@".format(
            _format_range(self.old_start, self.old_len),
            _format_range(self.new_start, self.new_len),
        )


@dataclass
class FileDiff:
    path: str
    original: str  # normalized snapshots
    migrated: str
    hunks: list[Hunk] = field(default_factory=list)
    kind: str = SOURCE
    crlf: bool = False

    def hunk(self, hunk_id: str) -> Hunk:
        for h in self.hunks:
            if h.id == hunk_id:
                return h
        raise UnknownHunkId(f"no hunk {hunk_id!r} in {self.path}")


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def restore_newlines(text: str, crlf: bool) -> str:
    return text.replace("\n", "\r\n") if crlf else text


def _format_range(start: int, length: int) -> str:
    return str(start) if length == 1 else f"{start},{length}"


def compute_diff(original: str, migrated: str, context_lines: int = 3, path: str = "") -> list[Hunk]:
    """Unified-diff hunks between two texts; empty when the texts are equal."""
    a = original.splitlines(keepends=True)
    b = migrated.splitlines(keepends=True)
    matcher = difflib.SequenceMatcher(None, a, b)
    hunks: list[Hunk] = []
    for index, group in enumerate(matcher.get_grouped_opcodes(context_lines)):
        lines: list[tuple[str, str]] = []
        for tag, i1, i2, j1, j2 in group:
            if tag == "equal":
                lines.extend((CONTEXT, line) for line in a[i1:i2])
                continue
            if tag in ("delete", "replace"):
                lines.extend((DEL, line) for line in a[i1:i2])
            if tag in ("insert", "replace"):
                lines.extend((ADD, line) for line in b[j1:j2])
        i1, i2 = group[0][1], group[-1][2]
        j1, j2 = group[0][3], group[-1][4]
        old_len, new_len = i2 - i1, j2 - j1
        hunks.append(
            Hunk(
                id=f"{path}:{index}",
                old_start=i1 + 1 if old_len else i1,
                old_len=old_len,
                new_start=j1 + 1 if new_len else j1,
                new_len=new_len,
                lines=lines,
            )
        )
    return hunks


def compute_file_diff(
    path: str,
    original: str,
    migrated: str,
    kind: str = SOURCE,
    context_lines: int = 3,
) -> FileDiff:
    crlf = "\r\n" in original
    norm_original = normalize_newlines(original)
    norm_migrated = normalize_newlines(migrated)
    return FileDiff(
        path=path,
        original=norm_original,
        migrated=norm_migrated,
        hunks=compute_diff(norm_original, norm_migrated, context_lines, path),
        kind=kind,
        crlf=crlf,
    )


def render_unified(diff: FileDiff) -> str:
    """Standard unified-diff text, including no-newline markers."""
    if not diff.hunks:
        return ""
    out = [f"--- a/{diff.path}\n", f"+++ b/{diff.path}\n"]
    prefix = {CONTEXT: " ", DEL: "-", ADD: "+"}
    for hunk in diff.hunks:
        out.append(hunk.header() + "\n")
        for tag, text in hunk.lines:
            if text.endswith("\n"):
                out.append(prefix[tag] + text)
            else:
                out.append(prefix[tag] + text + "\n")
                out.append(NO_NEWLINE_MARKER + "\n")
    return "".join(out)


def apply_selection(diff: FileDiff, selected: set[str]) -> str:
    """Original with exactly the selected hunks applied.

    Selecting every hunk reproduces the migrated text byte-exact; selecting
    none reproduces the original.
    """
    known = {h.id for h in diff.hunks}
    unknown = set(selected) - known
    if unknown:
        raise UnknownHunkId(f"unknown hunk ids: {sorted(unknown)}")
    orig = diff.original.splitlines(keepends=True)
    out: list[str] = []
    cursor = 0
    for hunk in diff.hunks:
        lo = hunk.old_lo
        out.extend(orig[cursor:lo])
        if hunk.id in selected:
            out.extend(hunk.new_side())
        else:
            out.extend(orig[lo : lo + hunk.old_len])
        cursor = lo + hunk.old_len
    out.extend(orig[cursor:])
    return "".join(out)

"""Find the source files relevant to a migration.

A file is relevant when it contains at least one import statement whose
top-level module is the library's import name (or a dotted submodule of it).
Detection is a line-level recognizer anchored at statement start with a
small tracker for triple-quoted strings, so imports mentioned only inside
comments or string literals do not count. Dynamic imports (importlib,
__import__) are out of scope.
"""

from __future__ import annotations

import fnmatch
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .depfile import normalize_name

DEFAULT_EXCLUDED_DIRS = {"venv", "env", "build", "dist", "node_modules", "__pycache__"}

_IMPORT = re.compile(r"^\s*import\s+(.+)$")
_FROM = re.compile(r"^\s*from\s+(\.*[A-Za-z_][\w.]*|\.+)\s+import\b")
_TEST_FILE = re.compile(r"^(test_.*|.*_test|conftest)\.py$")


@dataclass(frozen=True)
class RelevantFile:
    path: str  # workspace-relative, posix separators
    import_lines: list[int]  # 1-based lines with matching imports
    content: str  # pristine pre-migration snapshot
    is_test: bool = False


@dataclass
class ScanResult:
    files: list[RelevantFile] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def import_name_for(library: str, overrides: dict[str, str] | None = None) -> str:
    """Import name for a distribution: user override, else normalized name."""
    overrides = overrides or {}
    for key, value in overrides.items():
        if normalize_name(key) == normalize_name(library):
            return value
    return normalize_name(library)


def _iter_code_lines(text: str):
    """Yield (lineno, line) for lines that start outside a triple-quoted string."""
    in_triple: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        starts_in_code = in_triple is None
        j = 0
        while j < len(line):
            if in_triple is not None:
                if line.startswith(in_triple, j):
                    in_triple = None
                    j += 3
                else:
                    j += 1
                continue
            head = line[j : j + 3]
            if head in ('"""', "'''"):
                in_triple = head
                j += 3
                continue
            ch = line[j]
            if ch == "#":
                break
            if ch in ("'", '"'):
                quote = ch
                j += 1
                while j < len(line) and line[j] != quote:
                    j += 2 if line[j] == "\\" else 1
                j += 1
                continue
            j += 1
        if starts_in_code:
            yield lineno, line


def extract_imports(text: str) -> list[tuple[int, str]]:
    """All (lineno, dotted module path) statements found by the recognizer."""
    found: list[tuple[int, str]] = []
    for lineno, line in _iter_code_lines(text):
        m = _FROM.match(line)
        if m:
            found.append((lineno, m.group(1)))
            continue
        m = _IMPORT.match(line)
        if not m:
            continue
        body = m.group(1).split("#", 1)[0]
        for clause in body.split(","):
            words = clause.split()
            if words and re.fullmatch(r"[\w.]+", words[0]):
                found.append((lineno, words[0]))
    return found


def matching_import_lines(text: str, import_name: str) -> list[int]:
    lines = []
    for lineno, module in extract_imports(text):
        if module == import_name or module.startswith(import_name + "."):
            lines.append(lineno)
    return sorted(set(lines))


def is_test_path(rel_path: str) -> bool:
    parts = rel_path.split("/")
    if any(part in ("tests", "test") for part in parts[:-1]):
        return True
    return bool(_TEST_FILE.match(parts[-1]))


def _excluded(rel_path: str, name: str, excludes: list[str], workdir_name: str) -> bool:
    if name.startswith(".") or name in DEFAULT_EXCLUDED_DIRS or name == workdir_name:
        return True
    if name.endswith(".egg-info"):
        return True
    return any(
        fnmatch.fnmatch(rel_path, pat) or fnmatch.fnmatch(name, pat) for pat in excludes
    )


def find_relevant_files(
    workspace: str | Path,
    import_name: str,
    excludes: list[str] | None = None,
    workdir_name: str = ".migmate",
) -> ScanResult:
    """Scan the workspace tree for files importing ``import_name``.

    Unreadable or undecodable files are reported as warnings and skipped;
    the result is ordered by path so repeated scans are identical.
    """
    root = Path(workspace)
    excludes = list(excludes or [])
    result = ScanResult()
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = Path(dirpath).relative_to(root).as_posix()

        def rel(name: str) -> str:
            return name if rel_dir == "." else f"{rel_dir}/{name}"

        dirnames[:] = sorted(
            d for d in dirnames if not _excluded(rel(d), d, excludes, workdir_name)
        )
        for filename in sorted(filenames):
            if not filename.endswith(".py"):
                continue
            rel_path = rel(filename)
            if _excluded(rel_path, filename, excludes, workdir_name):
                continue
            try:
                content = (Path(dirpath) / filename).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                result.warnings.append(f"skipped unreadable file {rel_path}: {exc}")
                continue
            lines = matching_import_lines(content, import_name)
            if lines:
                result.files.append(
                    RelevantFile(
                        path=rel_path,
                        import_lines=lines,
                        content=content,
                        is_test=is_test_path(rel_path),
                    )
                )
    result.files.sort(key=lambda f: f.path)
    return result

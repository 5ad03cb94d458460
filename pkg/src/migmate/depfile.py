"""Parse, query, and rewrite Python dependency files.

Supports requirements*.txt and pyproject.toml ([project].dependencies plus
[project.optional-dependencies]). Parsing is position-preserving: the
original bytes are kept and every rewrite touches exactly one line, so an
unmodified file always serializes back byte-identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import PurePosixPath

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import InvalidToml, SourceNotDeclared, UnsupportedFileKind

REQUIREMENTS = "requirements"
PYPROJECT = "pyproject"

# name [extras] specifier-and-markers [# comment]
_REQ_LINE = re.compile(
    r"^(?P<lead>\s*)"
    r"(?P<name>[A-Za-z0-9][A-Za-z0-9._-]*)"
    r"(?P<extras>\[[^\]]*\])?"
    r"(?P<spec>[^#]*?)"
    r"(?P<trail>\s*(?:#.*)?)$"
)

# a specifier/marker section may be empty or must open with one of these
_SPEC_OPEN = re.compile(r"^(===|==|~=|!=|>=|<=|<|>|;|@)")


def normalize_name(name: str) -> str:
    """Normalize a distribution name for matching: lowercase, dashes to underscores."""
    return name.lower().replace("-", "_")


def names_match(a: str, b: str) -> bool:
    return normalize_name(a) == normalize_name(b)


@dataclass(frozen=True)
class DependencyEntry:
    name: str  # normalized
    raw_name: str  # original spelling
    version_spec: str | None
    line: int  # 1-based
    file_kind: str  # REQUIREMENTS | PYPROJECT


@dataclass
class DependencyFile:
    path: str  # workspace-relative
    kind: str
    entries: list[DependencyEntry]
    raw: str
    warnings: list[str] = field(default_factory=list)

    def serialize(self) -> str:
        """An unmodified file reproduces its bytes exactly."""
        return self.raw

    def find(self, library: str) -> DependencyEntry | None:
        for entry in self.entries:
            if names_match(entry.name, library):
                return entry
        return None


def infer_kind(path: str) -> str:
    name = PurePosixPath(path.replace("\\", "/")).name
    if name == "pyproject.toml":
        return PYPROJECT
    if name.startswith("requirements") and name.endswith(".txt"):
        return REQUIREMENTS
    raise UnsupportedFileKind(f"not a recognized dependency file: {path}")


def parse_dependency_file(path: str, content: str) -> DependencyFile:
    kind = infer_kind(path)
    if kind == REQUIREMENTS:
        entries, warnings = _parse_requirements(content)
    else:
        entries, warnings = _parse_pyproject(content)
    return DependencyFile(path=path, kind=kind, entries=entries, raw=content, warnings=warnings)


def _parse_requirement_text(text: str) -> tuple[str, str | None, str | None] | None:
    """Decompose one requirement into (raw_name, extras, spec); None if malformed."""
    m = _REQ_LINE.match(text)
    if not m:
        return None
    spec = m.group("spec").strip()
    if spec and not _SPEC_OPEN.match(spec):
        return None
    return m.group("name"), m.group("extras"), spec or None


def _parse_requirements(content: str) -> tuple[list[DependencyEntry], list[str]]:
    entries: list[DependencyEntry] = []
    warnings: list[str] = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        text = line.rstrip("\r")
        stripped = text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("-"):
            warnings.append(f"line {lineno}: option line kept opaque: {stripped.split()[0]}")
            continue
        if re.match(r"^(https?://|git\+|file:)", stripped):
            warnings.append(f"line {lineno}: URL requirement kept opaque")
            continue
        if text.endswith("\\"):
            warnings.append(f"line {lineno}: continuation lines are not rewritten")
            text = text[:-1]
        parsed = _parse_requirement_text(text)
        if parsed is None:
            warnings.append(f"line {lineno}: unparseable requirement skipped")
            continue
        raw_name, _extras, spec = parsed
        entries.append(
            DependencyEntry(
                name=normalize_name(raw_name),
                raw_name=raw_name,
                version_spec=spec,
                line=lineno,
                file_kind=REQUIREMENTS,
            )
        )
    return entries, warnings


def _iter_pyproject_requirements(data: dict) -> list[str]:
    project = data.get("project") or {}
    reqs = list(project.get("dependencies") or [])
    for group in (project.get("optional-dependencies") or {}).values():
        reqs.extend(group)
    return reqs


def _locate_literal(raw_lines: list[str], literal: str, used: set[tuple[int, int]]) -> tuple[int, int, str] | None:
    """Find an unused quoted occurrence; returns (lineno, column, quote char)."""
    for idx, line in enumerate(raw_lines):
        for quote in ('"', "'"):
            needle = f"{quote}{literal}{quote}"
            start = 0
            while True:
                col = line.find(needle, start)
                if col < 0:
                    break
                if (idx + 1, col) not in used:
                    used.add((idx + 1, col))
                    return idx + 1, col, quote
                start = col + 1
    return None


def _parse_pyproject(content: str) -> tuple[list[DependencyEntry], list[str]]:
    try:
        data = tomllib.loads(content)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidToml(f"pyproject.toml failed to parse: {exc}") from exc

    raw_lines = content.splitlines()
    entries: list[DependencyEntry] = []
    warnings: list[str] = []
    used: set[tuple[int, int]] = set()
    for req in _iter_pyproject_requirements(data):
        parsed = _parse_requirement_text(req)
        if parsed is None:
            warnings.append(f"unparseable requirement skipped: {req!r}")
            continue
        located = _locate_literal(raw_lines, req, used)
        if located is None:
            warnings.append(f"could not locate requirement in source text: {req!r}")
            continue
        raw_name, _extras, spec = parsed
        entries.append(
            DependencyEntry(
                name=normalize_name(raw_name),
                raw_name=raw_name,
                version_spec=spec,
                line=located[0],
                file_kind=PYPROJECT,
            )
        )
    entries.sort(key=lambda e: e.line)
    return entries, warnings


def rewrite_dependency(
    file: DependencyFile,
    source: str,
    target: str,
    target_spec: str | None = None,
) -> str:
    """Replace the source declaration with the target; every other byte unchanged.

    The source's own version pin is dropped (it is meaningless for a different
    library); the target is written unpinned unless ``target_spec`` is given.
    """
    entry = file.find(source)
    if entry is None:
        raise SourceNotDeclared(f"{source!r} is not declared in {file.path}")

    replacement = target + (target_spec or "")
    lines = file.raw.splitlines(keepends=True)
    idx = entry.line - 1
    line = lines[idx]
    body, _, terminator = _split_line_ending(line)

    if file.kind == REQUIREMENTS:
        new_body = _rewrite_requirements_line(body, replacement)
    else:
        new_body = _rewrite_pyproject_line(body, entry, replacement)

    lines[idx] = new_body + terminator
    return "".join(lines)


def _split_line_ending(line: str) -> tuple[str, str, str]:
    for ending in ("\r\n", "\n", "\r"):
        if line.endswith(ending):
            return line[: -len(ending)], "", ending
    return line, "", ""


def _rewrite_requirements_line(body: str, replacement: str) -> str:
    m = _REQ_LINE.match(body)
    assert m is not None, "entry line must re-parse"
    start = m.start("name")
    end = m.end("spec")
    # drop trailing whitespace inside the spec span so the comment gap survives
    span = body[start:end].rstrip()
    end = start + len(span)
    return body[:start] + replacement + body[end:]


def _rewrite_pyproject_line(body: str, entry: DependencyEntry, replacement: str) -> str:
    # replace the content of the first quoted literal on the line whose
    # requirement name matches the entry
    for m in re.finditer(r"""(['"])(?P<req>[^'"]*)\1""", body):
        parsed = _parse_requirement_text(m.group("req"))
        if parsed and names_match(parsed[0], entry.raw_name):
            return body[: m.start("req")] + replacement + body[m.end("req"):]
    raise SourceNotDeclared(f"{entry.raw_name!r} no longer present on line {entry.line}")

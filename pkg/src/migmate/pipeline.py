"""Migration pipeline: premig baseline, LLM round, corrective rounds, finalize.

Every round runs on a throwaway shadow copy of the workspace under the
session directory; the user's tree is never touched by the pipeline itself.
After the LLM round, a clean comparison against the baseline stops the
pipeline. Otherwise two guarded repair rounds run: re-including code the
model elided behind placeholder comments, then adding ``async`` to function
definitions that contain ``await``. A repair round's snapshot is kept only
if it does not increase the regression count.
"""

from __future__ import annotations

import difflib
import os
import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from . import depfile as depfile_mod
from . import harness, llm, review, scanner
from . import store as store_mod
from .config import EngineConfig
from .errors import (
    MigmateError,
    MissingApiKey,
    NoDependencyFile,
    NoReportProduced,
    RunnerNotFound,
    SourceNotDeclared,
    SpliceAmbiguous,
    SyntaxCheckFailed,
)
from .harness import ReportComparison, TestReport
from .store import ASYNCFIX, LLMMIG, PREMIG, REINCLUDE, MigrationSession, SessionStore

REPORT_NAME = ".migmate-report.xml"

CLEAN = "clean"
REGRESSED = "regressed"
ABORTED = "aborted"

_DEF_LINE = re.compile(r"^(\s*)(async\s+)?def\s+\w")
_HEADER_LINE = re.compile(r"^\s*(?:async\s+)?(def|class)\s+(\w+)")
_AWAIT = re.compile(r"\bawait\b")


@dataclass
class RoundOutcome:
    kind: str
    name: str  # archived directory name
    snapshots: dict[str, str]
    report: TestReport | None
    comparison: ReportComparison | None


@dataclass
class PreparedMigration:
    source: str
    target: str
    dep_file: depfile_mod.DependencyFile
    relevant: list[scanner.RelevantFile]
    to_migrate: list[scanner.RelevantFile]
    warnings: list[str] = field(default_factory=list)


def locate_dependency_file(workspace: Path) -> list[depfile_mod.DependencyFile]:
    candidates = sorted(workspace.glob("requirements*.txt")) + [workspace / "pyproject.toml"]
    found = []
    for path in candidates:
        if path.is_file():
            found.append(
                depfile_mod.parse_dependency_file(
                    path.name, path.read_text(encoding="utf-8")
                )
            )
    if not found:
        raise NoDependencyFile(
            f"no requirements*.txt or pyproject.toml found in {workspace}"
        )
    return found


def prepare_migration(
    workspace: Path, source: str, target: str, cfg: EngineConfig
) -> PreparedMigration:
    """Validate inputs before any session state is created."""
    dep_files = locate_dependency_file(workspace)
    declaring = [f for f in dep_files if f.find(source)]
    if not declaring:
        searched = ", ".join(f.path for f in dep_files)
        raise SourceNotDeclared(f"{source!r} is not declared in {searched}")
    if not cfg.mock_llm and not os.environ.get(llm.DEFAULT_API_KEY_ENV):
        raise MissingApiKey(
            f"environment variable {llm.DEFAULT_API_KEY_ENV} is not set; "
            f"export it or run with --mock-llm"
        )
    import_name = scanner.import_name_for(source, cfg.import_overrides)
    scan = scanner.find_relevant_files(
        workspace, import_name, cfg.scan_exclude, workdir_name=Path(cfg.workdir).name
    )
    to_migrate = [f for f in scan.files if cfg.include_tests or not f.is_test]
    prepared = PreparedMigration(
        source=source,
        target=target,
        dep_file=declaring[0],
        relevant=scan.files,
        to_migrate=to_migrate,
        warnings=list(scan.warnings),
    )
    skipped = [f.path for f in scan.files if f.is_test and not cfg.include_tests]
    if skipped:
        prepared.warnings.append(
            "test files are kept as the verification oracle and were not sent "
            "to the model: " + ", ".join(skipped)
        )
    return prepared


def make_backend(cfg: EngineConfig):
    if cfg.mock_llm:
        return llm.MockBackend(cfg.mock_llm)
    return llm.HttpBackend()


def llm_config(cfg: EngineConfig) -> llm.LlmConfig:
    return llm.LlmConfig(
        model=cfg.llm,
        base_url=cfg.base_url or llm.DEFAULT_BASE_URL,
        temperature=cfg.temperature,
        max_retries=cfg.max_retries,
        timeout=cfg.llm_timeout,
        max_prompt_tokens=cfg.max_prompt_tokens,
    )


class MigrationPipeline:
    def __init__(
        self,
        store: SessionStore,
        session: MigrationSession,
        cfg: EngineConfig,
        prepared: PreparedMigration,
        backend=None,
        emit=None,
    ):
        self.store = store
        self.session = session
        self.cfg = cfg
        self.prepared = prepared
        self.backend = backend or make_backend(cfg)
        self.emit = emit or (lambda event: None)
        self.baseline: TestReport | None = None
        self.incumbent: RoundOutcome | None = None
        self.elided_paths: set[str] = set()

    # --- helpers ----------------------------------------------------------------

    def _log(self, message: str) -> None:
        self.store.log(self.session, message)

    def _warn(self, message: str) -> None:
        self._log("warning: " + message)
        self.emit({"kind": "warning", "message": message})

    def _shadow_copy(self, tag: str) -> Path:
        dest = self.session.dir / "work" / tag
        if dest.exists():
            shutil.rmtree(dest)
        workdir_root = self.store.root

        def ignore(parent, names):
            skipped = []
            for name in names:
                child = Path(parent) / name
                if not child.is_dir():
                    continue
                if (
                    name.startswith(".")
                    or name in scanner.DEFAULT_EXCLUDED_DIRS
                    or name.endswith(".egg-info")
                    or child.resolve() == workdir_root
                ):
                    skipped.append(name)
            return skipped

        shutil.copytree(self.store.workspace, dest, ignore=ignore)
        return dest

    def _run_round_tests(self, tag: str, snapshots: dict[str, str]) -> TestReport:
        shadow = self._shadow_copy(tag)
        try:
            for rel_path, content in snapshots.items():
                path = shadow / rel_path
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(content, encoding="utf-8")
            report_path = shadow / REPORT_NAME
            report = harness.run_tests(
                shadow, self.cfg.test_cmd, report_path, self.cfg.test_timeout, tag
            )
            report.raw_xml = report_path.read_text(encoding="utf-8")
            return report
        finally:
            shutil.rmtree(shadow, ignore_errors=True)

    def _abort(self, at_round: str, reason: str) -> None:
        self._warn(f"aborting at {at_round}: {reason}")
        self.session.verdict = {"status": ABORTED, "final_round": at_round, "regressions": []}
        self.store.set_state(self.session, store_mod.ABORTED)
        self.store.release_lock(self.session.id)
        self.emit({"kind": "state", "state": store_mod.ABORTED})

    # --- rounds -------------------------------------------------------------------

    def run_premig(self) -> RoundOutcome | None:
        self.emit({"kind": "round_started", "round": PREMIG})
        self.store.update_progress(self.session, round=PREMIG, files_done=0, files_total=0)
        self._log("premig: running baseline test suite")
        try:
            report = self._run_round_tests(PREMIG, {})
        except NoReportProduced as exc:
            self._abort(PREMIG, str(exc))
            return None
        except RunnerNotFound:
            self._abort(PREMIG, "test runner failed to launch")
            raise
        notes: dict = {"counts": report.counts, "exit_code": report.exit_code}
        if not report.cases:
            notes["warnings"] = ["LowConfidence: baseline test suite is empty"]
            self._warn("LowConfidence: baseline test suite is empty")
        comparison = harness.compare_reports(report, report, self.cfg.strict_compare)
        name = self.store.archive_round(
            self.session, PREMIG, report.raw_xml, {}, comparison.to_dict(), notes
        )
        self.baseline = report
        self._log(f"premig: baseline archived ({report.counts})")
        self.emit({"kind": "round_finished", "round": PREMIG, "verdict": "baseline"})
        return RoundOutcome(PREMIG, name, {}, report, comparison)

    def run_llmmig(self) -> RoundOutcome | None:
        assert self.baseline is not None
        self.emit({"kind": "round_started", "round": LLMMIG})
        config = llm_config(self.cfg)
        snapshots: dict[str, str] = {}
        failed: list[str] = []
        total = len(self.prepared.to_migrate)
        self._log(
            f"llmmig: migrating {total} file(s) with model {config.model} "
            f"({'mock transcript' if self.cfg.mock_llm else 'live endpoint'})"
        )
        # the prompt wording shapes every result, so it is recorded verbatim
        self._log(f"llmmig: system preamble: {llm.SYSTEM_PREAMBLE}")
        for index, file in enumerate(self.prepared.to_migrate):
            self.emit(
                {
                    "kind": "file_progress",
                    "round": LLMMIG,
                    "index": index,
                    "total": total,
                    "path": file.path,
                }
            )
            self.store.update_progress(
                self.session, round=LLMMIG, files_done=index, files_total=total
            )
            prompt = llm.build_prompt(self.prepared.source, self.prepared.target, file)
            try:
                response = llm.complete(
                    config,
                    prompt,
                    self.backend,
                    self.cfg.elision_markers,
                    log=lambda meta: self._log(f"llm request: {meta}"),
                )
            except MissingApiKey:
                self._abort(LLMMIG, "api key missing")
                raise
            except MigmateError as exc:
                failed.append(file.path)
                self._warn(f"{file.path} left unmigrated: {exc}")
                continue
            snapshots[file.path] = response.extracted_code
            if response.elided:
                self.elided_paths.add(file.path)
                self._log(f"llmmig: elision marker detected in {file.path}")
        self.store.update_progress(
            self.session, round=LLMMIG, files_done=total, files_total=total
        )
        if total and not snapshots:
            self._abort(LLMMIG, "every file failed to migrate")
            return None
        snapshots[self.prepared.dep_file.path] = depfile_mod.rewrite_dependency(
            self.prepared.dep_file, self.prepared.source, self.prepared.target
        )
        report = self._run_round_tests(LLMMIG, snapshots)
        comparison = harness.compare_reports(self.baseline, report, self.cfg.strict_compare)
        name = self.store.archive_round(
            self.session,
            LLMMIG,
            report.raw_xml,
            snapshots,
            comparison.to_dict(),
            {
                "migrated": sorted(snapshots),
                "failed": failed,
                "elided": sorted(self.elided_paths),
            },
        )
        self.incumbent = RoundOutcome(LLMMIG, name, snapshots, report, comparison)
        self._log(f"llmmig: verdict {comparison.verdict} ({report.counts})")
        self.emit({"kind": "round_finished", "round": LLMMIG, "verdict": comparison.verdict})
        return self.incumbent

    def run_reinclude(self) -> RoundOutcome | None:
        assert self.incumbent is not None and self.baseline is not None
        llm_snapshots = self.incumbent.snapshots
        elided = sorted(p for p in self.elided_paths if p in llm_snapshots)
        if self.incumbent.comparison.verdict == CLEAN or not elided:
            return None
        self.emit({"kind": "round_started", "round": REINCLUDE})
        candidate = dict(llm_snapshots)
        spliced: list[str] = []
        for path in elided:
            original = self.store.pristine_content(self.session, path)
            try:
                result = splice_elided(original, llm_snapshots[path], self.cfg.elision_markers)
            except SpliceAmbiguous as exc:
                self._warn(f"reinclude: {path} kept as-is: {exc}")
                continue
            if result != llm_snapshots[path]:
                candidate[path] = result
                spliced.append(path)
        if not spliced:
            self._log("reinclude: no file could be spliced; round skipped")
            return None
        self._log(f"reinclude: spliced {', '.join(spliced)}")
        return self._corrective_round(REINCLUDE, candidate, {"spliced": spliced})

    def run_asyncfix(self) -> RoundOutcome | None:
        assert self.incumbent is not None
        if self.incumbent.comparison.verdict == CLEAN:
            return None
        candidate = dict(self.incumbent.snapshots)
        rewritten: list[str] = []
        for path in sorted(candidate):
            if not path.endswith(".py"):
                continue
            fixed, changed = add_async_keywords(candidate[path])
            if not changed:
                continue
            try:
                self._syntax_check(path, fixed)
            except SyntaxCheckFailed as exc:
                self._warn(f"asyncfix: {path} reverted: {exc}")
                continue
            candidate[path] = fixed
            rewritten.append(path)
        if not rewritten:
            return None
        self.emit({"kind": "round_started", "round": ASYNCFIX})
        self._log(f"asyncfix: rewrote defs in {', '.join(rewritten)}")
        return self._corrective_round(ASYNCFIX, candidate, {"rewritten": rewritten})

    def _corrective_round(
        self, kind: str, candidate: dict[str, str], notes: dict
    ) -> RoundOutcome:
        report = self._run_round_tests(kind, candidate)
        comparison = harness.compare_reports(self.baseline, report, self.cfg.strict_compare)
        name = self.store.archive_round(
            self.session, kind, report.raw_xml, candidate, comparison.to_dict(), notes
        )
        outcome = RoundOutcome(kind, name, candidate, report, comparison)
        if comparison.regression_count() <= self.incumbent.comparison.regression_count():
            self.incumbent = outcome
            self._log(f"{kind}: kept (verdict {comparison.verdict})")
        else:
            self._log(
                f"{kind}: discarded; it worsened regressions "
                f"({comparison.regression_count()} > "
                f"{self.incumbent.comparison.regression_count()})"
            )
        self.emit({"kind": "round_finished", "round": kind, "verdict": comparison.verdict})
        return outcome

    def _syntax_check(self, rel_path: str, content: str) -> None:
        check_dir = self.session.dir / "work" / "syntax"
        check_dir.mkdir(parents=True, exist_ok=True)
        path = check_dir / Path(rel_path).name
        path.write_text(content, encoding="utf-8")
        command = [
            part.replace("{file}", str(path))
            for part in shlex.split(self.cfg.syntax_check_cmd)
        ]
        try:
            proc = subprocess.run(command, capture_output=True, text=True, timeout=30)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SyntaxCheckFailed(f"syntax check failed to run: {exc}")
        finally:
            shutil.rmtree(check_dir, ignore_errors=True)
        if proc.returncode != 0:
            raise SyntaxCheckFailed(
                f"syntax check exited {proc.returncode}",
                detail=(proc.stderr or proc.stdout).strip()[:500],
            )

    # --- finalize -------------------------------------------------------------------

    def finalize(self) -> MigrationSession:
        assert self.incumbent is not None
        session, store = self.session, self.store
        pristine = {
            path: store.pristine_content(session, path)
            for path in self.incumbent.snapshots
        }
        review_set = review.build_review(
            session,
            self.incumbent.snapshots,
            pristine,
            self.prepared.dep_file.path,
            self.cfg.context_lines,
        )
        review.persist_review(store, session, review_set)
        comparison = self.incumbent.comparison
        status = CLEAN if comparison.verdict == CLEAN else REGRESSED
        session.final_round = self.incumbent.name
        session.verdict = {
            "status": status,
            "final_round": self.incumbent.kind,
            "regressions": comparison.effective_regressions(),
        }
        if status == REGRESSED and not self.cfg.show_preview_on_failure:
            session.preview_suppressed = True
        store.set_state(session, store_mod.AWAITING_REVIEW)
        store.release_lock(session.id)
        if status == REGRESSED:
            self._warn(
                f"{len(session.verdict['regressions'])} test(s) regressed; "
                f"open the test results view (`migmate report {session.id}`)"
            )
        self._log(f"finalize: verdict {status}, review set of {len(review_set.files)} file(s)")
        self.emit({"kind": "state", "state": store_mod.AWAITING_REVIEW})
        return session

    def run(self) -> MigrationSession:
        try:
            self.store.set_state(self.session, store_mod.RUNNING)
            self.emit({"kind": "state", "state": store_mod.RUNNING})
            if self.run_premig() is None:
                return self.session
            if self.run_llmmig() is None:
                return self.session
            if self.incumbent.comparison.verdict != CLEAN:
                self.run_reinclude()
                self.run_asyncfix()
            return self.finalize()
        except MigmateError:
            if self.session.state not in (store_mod.ABORTED, store_mod.AWAITING_REVIEW):
                self._abort(self.session.progress.get("round", "setup"), "unrecoverable error")
            raise
        finally:
            self.store.release_lock(self.session.id)


def start_session(
    workspace: str | Path,
    source: str,
    target: str,
    cfg: EngineConfig,
    emit=None,
    trigger: str = "cli",
    backend=None,
) -> MigrationPipeline:
    """Validate inputs and create the session, but do not run rounds yet."""
    workspace = Path(workspace)
    prepared = prepare_migration(workspace, source, target, cfg)
    store = SessionStore(workspace, cfg.workdir)
    pristine = {f.path: f.content for f in prepared.relevant}
    pristine[prepared.dep_file.path] = prepared.dep_file.raw
    session = store.create_session(
        source, target, cfg.to_dict(), pristine, force=cfg.force
    )
    store.record_event(session, "migration_started", {"trigger": trigger})
    for warning in prepared.warnings:
        store.log(session, "warning: " + warning)
    return MigrationPipeline(store, session, cfg, prepared, backend=backend, emit=emit)


def run_migration(
    workspace: str | Path,
    source: str,
    target: str,
    cfg: EngineConfig,
    emit=None,
    trigger: str = "cli",
    backend=None,
) -> MigrationSession:
    """Prepare, create, and run one full migration session."""
    pipeline = start_session(
        workspace, source, target, cfg, emit=emit, trigger=trigger, backend=backend
    )
    return pipeline.run()


def recover_session(store: SessionStore, session: MigrationSession) -> MigrationSession:
    """Reconstruct a reviewable session from archived rounds after a crash.

    The session directory alone carries enough state: the premig baseline
    plus each archived round's comparison. The last non-worsening round
    becomes the review set, mirroring what finalize would have chosen.
    """
    post_rounds = [name for name in session.rounds if not name.endswith("-" + PREMIG)]
    if not post_rounds:
        session.verdict = {"status": ABORTED, "final_round": PREMIG, "regressions": []}
        store.set_state(session, store_mod.ABORTED)
        store.release_lock(session.id)
        return session

    def regression_count(comparison: dict) -> int:
        return len(
            set(comparison.get("regressions", []))
            | set(comparison.get("missing_previously_passing", []))
        )

    chosen = post_rounds[0]
    chosen_cmp = store.round_comparison(session, chosen)
    for name in post_rounds[1:]:
        comparison = store.round_comparison(session, name)
        if regression_count(comparison) <= regression_count(chosen_cmp):
            chosen, chosen_cmp = name, comparison

    snapshots = store.round_snapshots(session, chosen)
    pristine = {p: store.pristine_content(session, p) for p in snapshots}
    dep_path = next(
        (p for p in snapshots if not p.endswith(".py")), None
    )
    review_set = review.build_review(
        session, snapshots, pristine, dep_path, session.config.get("context_lines", 3)
    )
    review.persist_review(store, session, review_set)
    session.final_round = chosen
    status = CLEAN if chosen_cmp.get("verdict") == CLEAN else REGRESSED
    session.verdict = {
        "status": status,
        "final_round": session.round_kind(chosen),
        "regressions": sorted(
            set(chosen_cmp.get("regressions", []))
            | set(chosen_cmp.get("missing_previously_passing", []))
        ),
    }
    store.set_state(session, store_mod.AWAITING_REVIEW)
    store.release_lock(session.id)
    store.log(session, f"recovered session from archived rounds; review set = {chosen}")
    return session


# --- re-inclusion splice ------------------------------------------------------------


def _header_keys(lines: list[str]) -> list[tuple[int, str]]:
    headers = []
    for idx, line in enumerate(lines):
        m = _HEADER_LINE.match(line)
        if m:
            headers.append((idx, f"{m.group(1)} {m.group(2)}"))
    return headers


def splice_elided(original: str, migrated: str, markers: list[str] | None = None) -> str:
    """Replace elision markers in migrated output with the original's omitted span.

    Alignment matches function/class header lines between the two texts via
    longest-common-subsequence; each marker is replaced by the original lines
    lying strictly between the surrounding matched headers' blocks.
    """
    marker_indices = set(llm.find_elision_lines(migrated, markers))
    if not marker_indices:
        return migrated
    orig_lines = original.splitlines(keepends=True)
    mig_lines = migrated.splitlines(keepends=True)

    orig_heads = _header_keys(orig_lines)
    mig_heads = [(i, key) for i, key in _header_keys(mig_lines) if i not in marker_indices]
    matcher = difflib.SequenceMatcher(
        None, [k for _, k in orig_heads], [k for _, k in mig_heads], autojunk=False
    )
    pairs: list[tuple[int, int]] = []
    for a, b, size in matcher.get_matching_blocks()[:-1]:
        for offset in range(size):
            pairs.append((orig_heads[a + offset][0], mig_heads[b + offset][0]))
    if not pairs:
        raise SpliceAmbiguous("no function or class header could be aligned")

    head_positions = [idx for idx, _ in orig_heads]

    def block_end(head_idx: int) -> int:
        later = [p for p in head_positions if p > head_idx]
        return later[0] if later else len(orig_lines)

    out: list[str] = []
    for index, line in enumerate(mig_lines):
        if index not in marker_indices:
            out.append(line)
            continue
        before = [o for o, m in pairs if m < index]
        after = [o for o, m in pairs if m > index]
        if not before and not after:
            raise SpliceAmbiguous(f"marker on line {index + 1} has no anchor on either side")
        lo = block_end(before[-1]) if before else 0
        hi = after[0] if after else len(orig_lines)
        if lo < hi:
            out.extend(orig_lines[lo:hi])
    return "".join(out)


# --- async repair -------------------------------------------------------------------


def _indent_of(line: str) -> int:
    return len(line) - len(line.lstrip(" \t"))


def _enclosing_def(lines: list[str], index: int) -> int | None:
    current = _indent_of(lines[index])
    for j in range(index - 1, -1, -1):
        line = lines[j]
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        indent = _indent_of(line)
        if indent < current:
            if _DEF_LINE.match(line):
                return j
            current = indent
    return None


def add_async_keywords(text: str) -> tuple[str, bool]:
    """Rewrite each innermost def enclosing an ``await`` to ``async def``."""
    lines = text.splitlines(keepends=True)
    to_fix: set[int] = set()
    for index, line in enumerate(lines):
        if line.lstrip().startswith("#") or not _AWAIT.search(line):
            continue
        def_index = _enclosing_def(lines, index)
        if def_index is None:
            continue
        if not re.match(r"^\s*async\s+def\b", lines[def_index]):
            to_fix.add(def_index)
    for index in to_fix:
        lines[index] = re.sub(r"^(\s*)def\b", r"\1async def", lines[index])
    return "".join(lines), bool(to_fix)

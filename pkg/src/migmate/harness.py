"""Run a project's test suite and compare pre/post reports.

The runner is any command that writes a JUnit-XML report; the command
template must contain a ``{report}`` placeholder. A nonzero exit with a
well-formed report is a normal outcome (failing tests); only a missing
report or a launch failure is an error.
"""

from __future__ import annotations

import re
import shlex
import subprocess
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import NoReportProduced, RunnerNotFound

PASSED = "passed"
FAILED = "failed"
ERRORED = "errored"
SKIPPED = "skipped"

DEFAULT_TEST_COMMAND = "pytest --junitxml={report}"
DEFAULT_TEST_TIMEOUT = 600.0

_ANCHOR = re.compile(r"^(?P<file>[^\s:]+\.py):(?P<line>\d+):", re.MULTILINE)


@dataclass(frozen=True)
class TestCaseResult:
    id: str
    status: str
    file: str | None = None
    line: int | None = None
    message: str | None = None
    duration: float = 0.0


@dataclass
class TestReport:
    round_label: str
    cases: list[TestCaseResult]
    exit_code: int
    started_at: str = ""
    finished_at: str = ""
    raw_xml: str = ""

    @property
    def counts(self) -> dict[str, int]:
        totals = {PASSED: 0, FAILED: 0, ERRORED: 0, SKIPPED: 0}
        for case in self.cases:
            totals[case.status] += 1
        return totals

    def by_id(self) -> dict[str, TestCaseResult]:
        return {case.id: case for case in self.cases}


@dataclass
class ReportComparison:
    regressions: list[str]
    fixes: list[str]
    still_failing: list[str]
    new_tests: list[str]
    missing_tests: list[str]
    missing_previously_passing: list[str]
    verdict: str  # "clean" | "regressed"
    strict: bool = False

    def effective_regressions(self) -> list[str]:
        """Regressions plus previously-passing tests that disappeared."""
        return sorted(set(self.regressions) | set(self.missing_previously_passing))

    def regression_count(self) -> int:
        return len(self.effective_regressions())

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "verdict": self.verdict,
            "strict": self.strict,
            "regressions": self.regressions,
            "fixes": self.fixes,
            "still_failing": self.still_failing,
            "new_tests": self.new_tests,
            "missing_tests": self.missing_tests,
            "missing_previously_passing": self.missing_previously_passing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReportComparison":
        return cls(
            regressions=data["regressions"],
            fixes=data["fixes"],
            still_failing=data["still_failing"],
            new_tests=data["new_tests"],
            missing_tests=data["missing_tests"],
            missing_previously_passing=data["missing_previously_passing"],
            verdict=data["verdict"],
            strict=data.get("strict", False),
        )


def parse_junit_xml(text: str, round_label: str = "", exit_code: int = 0) -> TestReport:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise NoReportProduced(f"report is not valid JUnit XML: {exc}") from exc
    suites = [root] if root.tag == "testsuite" else root.iter("testsuite")
    cases: list[TestCaseResult] = []
    seen: dict[str, int] = {}
    for suite in suites:
        for case in suite.iter("testcase"):
            cases.append(_parse_case(case, seen))
    return TestReport(round_label=round_label, cases=cases, exit_code=exit_code)


def _parse_case(case: ET.Element, seen: dict[str, int]) -> TestCaseResult:
    classname = case.get("classname", "")
    name = case.get("name", "")
    case_id = f"{classname}::{name}" if classname else name
    seen[case_id] = seen.get(case_id, 0) + 1
    if seen[case_id] > 1:
        case_id = f"{case_id}@{seen[case_id]}"

    status, message, detail = PASSED, None, ""
    for child in case:
        if child.tag == "failure":
            status = FAILED
        elif child.tag == "error":
            status = ERRORED
        elif child.tag == "skipped":
            status = SKIPPED
        else:
            continue
        message = child.get("message") or (child.text or "").strip() or child.tag
        detail = child.text or ""
        break

    file = case.get("file")
    line = int(case.get("line")) if case.get("line") else None
    if file is None and detail:
        anchors = _ANCHOR.findall(detail)
        if anchors:
            file, line_text = anchors[-1]
            line = int(line_text)
    return TestCaseResult(
        id=case_id,
        status=status,
        file=file,
        line=line,
        message=message,
        duration=float(case.get("time") or 0.0),
    )


def run_tests(
    workspace: str | Path,
    command_template: str = DEFAULT_TEST_COMMAND,
    report_path: str | Path = "report.xml",
    timeout: float = DEFAULT_TEST_TIMEOUT,
    round_label: str = "",
) -> TestReport:
    if "{report}" not in command_template:
        raise RunnerNotFound("test command template must contain a {report} placeholder")
    report_path = Path(report_path)
    command = [
        part.replace("{report}", str(report_path)) for part in shlex.split(command_template)
    ]
    started = _utcnow()
    try:
        proc = subprocess.run(
            command, cwd=workspace, capture_output=True, text=True, timeout=timeout
        )
    except FileNotFoundError as exc:
        raise RunnerNotFound(f"test runner failed to launch: {command[0]!r}") from exc
    except subprocess.TimeoutExpired as exc:
        raise NoReportProduced(f"test run exceeded {timeout:g}s timeout") from exc
    if not report_path.exists():
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise NoReportProduced(
            f"runner exited {proc.returncode} without a report", detail="\n".join(tail)
        )
    report = parse_junit_xml(
        report_path.read_text(encoding="utf-8"),
        round_label=round_label,
        exit_code=proc.returncode,
    )
    report.started_at = started
    report.finished_at = _utcnow()
    return report


def compare_reports(pre: TestReport, post: TestReport, strict: bool = False) -> ReportComparison:
    """Classify the per-test delta; pre-existing failures are tolerated."""
    pre_by, post_by = pre.by_id(), post.by_id()
    common = pre_by.keys() & post_by.keys()

    def downgraded(before: TestCaseResult, after: TestCaseResult) -> bool:
        if before.status != PASSED:
            return False
        if after.status in (FAILED, ERRORED):
            return True
        return strict and after.status == SKIPPED

    regressions = sorted(i for i in common if downgraded(pre_by[i], post_by[i]))
    fixes = sorted(i for i in common if downgraded(post_by[i], pre_by[i]))
    still_failing = sorted(
        i
        for i in common
        if pre_by[i].status in (FAILED, ERRORED) and post_by[i].status in (FAILED, ERRORED)
    )
    new_tests = sorted(post_by.keys() - pre_by.keys())
    missing_tests = sorted(pre_by.keys() - post_by.keys())
    missing_previously_passing = sorted(
        i for i in missing_tests if pre_by[i].status == PASSED
    )
    verdict = "clean" if not regressions and not missing_previously_passing else "regressed"
    return ReportComparison(
        regressions=regressions,
        fixes=fixes,
        still_failing=still_failing,
        new_tests=new_tests,
        missing_tests=missing_tests,
        missing_previously_passing=missing_previously_passing,
        verdict=verdict,
        strict=strict,
    )


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()

"""Command-line entry point: migrate, report, apply, serve."""

from __future__ import annotations

import socket
import sys
import threading
from pathlib import Path

import click

from . import pipeline, review, store as store_mod
from . import diffs, harness
from .config import EngineConfig, resolve_config
from .errors import (
    EXIT_ABORTED,
    EXIT_CLEAN,
    EXIT_REGRESSED,
    MigmateError,
    PortInUse,
    SessionAlreadyRunning,
    SourceNotDeclared,
)
from .store import MigrationSession, SessionStore

VERDICT_EXIT = {"clean": EXIT_CLEAN, "regressed": EXIT_REGRESSED, "aborted": EXIT_ABORTED}


def _fail(error: MigmateError):
    click.echo(f"error: {error}", err=True)
    if error.detail:
        click.echo(error.detail, err=True)
    sys.exit(error.exit_code)


@click.group()
@click.version_option(package_name="migmate")
def main():
    """LLM-assisted library migration with test verification and hunk review."""


# --- migrate --------------------------------------------------------------------


@main.command("migrate")
@click.argument("source", required=False)
@click.argument("target", required=False)
@click.option("--llm", help="Model name to migrate with.")
@click.option("--test-cmd", help="Test command template; must contain {report}.")
@click.option("--workdir", help="Engine work directory (default .migmate).")
@click.option("--mock-llm", type=click.Path(exists=True, dir_okay=False),
              help="Transcript file standing in for the model.")
@click.option("--apply-mode", type=click.Choice(["interactive", "all", "none"]),
              help="What to do with the change set when the pipeline finishes.")
@click.option("--preview-style", type=click.Choice(["incremental", "bulk"]),
              help="Review flow: apply hunks as you go, or confirm one bulk edit.")
@click.option("--show-preview-on-failure/--no-show-preview-on-failure", default=None,
              help="Offer the preview even when tests regressed.")
@click.option("--serve", "serve_ui", is_flag=True, default=None,
              help="Host the review UI while the migration runs.")
@click.option("--port", type=int, help="Port for --serve.")
@click.option("--force", is_flag=True, default=None, help="Reclaim a stale session lock.")
@click.option("--include-tests", is_flag=True, default=None,
              help="Also send test files to the model (they are the oracle; off by default).")
@click.option("--strict-compare", is_flag=True, default=None,
              help="Count a previously passing test that is now skipped as a regression.")
def cmd_migrate(source, target, serve_ui, **flags):
    """Migrate SOURCE to TARGET across the workspace, then review the changes."""
    workspace = Path.cwd()
    try:
        cfg = resolve_config(workspace, flags)
        source, target = _pick_libraries(workspace, source, target)
        if serve_ui:
            _serve_in_background(workspace, cfg)
        session = pipeline.run_migration(
            workspace, source, target, cfg, emit=_progress_printer(), trigger="cli"
        )
    except MigmateError as error:
        _fail(error)

    status = session.verdict["status"] if session.verdict else "aborted"
    click.echo(f"session {session.id}: verdict {status}")
    if status == "regressed":
        click.echo(
            f"warning: {len(session.verdict['regressions'])} test(s) regressed; "
            f"see `migmate report {session.id}`",
            err=True,
        )
    if status != "aborted":
        try:
            _handle_apply_mode(workspace, cfg, session)
        except MigmateError as error:
            _fail(error)
    if serve_ui:
        click.echo("review UI still serving; press Ctrl+C to stop")
        try:
            threading.Event().wait()
        except KeyboardInterrupt:
            pass
    sys.exit(VERDICT_EXIT[status])


def _pick_libraries(workspace: Path, source: str | None, target: str | None):
    if source is None:
        dep_files = pipeline.locate_dependency_file(workspace)
        entries = [e for f in dep_files for e in f.entries]
        if not entries:
            raise SourceNotDeclared("the dependency file declares no libraries")
        click.echo("Declared libraries:")
        for index, entry in enumerate(entries, start=1):
            click.echo(f"  {index}. {entry.raw_name}{entry.version_spec or ''}")
        choice = click.prompt("Migrate which library", type=click.IntRange(1, len(entries)))
        source = entries[choice - 1].raw_name
    if target is None:
        target = click.prompt(f"Target library to replace {source!r}")
    return source, target


def _progress_printer():
    def emit(event: dict):
        kind = event.get("kind")
        if kind == "round_started":
            click.echo(f"[{event['round']}] started", err=True)
        elif kind == "file_progress":
            click.echo(
                f"[{event['round']}] file {event['index'] + 1}/{event['total']}: {event['path']}",
                err=True,
            )
        elif kind == "round_finished":
            click.echo(f"[{event['round']}] finished: {event['verdict']}", err=True)
        elif kind == "warning":
            click.echo(f"warning: {event['message']}", err=True)

    return emit


def _stdin_is_tty() -> bool:
    return sys.stdin.isatty()


def _handle_apply_mode(workspace: Path, cfg: EngineConfig, session: MigrationSession):
    mode = cfg.apply_mode
    if mode == "interactive" and not _stdin_is_tty():
        mode = "none"
    if mode == "none":
        click.echo(
            f"changes are awaiting review: `migmate apply {session.id} --all`, "
            f"`migmate serve`, or `migmate report {session.id}`"
        )
        return
    store = SessionStore(workspace, cfg.workdir)
    session = store.load_session(session.id)
    review_set = review.load_review(store, session)
    if not review_set.files:
        click.echo("no changes to apply")
        review.close_review(store, session, review_set)
        return
    if mode == "all":
        review.apply_bulk(store, session, review_set)
        review.close_review(store, session, review_set)
        click.echo("applied every change")
        return
    _interactive_review(store, session, review_set)


def _interactive_review(store, session, review_set):
    accepted: list[str] = []
    incremental = review_set.preview_style == "incremental"
    quit_all = False
    for fd in review_set.files:
        if quit_all:
            break
        click.echo(f"\n=== {fd.path} ({len(fd.hunks)} hunk(s), {fd.kind}) ===")
        take_file = False
        for hunk in fd.hunks:
            click.echo(_render_hunk(hunk))
            if take_file:
                choice = "y"
            else:
                choice = click.prompt(
                    "apply? [y]es [n]o [f]ile [a]ll [q]uit",
                    type=click.Choice(["y", "n", "f", "a", "q"]),
                    default="y",
                )
            if choice == "q":
                quit_all = True
                break
            if choice == "f":
                take_file = True
                choice = "y"
            if choice == "a":
                remaining = [
                    h.id
                    for f in review_set.files
                    for h in f.hunks
                    if h.state == diffs.PENDING
                ]
                if incremental:
                    for hunk_id in remaining:
                        review.apply_hunk(store, session, review_set, hunk_id)
                else:
                    accepted.extend(remaining)
                quit_all = True
                break
            if choice == "y":
                if incremental:
                    review.apply_hunk(store, session, review_set, hunk.id)
                else:
                    accepted.append(hunk.id)
    if not incremental and accepted:
        review.apply_bulk(store, session, review_set, set(accepted))
    review.close_review(store, session, review_set)
    click.echo("review closed")


def _render_hunk(hunk) -> str:
    colors = {"context": None, "del": "red", "add": "green"}
    prefix = {"context": " ", "del": "-", "add": "+"}
    lines = [click.style(hunk.header(), fg="cyan")]
    for tag, text in hunk.lines:
        lines.append(click.style(prefix[tag] + text.rstrip("\n"), fg=colors[tag]))
    return "\n".join(lines)


# --- report ----------------------------------------------------------------------


@main.command("report")
@click.argument("session_id", required=False)
@click.option("--workdir", help="Engine work directory (default .migmate).")
def cmd_report(session_id, workdir):
    """Summarize pre- vs post-migration test results for a session."""
    try:
        store, session = _load(Path.cwd(), session_id, workdir, tolerate_running=True)
        _print_report(store, session)
        store.record_event(session, "tests_viewed", {"surface": "cli"})
    except MigmateError as error:
        _fail(error)


def _print_report(store: SessionStore, session: MigrationSession):
    click.echo(f"session {session.id}: {session.source} -> {session.target}")
    click.echo(f"state: {session.state}")
    verdict = session.verdict or {}
    click.echo(f"verdict: {verdict.get('status', 'n/a')}")
    reports: dict[str, harness.TestReport] = {}
    for name in session.rounds:
        xml = store.round_report_xml(session, name)
        if xml:
            reports[name] = harness.parse_junit_xml(xml, round_label=name)
    if reports:
        click.echo("\nround      passed failed errored skipped")
        for name, report in reports.items():
            counts = report.counts
            click.echo(
                f"{name:<12} {counts['passed']:>4} {counts['failed']:>6} "
                f"{counts['errored']:>7} {counts['skipped']:>7}"
            )
    regressions = verdict.get("regressions") or []
    if regressions and session.final_round:
        final_report = reports.get(session.final_round)
        cases = final_report.by_id() if final_report else {}
        click.echo("\nregressions:")
        for test_id in regressions:
            case = cases.get(test_id)
            message = f": {case.message}" if case and case.message else ""
            anchor = f" [{case.file}:{case.line}]" if case and case.file else ""
            click.echo(f"  {test_id}{anchor}{message}")


# --- apply -----------------------------------------------------------------------


@main.command("apply")
@click.argument("session_id", required=False)
@click.option("--all", "apply_all", is_flag=True, help="Apply the entire change set and close.")
@click.option("--file", "files", multiple=True, help="Apply all hunks of this file.")
@click.option("--hunk", "hunks", multiple=True, help="Apply one hunk id (path:index).")
@click.option("--workdir", help="Engine work directory (default .migmate).")
def cmd_apply(session_id, apply_all, files, hunks, workdir):
    """Write approved changes from a session into the workspace."""
    if not (apply_all or files or hunks):
        raise click.UsageError("choose --all, --file PATH, or --hunk ID")
    try:
        store, session = _load(Path.cwd(), session_id, workdir)
        review_set = review.load_review(store, session)
        if apply_all:
            review.apply_bulk(store, session, review_set)
            review.close_review(store, session, review_set)
            click.echo("applied every change; session closed")
        else:
            for path in files:
                applied = review.apply_file(store, session, review_set, path)
                click.echo(f"applied {len(applied)} hunk(s) of {path}")
            for hunk_id in hunks:
                review.apply_hunk(store, session, review_set, hunk_id)
                click.echo(f"applied {hunk_id}")
    except MigmateError as error:
        _fail(error)


def _load(
    workspace: Path,
    session_id: str | None,
    workdir: str | None,
    tolerate_running: bool = False,
):
    cfg = resolve_config(workspace, {"workdir": workdir})
    store = SessionStore(workspace, cfg.workdir)
    session = store.load_session(session_id or store.latest_session_id())
    if session.state in (store_mod.INITIALIZING, store_mod.RUNNING):
        holder = store._read_lock()
        if holder and store_mod._pid_alive(holder.get("pid", -1)):
            if tolerate_running:
                return store, session
            raise SessionAlreadyRunning(
                f"session {session.id} is still running (pid {holder['pid']})"
            )
        session = pipeline.recover_session(store, session)
    return store, session


# --- serve -----------------------------------------------------------------------


@main.command("serve")
@click.option("--port", type=int, help="Port to bind (default 8642).")
@click.option("--workdir", help="Engine work directory (default .migmate).")
def cmd_serve(port, workdir):
    """Host the local review API and browser UI."""
    workspace = Path.cwd()
    try:
        cfg = resolve_config(workspace, {"port": port, "workdir": workdir})
        _check_port_free(cfg.port)
        click.echo(f"review UI at http://127.0.0.1:{cfg.port}/ (Ctrl+C to stop)")
        from .service import run_service

        run_service(workspace, cfg)
    except MigmateError as error:
        _fail(error)


def _check_port_free(port: int):
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        try:
            probe.bind(("127.0.0.1", port))
        except OSError as exc:
            raise PortInUse(f"port {port} is already in use: {exc}")


def _serve_in_background(workspace: Path, cfg: EngineConfig):
    _check_port_free(cfg.port)
    from .service import create_app

    import uvicorn

    app = create_app(workspace, cfg)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=cfg.port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    click.echo(f"review UI at http://127.0.0.1:{cfg.port}/", err=True)


if __name__ == "__main__":
    main()

"""Local HTTP API over migration sessions, plus the static review UI.

Every GET is answered from the session directory on disk, so reads survive
process restarts; mutations (apply, close) are serialized per session.
Binds to loopback only. Error bodies are uniform: {code, message, detail}.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import harness, pipeline, review, store as store_mod
from .config import EngineConfig, resolve_config
from .errors import (
    AlreadyApplied,
    ContextMismatch,
    InvalidConfig,
    MigmateError,
    MissingApiKey,
    NoDependencyFile,
    RoundImmutable,
    SessionAlreadyRunning,
    SessionNotFound,
    SourceNotDeclared,
    UnknownHunkId,
)
from .store import MigrationSession, SessionStore

API_SCHEMA = 1

_STATUS_BY_ERROR = {
    SessionNotFound: 404,
    UnknownHunkId: 404,
    SessionAlreadyRunning: 409,
    ContextMismatch: 409,
    AlreadyApplied: 409,
    RoundImmutable: 409,
    SourceNotDeclared: 422,
    NoDependencyFile: 422,
    MissingApiKey: 422,
    InvalidConfig: 422,
}


class StartSessionBody(BaseModel):
    source: str
    target: str
    options: dict = {}


class ApplyBody(BaseModel):
    scope: str  # hunk | file | all
    ids: list[str] = []


class ServiceState:
    def __init__(self, workspace: Path, cfg: EngineConfig):
        self.workspace = workspace
        self.cfg = cfg
        self.store = SessionStore(workspace, cfg.workdir)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.pipeline_threads: list[threading.Thread] = []

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())


def _error_response(error: MigmateError) -> JSONResponse:
    status = next(
        (code for cls, code in _STATUS_BY_ERROR.items() if isinstance(error, cls)), 400
    )
    return JSONResponse(
        status_code=status,
        content={"code": error.code, "message": str(error), "detail": error.detail},
    )


def _session_view(session: MigrationSession) -> dict:
    return {
        "schema": API_SCHEMA,
        "id": session.id,
        "state": session.state,
        "verdict": session.verdict,
        "progress": session.progress,
        "created_at": session.created_at,
        "source": session.source,
        "target": session.target,
        "rounds": session.rounds,
        "preview_suppressed": session.preview_suppressed,
    }


def _diff_view(store: SessionStore, session: MigrationSession) -> dict:
    if store.load_review_state(session) is None:
        return {"schema": API_SCHEMA, "files": []}
    review_set = review.load_review(store, session)
    return {
        "schema": API_SCHEMA,
        "files": [
            {
                "path": fd.path,
                "kind": fd.kind,
                "hunks": [
                    {
                        "id": hunk.id,
                        "header": hunk.header(),
                        "state": hunk.state,
                        "lines": [
                            {"tag": tag, "text": text.rstrip("\n")} for tag, text in hunk.lines
                        ],
                    }
                    for hunk in fd.hunks
                ],
            }
            for fd in review_set.files
        ],
    }


def _tests_view(store: SessionStore, session: MigrationSession) -> dict:
    rounds = []
    reports: dict[str, harness.TestReport] = {}
    for name in session.rounds:
        xml = store.round_report_xml(session, name)
        if xml is None:
            continue
        report = harness.parse_junit_xml(xml, round_label=name)
        reports[name] = report
        rounds.append(
            {"name": name, "kind": session.round_kind(name), "counts": report.counts}
        )
    comparison = (
        store.round_comparison(session, session.final_round) if session.final_round else {}
    )
    final_report = reports.get(session.final_round or "")
    cases = final_report.by_id() if final_report else {}
    verdict = session.verdict or {}

    def case_detail(test_id: str) -> dict:
        case = cases.get(test_id)
        return {
            "id": test_id,
            "message": case.message if case else None,
            "file": case.file if case else None,
            "line": case.line if case else None,
        }

    premig = next((r for r in rounds if r["kind"] == store_mod.PREMIG), None)
    final = next((r for r in rounds if session.final_round == r["name"]), None)
    return {
        "schema": API_SCHEMA,
        "verdict": verdict.get("status"),
        "pre": premig["counts"] if premig else None,
        "post": final["counts"] if final else None,
        "rounds": rounds,
        "regressions": [case_detail(i) for i in verdict.get("regressions", [])],
        "comparison": {k: v for k, v in comparison.items() if k != "schema"},
    }


def _find_ui_dir() -> Path | None:
    candidates = []
    if os.environ.get("MIGMATE_UI_DIR"):
        candidates.append(Path(os.environ["MIGMATE_UI_DIR"]))
    candidates.append(Path(__file__).resolve().parents[2] / "frontend")
    for candidate in candidates:
        if (candidate / "index.html").is_file() and (candidate / "dist" / "main.js").is_file():
            return candidate
    return None


def create_app(workspace: str | Path, cfg: EngineConfig | None = None) -> FastAPI:
    workspace = Path(workspace)
    cfg = cfg or resolve_config(workspace)
    state = ServiceState(workspace, cfg)
    app = FastAPI(title="migmate review service", docs_url=None, redoc_url=None)
    app.state.service = state

    @app.exception_handler(MigmateError)
    async def _migmate_error_handler(request: Request, error: MigmateError):
        return _error_response(error)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "schema": API_SCHEMA}

    @app.get("/api/dependencies")
    def dependencies():
        files = pipeline.locate_dependency_file(state.workspace)
        return {
            "schema": API_SCHEMA,
            "files": [
                {
                    "path": f.path,
                    "kind": f.kind,
                    "entries": [
                        {
                            "name": e.name,
                            "raw_name": e.raw_name,
                            "version_spec": e.version_spec,
                            "line": e.line,
                        }
                        for e in f.entries
                    ],
                }
                for f in files
            ],
        }

    @app.get("/api/sessions")
    def list_sessions():
        views = []
        for session_id in state.store.list_sessions():
            views.append(_session_view(state.store.load_session(session_id)))
        return {"schema": API_SCHEMA, "sessions": views}

    @app.post("/api/sessions", status_code=202)
    def start_session(body: StartSessionBody):
        options = {k: v for k, v in body.options.items() if v is not None}
        cfg_run = resolve_config(state.workspace, {**cfg.to_dict(), **options})
        pipe = pipeline.start_session(
            state.workspace, body.source, body.target, cfg_run, trigger="api"
        )

        def run_pipeline():
            try:
                pipe.run()
            except MigmateError as error:
                # the pipeline has already aborted the session and logged it
                state.store.log(pipe.session, f"pipeline stopped: {error}")

        thread = threading.Thread(target=run_pipeline, daemon=True)
        thread.start()
        state.pipeline_threads.append(thread)
        return {"schema": API_SCHEMA, "id": pipe.session.id}

    def _get_session(session_id: str) -> MigrationSession:
        return state.store.load_session(session_id)

    @app.get("/api/sessions/{session_id}")
    def session_view(session_id: str):
        return _session_view(_get_session(session_id))

    @app.get("/api/sessions/{session_id}/diff")
    def session_diff(session_id: str):
        return _diff_view(state.store, _get_session(session_id))

    @app.get("/api/sessions/{session_id}/tests")
    def session_tests(session_id: str):
        session = _get_session(session_id)
        view = _tests_view(state.store, session)
        state.store.record_event(session, "tests_viewed", {"surface": "api"})
        return view

    @app.get("/api/sessions/{session_id}/log")
    def session_log(session_id: str):
        return PlainTextResponse(state.store.read_log(_get_session(session_id)))

    def _load_for_mutation(session_id: str) -> tuple[MigrationSession, review.ReviewSet]:
        session = state.store.load_session(session_id)
        if session.state in (store_mod.INITIALIZING, store_mod.RUNNING):
            holder = state.store._read_lock()
            if holder and store_mod._pid_alive(holder.get("pid", -1)):
                raise SessionAlreadyRunning(f"session {session.id} is still running")
            session = pipeline.recover_session(state.store, session)
        return session, review.load_review(state.store, session)

    @app.post("/api/sessions/{session_id}/apply")
    def session_apply(session_id: str, body: ApplyBody):
        with state.session_lock(session_id):
            session, review_set = _load_for_mutation(session_id)
            if body.scope == "all":
                review.apply_bulk(state.store, session, review_set)
            elif body.scope == "file":
                for path in body.ids:
                    review.apply_file(state.store, session, review_set, path)
            elif body.scope == "hunk":
                for hunk_id in body.ids:
                    review.apply_hunk(state.store, session, review_set, hunk_id)
            else:
                raise UnknownHunkId(f"unknown apply scope {body.scope!r}")
            return {
                "schema": API_SCHEMA,
                "state": session.state,
                "files": review_set.states(),
            }

    @app.post("/api/sessions/{session_id}/close")
    def session_close(session_id: str):
        with state.session_lock(session_id):
            session, review_set = _load_for_mutation(session_id)
            review.close_review(state.store, session, review_set)
            return {"schema": API_SCHEMA, "state": session.state}

    ui_dir = _find_ui_dir()
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<html><body><h1>migmate review service</h1>"
                "<p>The browser UI is not built. The JSON API lives under "
                "<code>/api</code> (health, dependencies, sessions).</p></body></html>"
            )

    return app


def run_service(workspace: str | Path, cfg: EngineConfig):
    import uvicorn

    app = create_app(workspace, cfg)
    uvicorn.run(app, host="127.0.0.1", port=cfg.port, log_level="warning")

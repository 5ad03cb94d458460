"""Exception hierarchy shared by the engine, CLI, and service.

Every error that should surface to a user carries a stable CLI exit code
(see EXIT_* constants); the HTTP layer maps the same classes to status
codes and ``{code, message, detail}`` bodies.
"""

EXIT_CLEAN = 0
EXIT_REGRESSED = 2
EXIT_ABORTED = 3
EXIT_CONFIG = 4
EXIT_NOT_FOUND = 5
EXIT_CONFLICT = 6
EXIT_SERVICE = 7


class MigmateError(Exception):
    """Base class; ``exit_code`` drives the CLI, ``code`` the API body."""

    exit_code = 1
    code = "error"

    def __init__(self, message: str, detail: str | None = None):
        super().__init__(message)
        self.detail = detail


# --- dependency files -------------------------------------------------------

class UnsupportedFileKind(MigmateError):
    exit_code = EXIT_CONFIG
    code = "unsupported_file_kind"


class InvalidToml(MigmateError):
    exit_code = EXIT_CONFIG
    code = "invalid_toml"


class InvalidConfig(MigmateError):
    exit_code = EXIT_CONFIG
    code = "invalid_config"


class NoDependencyFile(MigmateError):
    exit_code = EXIT_NOT_FOUND
    code = "no_dependency_file"


class SourceNotDeclared(MigmateError):
    exit_code = EXIT_NOT_FOUND
    code = "source_not_declared"


# --- LLM gateway -------------------------------------------------------------

class MissingApiKey(MigmateError):
    exit_code = EXIT_CONFIG
    code = "missing_api_key"


class TransportError(MigmateError):
    exit_code = EXIT_CONFIG
    code = "transport_error"


class ModelRefusal(MigmateError):
    code = "model_refusal"


class EmptyResponse(MigmateError):
    code = "empty_response"


class MockTranscriptMiss(MigmateError):
    exit_code = EXIT_NOT_FOUND
    code = "mock_transcript_miss"


class FileTooLarge(MigmateError):
    code = "file_too_large"


class SpliceAmbiguous(MigmateError):
    code = "splice_ambiguous"


class SyntaxCheckFailed(MigmateError):
    code = "syntax_check_failed"


# --- test harness ------------------------------------------------------------

class RunnerNotFound(MigmateError):
    exit_code = EXIT_CONFIG
    code = "runner_not_found"


class NoReportProduced(MigmateError):
    code = "no_report_produced"


# --- diff engine / review ----------------------------------------------------

class ContextMismatch(MigmateError):
    exit_code = EXIT_CONFLICT
    code = "context_mismatch"


class UnknownHunkId(MigmateError):
    exit_code = EXIT_NOT_FOUND
    code = "unknown_hunk_id"


class AlreadyApplied(MigmateError):
    exit_code = EXIT_CONFLICT
    code = "already_applied"


# --- session store -----------------------------------------------------------

class SessionAlreadyRunning(MigmateError):
    exit_code = EXIT_CONFLICT
    code = "session_already_running"


class SessionNotFound(MigmateError):
    exit_code = EXIT_NOT_FOUND
    code = "session_not_found"


class CorruptSession(MigmateError):
    exit_code = EXIT_CONFIG
    code = "corrupt_session"


class RoundImmutable(MigmateError):
    exit_code = EXIT_CONFLICT
    code = "round_immutable"


# --- service -----------------------------------------------------------------

class PortInUse(MigmateError):
    exit_code = EXIT_SERVICE
    code = "port_in_use"

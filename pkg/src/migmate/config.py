"""Layered engine configuration.

Precedence, lowest to highest: built-in defaults, the project-level
``.migmate.toml`` file, environment variables, explicit flags. The resolved
values are echoed into the session record so every run is auditable.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import InvalidConfig
from .llm import DEFAULT_ELISION_MARKERS, DEFAULT_MODEL
from .harness import DEFAULT_TEST_COMMAND, DEFAULT_TEST_TIMEOUT

CONFIG_FILENAME = ".migmate.toml"

ENV_KEYS = {
    "MIGMATE_WORKDIR": "workdir",
    "OPENAI_BASE_URL": "base_url",
}

PREVIEW_STYLES = ("incremental", "bulk")
APPLY_MODES = ("interactive", "all", "none")


@dataclass
class EngineConfig:
    llm: str = DEFAULT_MODEL
    base_url: str | None = None
    test_cmd: str = DEFAULT_TEST_COMMAND
    test_timeout: float = DEFAULT_TEST_TIMEOUT
    preview_style: str = "incremental"
    show_preview_on_failure: bool = True
    apply_mode: str = "interactive"
    workdir: str = ".migmate"
    mock_llm: str | None = None
    port: int = 8642
    include_tests: bool = False
    strict_compare: bool = False
    force: bool = False
    temperature: float = 0.0
    max_retries: int = 2
    llm_timeout: float = 60.0
    max_prompt_tokens: int = 100_000
    context_lines: int = 3
    scan_exclude: list[str] = field(default_factory=list)
    elision_markers: list[str] = field(default_factory=lambda: list(DEFAULT_ELISION_MARKERS))
    syntax_check_cmd: str = f"{sys.executable} -m py_compile {{file}}"
    import_overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.preview_style not in PREVIEW_STYLES:
            raise InvalidConfig(f"preview_style must be one of {PREVIEW_STYLES}")
        if self.apply_mode not in APPLY_MODES:
            raise InvalidConfig(f"apply_mode must be one of {APPLY_MODES}")
        if "{report}" not in self.test_cmd:
            raise InvalidConfig("test_cmd must contain a {report} placeholder")

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(EngineConfig)}


def _read_config_file(workspace: Path) -> dict:
    path = workspace / CONFIG_FILENAME
    if not path.exists():
        return {}
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig(f"{CONFIG_FILENAME} failed to parse: {exc}") from exc
    values: dict = {}
    for key, value in data.items():
        if key == "scan" and isinstance(value, dict):
            if "exclude" in value:
                values["scan_exclude"] = list(value["exclude"])
        elif key == "imports" and isinstance(value, dict):
            values["import_overrides"] = {str(k): str(v) for k, v in value.items()}
        elif key in _FIELD_NAMES:
            values[key] = value
    return values


def resolve_config(
    workspace: str | Path,
    flags: dict | None = None,
    env: dict | None = None,
) -> EngineConfig:
    """Merge all configuration layers into one EngineConfig."""
    import os

    env = os.environ if env is None else env
    values: dict = {}
    values.update(_read_config_file(Path(workspace)))
    for env_key, field_name in ENV_KEYS.items():
        if env.get(env_key):
            values[field_name] = env[env_key]
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in _FIELD_NAMES:
            raise InvalidConfig(f"unknown configuration key: {key}")
        values[key] = value
    try:
        return EngineConfig(**values)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc

import pytest

from migmate.config import EngineConfig, resolve_config
from migmate.errors import InvalidConfig


def test_defaults_are_sane(tmp_path):
    cfg = resolve_config(tmp_path, env={})
    assert cfg.llm == "gpt-4o-mini"
    assert cfg.workdir == ".migmate"
    assert "{report}" in cfg.test_cmd
    assert cfg.temperature == 0.0


def test_precedence_defaults_file_env_flags(tmp_path):
    (tmp_path / ".migmate.toml").write_text('workdir = "from-file"\nllm = "file-model"\n')
    env = {"MIGMATE_WORKDIR": "from-env"}

    file_only = resolve_config(tmp_path, env={})
    assert file_only.workdir == "from-file"

    env_over_file = resolve_config(tmp_path, env=env)
    assert env_over_file.workdir == "from-env"
    assert env_over_file.llm == "file-model"

    flags_win = resolve_config(tmp_path, flags={"workdir": "from-flag"}, env=env)
    assert flags_win.workdir == "from-flag"


def test_scan_exclude_and_import_overrides_from_toml(tmp_path):
    (tmp_path / ".migmate.toml").write_text(
        '[scan]\nexclude = ["docs/**", "legacy/*"]\n\n[imports]\nbeautifulsoup4 = "bs4"\n'
    )
    cfg = resolve_config(tmp_path, env={})
    assert cfg.scan_exclude == ["docs/**", "legacy/*"]
    assert cfg.import_overrides == {"beautifulsoup4": "bs4"}


def test_none_flags_do_not_override(tmp_path):
    (tmp_path / ".migmate.toml").write_text('llm = "file-model"\n')
    cfg = resolve_config(tmp_path, flags={"llm": None}, env={})
    assert cfg.llm == "file-model"


def test_invalid_choices_rejected(tmp_path):
    with pytest.raises(InvalidConfig):
        resolve_config(tmp_path, flags={"preview_style": "fancy"}, env={})
    with pytest.raises(InvalidConfig):
        resolve_config(tmp_path, flags={"apply_mode": "yolo"}, env={})
    with pytest.raises(InvalidConfig):
        EngineConfig(test_cmd="pytest")


def test_bad_toml_is_a_config_error(tmp_path):
    (tmp_path / ".migmate.toml").write_text("[scan\n")
    with pytest.raises(InvalidConfig):
        resolve_config(tmp_path, env={})


def test_openai_base_url_env(tmp_path):
    cfg = resolve_config(tmp_path, env={"OPENAI_BASE_URL": "http://localhost:9999/v1"})
    assert cfg.base_url == "http://localhost:9999/v1"

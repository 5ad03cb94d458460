import ast

from migmate import scanner

# realistic snippets the recognizer must judge exactly like the ast oracle
SNIPPETS = [
    "import requests\n",
    "import os\n",
    "from requests.adapters import HTTPAdapter\n",
    "from requests import (\n    Session,\n    get,\n)\n",
    "import requests, json\n",
    "import json, requests as r\n",
    "def setup():\n    import requests\n",
    "if True:\n    from requests.auth import HTTPBasicAuth\n",
    "# import requests\n",
    "x = 'import requests'\n",
    'DOC = """\nimport requests\n"""\n',
    "def f():\n    '''\n    import requests\n    '''\n    return 1\n",
    "import requests2\n",
    "from requests2 import x\n",
    "from . import requests\n",
    "from .requests import x\n",
    "import requests.sessions\n",
    "s = \"it's\"\nimport requests\n",
    "import json  # not requests\n",
    "'''one liner''' \nimport requests\n",
]


def oracle_imports(text: str) -> list[tuple[int, str]]:
    """Reference extractor built on the Python grammar."""
    mods = []
    for node in ast.walk(ast.parse(text)):
        if isinstance(node, ast.Import):
            mods.extend((node.lineno, alias.name) for alias in node.names)
        elif isinstance(node, ast.ImportFrom) and node.level == 0 and node.module:
            mods.append((node.lineno, node.module))
    return sorted(mods)


def oracle_matching_lines(text: str, name: str) -> list[int]:
    return sorted(
        {
            lineno
            for lineno, module in oracle_imports(text)
            if module == name or module.startswith(name + ".")
        }
    )


def test_recognizer_agrees_with_grammar_oracle():
    for snippet in SNIPPETS:
        got = scanner.matching_import_lines(snippet, "requests")
        want = oracle_matching_lines(snippet, "requests")
        assert got == want, snippet


def test_plain_import_is_relevant(tmp_path):
    (tmp_path / "a.py").write_text("import requests\n")
    result = scanner.find_relevant_files(tmp_path, "requests")
    assert [f.path for f in result.files] == ["a.py"]
    assert result.files[0].import_lines == [1]


def test_unrelated_import_is_not_relevant(tmp_path):
    (tmp_path / "a.py").write_text("import os\n")
    assert scanner.find_relevant_files(tmp_path, "requests").files == []


def test_dotted_submodule_import_is_relevant(tmp_path):
    text = "from requests.adapters import HTTPAdapter\n"
    (tmp_path / "a.py").write_text(text)
    result = scanner.find_relevant_files(tmp_path, "requests")
    assert result.files and result.files[0].import_lines == oracle_matching_lines(
        text, "requests"
    )


def test_comment_and_string_mentions_are_immune(tmp_path):
    (tmp_path / "a.py").write_text("# import requests\nX = 'import requests'\n")
    (tmp_path / "b.py").write_text('"""\nimport requests\n"""\n')
    assert scanner.find_relevant_files(tmp_path, "requests").files == []


def test_scan_is_deterministic(tmp_path):
    for name in ("z.py", "a.py", "m.py"):
        (tmp_path / name).write_text("import requests\n")
    (tmp_path / "pkg").mkdir()
    (tmp_path / "pkg" / "inner.py").write_text("import requests.sessions\n")
    first = scanner.find_relevant_files(tmp_path, "requests")
    second = scanner.find_relevant_files(tmp_path, "requests")
    assert [f.path for f in first.files] == [f.path for f in second.files]
    assert [f.path for f in first.files] == sorted(f.path for f in first.files)


def test_exclude_globs_only_remove_files(tmp_path):
    (tmp_path / "keep.py").write_text("import requests\n")
    (tmp_path / "drop").mkdir()
    (tmp_path / "drop" / "gone.py").write_text("import requests\n")
    base = scanner.find_relevant_files(tmp_path, "requests")
    narrowed = scanner.find_relevant_files(tmp_path, "requests", excludes=["drop/*"])
    base_paths = {f.path for f in base.files}
    narrowed_paths = {f.path for f in narrowed.files}
    assert narrowed_paths <= base_paths
    assert "drop/gone.py" not in narrowed_paths


def test_default_excludes_skip_env_and_workdir(tmp_path):
    for d in (".venv", "venv", "build", ".migmate", ".git"):
        (tmp_path / d).mkdir()
        (tmp_path / d / "x.py").write_text("import requests\n")
    (tmp_path / "real.py").write_text("import requests\n")
    result = scanner.find_relevant_files(tmp_path, "requests")
    assert [f.path for f in result.files] == ["real.py"]


def test_unreadable_file_becomes_warning(tmp_path):
    (tmp_path / "bad.py").write_bytes(b"\xff\xfe\x00 import requests\n")
    (tmp_path / "ok.py").write_text("import requests\n")
    result = scanner.find_relevant_files(tmp_path, "requests")
    assert [f.path for f in result.files] == ["ok.py"]
    assert len(result.warnings) == 1 and "bad.py" in result.warnings[0]


def test_test_files_are_flagged(tmp_path):
    (tmp_path / "app.py").write_text("import requests\n")
    (tmp_path / "test_app.py").write_text("import requests\n")
    (tmp_path / "tests").mkdir()
    (tmp_path / "tests" / "helpers.py").write_text("import requests\n")
    result = scanner.find_relevant_files(tmp_path, "requests")
    flags = {f.path: f.is_test for f in result.files}
    assert flags == {"app.py": False, "test_app.py": True, "tests/helpers.py": True}


def test_content_is_pristine_snapshot(tmp_path):
    text = "import requests\nprint(requests)\n"
    (tmp_path / "a.py").write_text(text)
    result = scanner.find_relevant_files(tmp_path, "requests")
    assert result.files[0].content == text


def test_import_name_for_identity_override_and_normalization():
    assert scanner.import_name_for("requests", {}) == "requests"
    assert scanner.import_name_for("beautifulsoup4", {"beautifulsoup4": "bs4"}) == "bs4"
    assert scanner.import_name_for("typing-extensions", {}) == "typing_extensions"

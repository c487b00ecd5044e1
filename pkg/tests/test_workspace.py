from __future__ import annotations

import json
import os

import pytest

from codestrata.config import ConfigError, load_config
from codestrata.index import _atomic_write
from codestrata.query import QueryRequest
from codestrata.summarize import PromptTemplate, prompt_key
from codestrata.workspace import MissingArtifact, Workspace

from conftest import build_config


# --- config ------------------------------------------------------------------


def test_config_requires_core_fields(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"language": "toy"}))
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert "project_root" in str(excinfo.value)


def test_config_rejects_bad_enums(tmp_path):
    with pytest.raises(ConfigError):
        build_config(tmp_path, backend="magic")
    with pytest.raises(ConfigError):
        build_config(tmp_path, embed_backend="tfidf")
    with pytest.raises(ConfigError):
        build_config(tmp_path, workers=0)


def test_config_accepts_suffixed_embed_backend(tmp_path):
    config = build_config(tmp_path, embed_backend="hash-embed")
    assert config.embed_backend == "hash"


def test_config_rejects_duplicate_paths(tmp_path):
    with pytest.raises(ConfigError):
        build_config(
            tmp_path,
            paths={"graph": "same.json", "summaries": "same.json"},
        )


def test_config_relative_paths_resolve_against_config_dir(tmp_path):
    nested = tmp_path / "cfg"
    nested.mkdir()
    path = nested / "c.json"
    path.write_text(
        json.dumps({"project_root": "..", "language": "toy", "file_glob": "*.toy", "out_dir": "artifacts"})
    )
    config = load_config(path)
    assert config.project_root == tmp_path / "cfg" / ".."
    assert config.paths.graph == nested / "artifacts" / "graph.json"


def test_config_env_interpolation_for_endpoint_fields(tmp_path, monkeypatch):
    monkeypatch.setenv("LLM_URL_FOR_TEST", "http://llm.example/v1")
    config = build_config(tmp_path, llm={"base_url": "${LLM_URL_FOR_TEST}", "model": "m"})
    assert config.llm.base_url == "http://llm.example/v1"


def test_config_invalid_json_reports_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{broken")
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert "line 1" in str(excinfo.value)


# --- prerequisites ---------------------------------------------------------------


def test_missing_artifact_names_producing_command(tmp_path):
    workspace = Workspace(build_config(tmp_path))
    with pytest.raises(MissingArtifact) as excinfo:
        workspace.run_summarize()
    assert excinfo.value.producing_command == "index"
    assert "`index`" in str(excinfo.value)

    with pytest.raises(MissingArtifact) as excinfo:
        workspace.run_query(QueryRequest(text="x", collection="summary"))
    assert excinfo.value.producing_command == "embed"


def test_artifact_status_lists_everything(tmp_path):
    workspace = Workspace(build_config(tmp_path))
    status = {s.name: s for s in workspace.artifact_status()}
    assert set(status) == {
        "graph",
        "summaries",
        "modules",
        "code_index",
        "summary_index",
        "queries",
        "report_json",
        "report_txt",
    }
    assert not status["graph"].exists
    assert status["report_txt"].producing_command == "bench"


def test_index_requires_configured_language_server(tmp_path):
    workspace = Workspace(build_config(tmp_path))
    with pytest.raises(ConfigError):
        workspace.run_index()


def test_llm_backend_requires_base_url(tmp_path):
    workspace = Workspace(build_config(tmp_path))
    with pytest.raises(ConfigError):
        workspace.text_backend("llm")


def test_replay_backend_requires_path_then_loads(tmp_path):
    workspace = Workspace(build_config(tmp_path))
    with pytest.raises(ConfigError):
        workspace.text_backend("replay")

    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps({prompt_key("p"): "reply"}))
    workspace = Workspace(build_config(tmp_path, replay_path=str(replay)))
    assert workspace.text_backend("replay").generate("p") == "reply"


def test_prompt_template_loaded_from_config(tmp_path, mini_corpus_config):
    template_path = tmp_path / "prompt.txt"
    template_path.write_text(
        "Custom prompt.\nFunction: {function_name}\n\nSource code:\n```\n{function_code}\n```\n\n"
        "Called-function context:\n{child_context}\n\n{schema_instructions}\n"
    )
    config = mini_corpus_config
    config.prompt_template_path = template_path
    workspace = Workspace(config)
    workspace.run_index()
    outcome = workspace.run_summarize()
    assert outcome.summaries == 22
    # the custom wording must have reached the backend output record
    line = config.paths.summaries.read_text().splitlines()[0]
    assert json.loads(line)["raw_backend_output"].startswith("```json")


def test_embed_backend_selection(tmp_path):
    workspace = Workspace(build_config(tmp_path, dimension=16))
    assert workspace.embed_backend("hash").dimension == 16
    with pytest.raises(ConfigError):
        workspace.embed_backend("http")  # no base_url configured


# --- atomic writes -----------------------------------------------------------------


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "artifact.json"
    _atomic_write(target, b"one")
    _atomic_write(target, b"two")
    assert target.read_bytes() == b"two"
    leftovers = [p for p in tmp_path.iterdir() if p.name != "artifact.json"]
    assert leftovers == []


def test_atomic_write_failure_leaves_target_untouched(tmp_path, monkeypatch):
    target = tmp_path / "artifact.json"
    _atomic_write(target, b"stable")

    real_replace = os.replace

    def exploding_replace(src, dst):
        raise OSError("disk on fire")

    monkeypatch.setattr(os, "replace", exploding_replace)
    with pytest.raises(OSError):
        _atomic_write(target, b"partial")
    monkeypatch.setattr(os, "replace", real_replace)

    assert target.read_bytes() == b"stable"
    leftovers = [p for p in tmp_path.iterdir() if p.name != "artifact.json"]
    assert leftovers == []


def test_template_load_validates_placeholders(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("no placeholders at all")
    from codestrata.summarize import TemplateError

    with pytest.raises(TemplateError):
        PromptTemplate.load(path)

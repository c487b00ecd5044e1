"""Run configuration: one JSON file wires the whole pipeline.

Relative paths resolve against the config file's directory. Secrets are
never stored: the LLM auth token is referenced by environment variable
name, and "${VAR}" strings inside the endpoint sections are substituted
from the environment at load time.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .lsp.client import LspServerConfig

TEXT_BACKENDS = ("llm", "extractive", "replay")
EMBED_BACKENDS = ("hash", "http")

_ENV_REF = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")


class ConfigError(Exception):
    pass


@dataclass
class LlmEndpointConfig:
    base_url: str = ""
    model: str = ""
    auth_token_env: str = "HCGS_LLM_TOKEN"
    timeout: float = 30.0
    max_tokens: int = 1024


@dataclass
class EmbedEndpointConfig:
    base_url: str = ""
    timeout: float = 30.0


@dataclass
class ArtifactPaths:
    graph: Path
    summaries: Path
    modules: Path
    code_index: Path
    summary_index: Path
    queries: Path
    report_json: Path
    report_txt: Path

    @classmethod
    def under(cls, out_dir: Path) -> "ArtifactPaths":
        return cls(
            graph=out_dir / "graph.json",
            summaries=out_dir / "summaries.jsonl",
            modules=out_dir / "modules.jsonl",
            code_index=out_dir / "code.idx",
            summary_index=out_dir / "summary.idx",
            queries=out_dir / "queries.jsonl",
            report_json=out_dir / "report.json",
            report_txt=out_dir / "report.txt",
        )

    def as_dict(self) -> dict[str, Path]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RunConfig:
    project_root: Path
    language: str
    file_glob: str
    paths: ArtifactPaths
    language_servers: dict[str, LspServerConfig] = field(default_factory=dict)
    backend: str = "extractive"
    embed_backend: str = "hash"
    workers: int = 4
    dimension: int = 384
    llm: LlmEndpointConfig = field(default_factory=LlmEndpointConfig)
    embed_http: EmbedEndpointConfig = field(default_factory=EmbedEndpointConfig)
    replay_path: Path | None = None
    prompt_template_path: Path | None = None
    per_function_queries: int = 1
    ks: tuple[int, ...] = (1, 3, 5, 10)

    def validate(self) -> None:
        if self.backend not in TEXT_BACKENDS:
            raise ConfigError(f"backend must be one of {TEXT_BACKENDS}, got {self.backend!r}")
        if self.embed_backend not in EMBED_BACKENDS:
            raise ConfigError(
                f"embed_backend must be one of {EMBED_BACKENDS}, got {self.embed_backend!r}"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.per_function_queries < 1:
            raise ConfigError("per_function_queries must be >= 1")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("ks must be positive integers")
        path_values = list(self.paths.as_dict().values())
        if len({p.resolve() for p in path_values}) != len(path_values):
            raise ConfigError("artifact paths must be distinct")


def normalize_embed_backend(value: str) -> str:
    """Accept both the flag vocabulary (hash, http) and the suffixed
    config vocabulary (hash-embed, http-embed)."""
    return value.removesuffix("-embed")


def _interpolate_env(value):
    if isinstance(value, str):
        match = _ENV_REF.match(value)
        if match:
            return os.environ.get(match.group(1), "")
        return value
    if isinstance(value, dict):
        return {k: _interpolate_env(v) for k, v in value.items()}
    return value


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(payload, base_dir=path.parent)


def config_from_dict(payload: dict, base_dir: Path) -> RunConfig:
    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base_dir / candidate)

    try:
        project_root = resolve(payload["project_root"])
        language = payload["language"]
        file_glob = payload["file_glob"]
    except KeyError as exc:
        raise ConfigError(f"config is missing required field {exc.args[0]!r}") from exc

    out_dir = resolve(payload.get("out_dir", "out"))
    paths = ArtifactPaths.under(out_dir)
    for key, value in payload.get("paths", {}).items():
        if not hasattr(paths, key):
            raise ConfigError(f"unknown artifact path {key!r}")
        setattr(paths, key, resolve(value))

    servers: dict[str, LspServerConfig] = {}
    for tag, raw in payload.get("language_servers", {}).items():
        if not isinstance(raw, dict) or not raw.get("launch_command"):
            raise ConfigError(f"language server {tag!r} needs a launch_command")
        servers[tag] = LspServerConfig(
            language=raw.get("language", tag),
            launch_command=list(raw["launch_command"]),
            root_path=resolve(raw["root_path"]) if "root_path" in raw else project_root,
            initialization_options=raw.get("initialization_options", {}),
            request_timeout=float(raw.get("request_timeout", 30.0)),
        )

    llm_raw = _interpolate_env(payload.get("llm", {}))
    embed_raw = _interpolate_env(payload.get("embed_http", {}))

    config = RunConfig(
        project_root=project_root,
        language=language,
        file_glob=file_glob,
        paths=paths,
        language_servers=servers,
        backend=payload.get("backend", "extractive"),
        embed_backend=normalize_embed_backend(payload.get("embed_backend", "hash")),
        workers=int(payload.get("workers", 4)),
        dimension=int(payload.get("dimension", 384)),
        llm=LlmEndpointConfig(
            base_url=llm_raw.get("base_url", ""),
            model=llm_raw.get("model", ""),
            auth_token_env=llm_raw.get("auth_token_env", "HCGS_LLM_TOKEN"),
            timeout=float(llm_raw.get("timeout", 30.0)),
            max_tokens=int(llm_raw.get("max_tokens", 1024)),
        ),
        embed_http=EmbedEndpointConfig(
            base_url=embed_raw.get("base_url", ""),
            timeout=float(embed_raw.get("timeout", 30.0)),
        ),
        replay_path=resolve(payload["replay_path"]) if "replay_path" in payload else None,
        prompt_template_path=(
            resolve(payload["prompt_template_path"]) if "prompt_template_path" in payload else None
        ),
        per_function_queries=int(payload.get("per_function_queries", 1)),
        ks=tuple(payload.get("ks", (1, 3, 5, 10))),
    )
    config.validate()
    return config

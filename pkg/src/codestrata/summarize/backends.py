"""Text generation backends behind one generate(prompt) -> text contract.

Three implementations cover the pipeline's needs: an HTTP client for a
real model endpoint, a replay backend serving canned responses by
prompt hash, and a fully deterministic extractive backend that derives
its output from the prompt text alone so runs are reproducible offline
and tests can reimplement it as an oracle.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Mapping, Protocol

from ..backends import BackendUnavailable, post_json


class TextBackend(Protocol):
    single_flight: bool

    def generate(self, prompt: str) -> str: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_FUNCTION_LINE = re.compile(r"^Function: (.+?) in (.+)$", re.MULTILINE)
_CODE_BLOCK = re.compile(r"\nSource code:\n```\n(.*?)\n```\n", re.DOTALL)
_MODULE_LINE = re.compile(r"^Module: (.+)$", re.MULTILINE)
_PURPOSE_LINE = re.compile(r"^Purpose: (.*)$", re.MULTILINE)
_DETAILS_LINE = re.compile(r"^Details: (.*)$", re.MULTILINE)

_DOC_PREFIXES = ("##", "///", "//!", "--")


def _doc_comment_line(code: str) -> str | None:
    for line in code.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        for prefix in _DOC_PREFIXES:
            if stripped.startswith(prefix):
                text = stripped[len(prefix):].strip()
                return text or None
        return None
    return None


def _child_entries(prompt: str) -> list[tuple[str, str]]:
    """(name, role) pairs from the called-function context section."""
    marker = "Called-function context:\n"
    start = prompt.find(marker)
    if start < 0:
        return []
    entries = []
    for line in prompt[start + len(marker):].splitlines():
        if not line.startswith("- "):
            break
        body = line[2:]
        name, _, rest = body.partition(": ")
        role = rest.split(" | ", 1)[0]
        entries.append((name, role))
    return entries


def _fenced(payload: dict) -> str:
    return "```json\n" + json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n```"


def _first_words(text: str, limit: int = 10) -> str:
    return " ".join(text.split()[:limit])


class ExtractiveBackend:
    """Deterministic offline backend.

    Dispatches on the markers this package's prompt builders emit and
    derives every field from the prompt text:

    * function prompts: purpose is the code's leading doc-comment line
      (prefixes ##, ///, //!, --) or "Function <name> in <file>";
      details report the file, line count, and called names; the
      dependency list mirrors the child-context lines. Parameters are
      not inferred.
    * module prompts: overview is "Contains N functions: a, b."
    * condense prompts: echoes the purpose line.
    * query prompts: the first 10 words of the purpose, then of the
      details, one per line.
    """

    single_flight = False

    def generate(self, prompt: str) -> str:
        if prompt.startswith("Condense the following structured summary"):
            return self._condense(prompt)
        if "short search queries" in prompt:
            return self._queries(prompt)
        module = _MODULE_LINE.search(prompt)
        if module and "Source code:" not in prompt:
            return self._module(prompt)
        return self._function(prompt)

    def _function(self, prompt: str) -> str:
        header = _FUNCTION_LINE.search(prompt)
        code_match = _CODE_BLOCK.search(prompt)
        if not header or not code_match:
            raise ValueError("prompt does not look like a function summarization prompt")
        name, file_path = header.group(1), header.group(2)
        code = code_match.group(1)
        children = _child_entries(prompt)

        doc = _doc_comment_line(code)
        purpose = doc if doc else f"Function {name} in {file_path}"
        called = ", ".join(n for n, _ in children) if children else "no tracked functions"
        details = f"Defined in {file_path}; spans {len(code.splitlines())} lines; calls {called}."
        return _fenced(
            {
                "purpose": purpose,
                "details": details,
                "inputs": [],
                "outputs": "unspecified",
                "side_effects": "none",
                "dependencies": [{"name": n, "role": r} for n, r in children],
            }
        )

    def _module(self, prompt: str) -> str:
        file_path = _MODULE_LINE.search(prompt).group(1)
        names = [line[2:].partition(":")[0] for line in prompt.splitlines() if line.startswith("- ")]
        listed = ", ".join(names)
        overview = f"Contains {len(names)} functions: {listed}." if names else "Contains no functions."
        return _fenced({"overview": f"Module {file_path}. {overview}"})

    def _condense(self, prompt: str) -> str:
        purpose = _PURPOSE_LINE.search(prompt)
        return purpose.group(1) if purpose else ""

    def _queries(self, prompt: str) -> str:
        purpose = _PURPOSE_LINE.search(prompt)
        details = _DETAILS_LINE.search(prompt)
        lines = []
        if purpose and purpose.group(1).strip():
            lines.append(_first_words(purpose.group(1)))
        if details and details.group(1).strip():
            lines.append(_first_words(details.group(1)))
        return "\n".join(lines)


class ReplayBackend:
    """Serves canned responses keyed by sha256(prompt)."""

    single_flight = False

    def __init__(self, responses: Mapping[str, str]):
        self._responses = dict(responses)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        with open(path, encoding="utf-8") as handle:
            return cls(json.load(handle))

    def generate(self, prompt: str) -> str:
        key = prompt_key(prompt)
        if key not in self._responses:
            raise BackendUnavailable(f"no recorded response for prompt hash {key[:12]}")
        return self._responses[key]


class HttpTextBackend:
    """Client for a text generation endpoint.

    Posts {"model", "prompt", "max_tokens"} and reads the "text" field
    of the JSON reply. The auth token is read from the configured
    environment variable at call time and never persisted.
    """

    single_flight = False

    def __init__(
        self,
        base_url: str,
        model: str,
        auth_token_env: str = "HCGS_LLM_TOKEN",
        timeout: float = 30.0,
        max_tokens: int = 1024,
        retries: int = 3,
        retry_base_delay: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.auth_token_env = auth_token_env
        self.timeout = timeout
        self.max_tokens = max_tokens
        self.retries = retries
        self.retry_base_delay = retry_base_delay

    def generate(self, prompt: str) -> str:
        headers = {}
        token = os.environ.get(self.auth_token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = post_json(
            self.base_url,
            {"model": self.model, "prompt": prompt, "max_tokens": self.max_tokens},
            headers=headers,
            timeout=self.timeout,
            retries=self.retries,
            retry_base_delay=self.retry_base_delay,
        )
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendUnavailable(f"{self.base_url}: response carries no 'text' field")
        return text

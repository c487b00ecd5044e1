"""Structured summary records, backend output parsing, prompt templates."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

SCHEMA_INSTRUCTIONS = """Reply with a single fenced JSON object using exactly these keys:
  purpose        one sentence stating what the code element does
  details        a short paragraph covering implementation and behavior
  inputs         list of {"name": ..., "description": ...} for each parameter
  outputs        one line describing the produced value
  side_effects   one line, or "none"
  dependencies   list of {"name": ..., "role": ...} for each called function
Format:
```json
{"purpose": "...", "details": "...", "inputs": [], "outputs": "...", "side_effects": "none", "dependencies": []}
```"""

DEFAULT_TEMPLATE_TEXT = """You are a careful code analyst. Summarize the code element below for a search index. Use the called-function context to describe behavior that flows in from its dependencies.

Function: {function_name}

Source code:
```
{function_code}
```

Called-function context:
{child_context}

{schema_instructions}
"""

PLACEHOLDERS = (
    "{function_name}",
    "{function_code}",
    "{child_context}",
    "{schema_instructions}",
)

NO_CHILD_CONTEXT = "No called-function context available."
CYCLE_PLACEHOLDER = "[cycle: summary unavailable]"

_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


class TemplateError(Exception):
    pass


class SummaryParseError(Exception):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    """Template with the four placeholders, each required exactly once."""

    text: str

    def __post_init__(self):
        for placeholder in PLACEHOLDERS:
            count = self.text.count(placeholder)
            if count != 1:
                raise TemplateError(
                    f"template must contain {placeholder} exactly once (found {count})"
                )

    @classmethod
    def load(cls, path) -> "PromptTemplate":
        with open(path, encoding="utf-8") as handle:
            return cls(handle.read())

    def render(
        self,
        *,
        function_name: str,
        function_code: str,
        child_context: str,
        schema_instructions: str = SCHEMA_INSTRUCTIONS,
    ) -> str:
        # sequential replace instead of str.format so braces inside the
        # substituted values (JSON examples, code) never need escaping
        out = self.text
        out = out.replace("{function_name}", function_name)
        out = out.replace("{function_code}", function_code)
        out = out.replace("{child_context}", child_context)
        out = out.replace("{schema_instructions}", schema_instructions)
        return out


DEFAULT_TEMPLATE = PromptTemplate(DEFAULT_TEMPLATE_TEXT)


@dataclass
class StructuredSummary:
    """One summary record per graph node, as persisted to the store."""

    node_id: str
    name: str
    kind: str
    purpose: str
    details: str = ""
    inputs: list[dict[str, str]] = field(default_factory=list)
    outputs: str = ""
    side_effects: str = "none"
    dependencies: list[dict[str, str]] = field(default_factory=list)
    raw_backend_output: str = ""

    def to_json_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "name": self.name,
            "kind": self.kind,
            "purpose": self.purpose,
            "details": self.details,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "side_effects": self.side_effects,
            "dependencies": self.dependencies,
            "raw_backend_output": self.raw_backend_output,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "StructuredSummary":
        return cls(
            node_id=payload["node_id"],
            name=payload["name"],
            kind=payload["kind"],
            purpose=payload["purpose"],
            details=payload.get("details", ""),
            inputs=payload.get("inputs", []),
            outputs=payload.get("outputs", ""),
            side_effects=payload.get("side_effects", "none"),
            dependencies=payload.get("dependencies", []),
            raw_backend_output=payload.get("raw_backend_output", ""),
        )


@dataclass
class ModuleSummary:
    """File-level overview aggregated from that file's function summaries."""

    module_id: str
    overview: str
    function_index: list[dict[str, str]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "module_id": self.module_id,
            "overview": self.overview,
            "function_index": self.function_index,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ModuleSummary":
        return cls(
            module_id=payload["module_id"],
            overview=payload["overview"],
            function_index=payload.get("function_index", []),
        )


def _extract_json_object(text: str) -> dict:
    match = _FENCE.search(text)
    candidate = match.group(1) if match else text
    try:
        payload = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise SummaryParseError(f"backend output is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SummaryParseError("backend output is not a JSON object")
    return payload


def _string_pairs(value, key_a: str, key_b: str) -> list[dict[str, str]]:
    if not isinstance(value, list):
        raise SummaryParseError(f"expected a list of objects with {key_a!r}/{key_b!r}")
    out = []
    for item in value:
        if not isinstance(item, dict) or key_a not in item:
            raise SummaryParseError(f"list entries must be objects with a {key_a!r} field")
        out.append({key_a: str(item[key_a]), key_b: str(item.get(key_b, ""))})
    return out


def parse_backend_output(text: str) -> dict:
    """Parse a backend reply into summary fields.

    Accepts a fenced JSON block or a bare JSON object. Raises
    SummaryParseError when the reply cannot be coerced; the caller
    decides whether to retry or degrade.
    """
    payload = _extract_json_object(text)
    purpose = payload.get("purpose")
    if not isinstance(purpose, str) or not purpose.strip():
        raise SummaryParseError("summary must carry a non-empty 'purpose'")
    return {
        "purpose": purpose.strip(),
        "details": str(payload.get("details", "")),
        "inputs": _string_pairs(payload.get("inputs", []), "name", "description"),
        "outputs": str(payload.get("outputs", "")),
        "side_effects": str(payload.get("side_effects", "none")),
        "dependencies": _string_pairs(payload.get("dependencies", []), "name", "role"),
    }


def parse_module_output(text: str) -> str:
    """Extract the overview paragraph from a module-summary reply."""
    payload = _extract_json_object(text)
    overview = payload.get("overview")
    if not isinstance(overview, str) or not overview.strip():
        raise SummaryParseError("module summary must carry a non-empty 'overview'")
    return overview.strip()

from .backends import ExtractiveBackend, HttpTextBackend, ReplayBackend, TextBackend, prompt_key
from .pipeline import (
    MODULE_MEMBER_KINDS,
    CacheMiss,
    SummaryStore,
    process_levels,
    render_prompt,
    summarize_modules,
    summarize_node,
)
from .schema import (
    CYCLE_PLACEHOLDER,
    DEFAULT_TEMPLATE,
    DEFAULT_TEMPLATE_TEXT,
    NO_CHILD_CONTEXT,
    SCHEMA_INSTRUCTIONS,
    ModuleSummary,
    PromptTemplate,
    StructuredSummary,
    SummaryParseError,
    TemplateError,
    parse_backend_output,
    parse_module_output,
)

__all__ = [
    "CYCLE_PLACEHOLDER",
    "DEFAULT_TEMPLATE",
    "DEFAULT_TEMPLATE_TEXT",
    "MODULE_MEMBER_KINDS",
    "NO_CHILD_CONTEXT",
    "SCHEMA_INSTRUCTIONS",
    "CacheMiss",
    "ExtractiveBackend",
    "HttpTextBackend",
    "ModuleSummary",
    "PromptTemplate",
    "ReplayBackend",
    "StructuredSummary",
    "SummaryParseError",
    "SummaryStore",
    "TemplateError",
    "TextBackend",
    "parse_backend_output",
    "parse_module_output",
    "process_levels",
    "prompt_key",
    "render_prompt",
    "summarize_modules",
    "summarize_node",
]

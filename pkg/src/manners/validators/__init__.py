"""Validator kinds: the pluggable active parts of rules.

Importing this package registers the built-in kinds:

* ``regex-filter`` — flag or redact matched strings (redact capability)
* ``structure`` — selector-count assertions against a common shape
* ``template-conformance`` — divergence from an editing-holes template
* ``code-style`` — line length / tabs / trailing whitespace / indent unit
* ``code-syntax`` — builtin delimiter balance or an external checker
* ``external-checker`` — allow-listed subprocess over the snippet
"""

from .base import (
    Annotation,
    Severity,
    TextMap,
    ValidationContext,
    ValidatorKind,
    get_kind,
    register,
    registered_kinds,
    text_nodes_under,
)
from . import code_style, code_syntax, external, regex_filter, structure, template  # noqa: F401

__all__ = [
    "Annotation",
    "Severity",
    "TextMap",
    "ValidationContext",
    "ValidatorKind",
    "get_kind",
    "register",
    "registered_kinds",
    "text_nodes_under",
]

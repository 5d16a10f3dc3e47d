"""Content filter: flag or redact every offending string, not the page.

One annotation per leftmost non-overlapping match of the pattern within
each text node under the matched nodes, anchored to the exact characters.
In redact mode the delivered view masks just those characters; the origin
copy is never touched.
"""

from __future__ import annotations

from typing import Mapping

from ..doctree import Node, TextRange
from ..errors import SchemaError
from ..regexes import compile_rule_regex
from .base import (
    Annotation,
    ValidationContext,
    ValidatorKind,
    check_params,
    register,
    text_nodes_under,
)

KIND_ID = "regex-filter"


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(
        KIND_ID,
        params,
        required={"pattern": str, "message": str},
        optional={"mode": str, "mask": str, "fix_hint": str},
    )
    params["_pattern"] = compile_rule_regex(params["pattern"])
    mode = params.setdefault("mode", "annotate")
    if mode not in ("annotate", "redact"):
        raise SchemaError(f"{KIND_ID}: mode must be 'annotate' or 'redact', got {mode!r}")
    mask = params.setdefault("mask", "*")
    if len(mask) != 1:
        raise SchemaError(f"{KIND_ID}: mask must be a single character, got {mask!r}")
    return params


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    pattern = params.get("_pattern") or compile_rule_regex(params["pattern"])
    redact = params["mode"] == "redact"
    annotations: list[Annotation] = []
    for text_node in text_nodes_under(ctx.tree, matched):
        for m in pattern.finditer(text_node.text):
            if m.start() == m.end():
                continue  # zero-width matches have nothing to anchor
            annotations.append(ctx.annotation(
                params["message"],
                anchor=TextRange(text_node.path, m.start(), m.end()),
                action="redact" if redact else "annotate",
                mask=params["mask"] if redact else None,
                fix_hint=params.get("fix_hint"),
            ))
    return annotations


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset({"redact"}),
    validate_params=validate_params,
    run=run,
))

"""Coding-guideline checks on code-bearing elements: line length, tabs,
trailing whitespace, indentation unit.

Lines are analyzed per text node (the usual ``<pre>``/``<code>`` block is
a single text node), one annotation per violated check per line, anchored
to the offending characters.
"""

from __future__ import annotations

from typing import Mapping

from ..doctree import Node, TextRange
from ..errors import SchemaError
from .base import (
    Annotation,
    ValidationContext,
    ValidatorKind,
    check_params,
    register,
    text_nodes_under,
)

KIND_ID = "code-style"

_CHECK_KEYS = ("max_line_length", "indent_unit", "forbid_tabs", "forbid_trailing_ws")


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(
        KIND_ID,
        params,
        required={},
        optional={
            "max_line_length": int,
            "indent_unit": int,
            "forbid_tabs": bool,
            "forbid_trailing_ws": bool,
        },
    )
    if not any(params.get(k) for k in _CHECK_KEYS):
        raise SchemaError(f"{KIND_ID}: configure at least one of {list(_CHECK_KEYS)}")
    for key in ("max_line_length", "indent_unit"):
        if key in params and params[key] < 1:
            raise SchemaError(f"{KIND_ID}: {key} must be >= 1")
    return params


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    annotations: list[Annotation] = []
    for text_node in text_nodes_under(ctx.tree, matched):
        line_start = 0
        for line in text_node.text.split("\n"):
            annotations.extend(_check_line(ctx, text_node, line, line_start, params))
            line_start += len(line) + 1
    return annotations


def _check_line(ctx: ValidationContext, node: Node, line: str, start: int,
                params: dict) -> list[Annotation]:
    out: list[Annotation] = []

    def anchored(message: str, lo: int, hi: int) -> Annotation:
        return ctx.annotation(message, anchor=TextRange(node.path, start + lo, start + hi))

    limit = params.get("max_line_length")
    if limit is not None and len(line) > limit:
        out.append(anchored(
            f"line exceeds {limit} characters ({len(line)})", limit, len(line)))

    if params.get("forbid_tabs"):
        tab = line.find("\t")
        if tab >= 0:
            out.append(anchored("tab character is not allowed", tab, tab + 1))

    if params.get("forbid_trailing_ws") and line and line[-1] in (" ", "\t"):
        stripped = len(line.rstrip(" \t"))
        out.append(anchored("trailing whitespace", stripped, len(line)))

    unit = params.get("indent_unit")
    if unit is not None and line.strip():
        indent = len(line) - len(line.lstrip(" "))
        # tab-indented lines are left to forbid_tabs; unit applies to spaces
        if "\t" not in line[:indent] and indent % unit != 0:
            out.append(anchored(
                f"indentation of {indent} is not a multiple of {unit}", 0, indent))

    return out


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset(),
    validate_params=validate_params,
    run=run,
))

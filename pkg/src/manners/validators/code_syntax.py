"""Snippet syntax verification: balanced delimiters, or a real checker.

The builtin checker lexes the snippet — skipping string literals and
comments per the lexical config — and verifies (), [], {} nesting with a
stack.  It reports at most one finding per snippet: the first mismatched
or unclosed bracket, or the opener of an unterminated string/comment.

``checker: external`` routes the snippet through the allow-listed
subprocess contract instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from ..doctree import Node
from ..errors import SchemaError
from .base import (
    Annotation,
    TextMap,
    ValidationContext,
    ValidatorKind,
    check_params,
    register,
)
from .external import run_external_checker, validate_checker_params

KIND_ID = "code-syntax"

OPENERS = {"(": ")", "[": "]", "{": "}"}
CLOSERS = {")": "(", "]": "[", "}": "{"}

DEFAULT_LEXICAL = {
    "string_delims": ['"', "'"],
    "comment_markers": {"line": ["//", "#"], "block": [["/*", "*/"]]},
}


@dataclass(frozen=True)
class Lexical:
    string_delims: tuple[str, ...]
    line_comments: tuple[str, ...]
    block_comments: tuple[tuple[str, str], ...]
    # characters that can start a token the scanner must handle
    interesting: frozenset[str] = frozenset()


def _parse_lexical(raw: dict) -> Lexical:
    delims = raw.get("string_delims", DEFAULT_LEXICAL["string_delims"])
    if not isinstance(delims, list) or any(not isinstance(d, str) or len(d) != 1 for d in delims):
        raise SchemaError(f"{KIND_ID}: lexical.string_delims must be single-character strings")
    markers = raw.get("comment_markers", DEFAULT_LEXICAL["comment_markers"])
    if not isinstance(markers, dict) or set(markers) - {"line", "block"}:
        raise SchemaError(f"{KIND_ID}: lexical.comment_markers allows keys 'line' and 'block'")
    line = markers.get("line", [])
    if not isinstance(line, list) or any(not isinstance(m, str) or not m for m in line):
        raise SchemaError(f"{KIND_ID}: lexical.comment_markers.line must be non-empty strings")
    block = markers.get("block", [])
    if (not isinstance(block, list)
            or any(not isinstance(p, list) or len(p) != 2
                   or any(not isinstance(m, str) or not m for m in p) for p in block)):
        raise SchemaError(f"{KIND_ID}: lexical.comment_markers.block must be [open, close] pairs")
    chars = set("()[]{}") | set(delims)
    chars.update(m[0] for m in line)
    chars.update(p[0][0] for p in block)
    return Lexical(
        string_delims=tuple(delims),
        line_comments=tuple(sorted(line, key=len, reverse=True)),
        block_comments=tuple(sorted((tuple(p) for p in block), key=lambda p: len(p[0]), reverse=True)),
        interesting=frozenset(chars),
    )


@dataclass(frozen=True)
class BalanceProblem:
    offset: int
    message: str


def scan_balance(snippet: str, lexical: Lexical) -> Optional[BalanceProblem]:
    """First delimiter problem in the snippet, or None when balanced.

    Scan order at each position: block comments, line comments, strings,
    then brackets.  Strings honor backslash escapes.
    """
    stack: list[tuple[str, int]] = []
    i = 0
    n = len(snippet)
    interesting = lexical.interesting
    while i < n:
        ch = snippet[i]
        if ch not in interesting:
            i += 1
            continue
        advanced = False
        for opener, closer in lexical.block_comments:
            if snippet.startswith(opener, i):
                end = snippet.find(closer, i + len(opener))
                if end < 0:
                    return BalanceProblem(i, f"unterminated comment ({opener!r})")
                i = end + len(closer)
                advanced = True
                break
        if advanced:
            continue
        for marker in lexical.line_comments:
            if snippet.startswith(marker, i):
                nl = snippet.find("\n", i)
                i = n if nl < 0 else nl + 1
                advanced = True
                break
        if advanced:
            continue
        if ch in lexical.string_delims:
            j = i + 1
            while j < n:
                if snippet[j] == "\\":
                    j += 2
                    continue
                if snippet[j] == ch:
                    break
                j += 1
            if j >= n:
                return BalanceProblem(i, f"unterminated string ({ch!r})")
            i = j + 1
            continue
        if ch in OPENERS:
            stack.append((ch, i))
        elif ch in CLOSERS:
            if not stack:
                return BalanceProblem(i, f"unmatched {ch!r}")
            opener, _ = stack.pop()
            if OPENERS[opener] != ch:
                return BalanceProblem(
                    i, f"mismatched {ch!r}: expected {OPENERS[opener]!r}")
        i += 1
    if stack:
        opener, offset = stack[0]
        return BalanceProblem(offset, f"unclosed {opener!r}")
    return None


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(
        KIND_ID,
        params,
        required={"checker": str},
        optional={"lexical": dict, "command_id": str, "timeout_ms": int},
    )
    checker = params["checker"]
    if checker == "builtin-balance":
        params["_lexical"] = _parse_lexical(params.get("lexical", {}))
        if "command_id" in params or "timeout_ms" in params:
            raise SchemaError(f"{KIND_ID}: command_id/timeout_ms only apply to checker 'external'")
    elif checker == "external":
        validate_checker_params(KIND_ID, params, allowlist)
    else:
        raise SchemaError(
            f"{KIND_ID}: checker must be 'builtin-balance' or 'external', got {checker!r}")
    return params


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    annotations: list[Annotation] = []
    external = params["checker"] == "external"
    lexical = None
    if not external:
        lexical = params.get("_lexical") or _parse_lexical(params.get("lexical", {}))
    for node in matched:
        textmap = TextMap(ctx.tree, node)
        if external:
            annotations.extend(run_external_checker(ctx, textmap.text, textmap, params))
            continue
        problem = scan_balance(textmap.text, lexical)
        if problem is not None:
            annotations.append(ctx.annotation(
                problem.message,
                anchor=textmap.anchor(problem.offset, problem.offset + 1),
            ))
    return annotations


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset({"external"}),
    validate_params=validate_params,
    run=run,
))

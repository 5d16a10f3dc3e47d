"""Pinned regular-expression dialect for rule files.

Rules come from shared repositories and are untrusted input, so the
backtracking hazards worth worrying about are rejected at parse time
rather than trusted to never occur.

Allowed: literals, character classes, ``.``, anchors, alternation,
greedy/lazy/possessive-free quantifiers (``* + ? {m,n}``), groups
(capturing, non-capturing, named), lookahead/lookbehind, inline flags,
and the usual escapes (``\\d \\w \\s \\b`` ...).

Rejected (compile-time error): numeric backreferences (``\\1`` ... ``\\99``),
named backreferences (``(?P=name)``), and conditional groups (``(?(id)``...).
"""

from __future__ import annotations

import re

from .errors import RuleSyntaxError


def _find_backreference(pattern: str) -> str | None:
    """Return a description of the first banned construct, or None."""
    i = 0
    in_class = False
    n = len(pattern)
    while i < n:
        ch = pattern[i]
        if ch == "\\":
            nxt = pattern[i + 1] if i + 1 < n else ""
            if nxt.isdigit() and nxt != "0":
                return f"backreference \\{nxt}"
            i += 2
            continue
        if in_class:
            if ch == "]":
                in_class = False
            i += 1
            continue
        if ch == "[":
            in_class = True
            i += 1
            continue
        if ch == "(" and pattern.startswith("(?P=", i):
            return "named backreference (?P=...)"
        if ch == "(" and pattern.startswith("(?(", i):
            return "conditional group (?(...)"
        i += 1
    return None


def compile_rule_regex(pattern: str, flags: int = 0) -> re.Pattern:
    """Compile a pattern under the pinned dialect; RuleSyntaxError otherwise."""
    if not isinstance(pattern, str):
        raise RuleSyntaxError(f"pattern must be a string, got {type(pattern).__name__}")
    banned = _find_backreference(pattern)
    if banned:
        raise RuleSyntaxError(f"pattern {pattern!r} uses {banned}, outside the supported dialect")
    try:
        return re.compile(pattern, flags)
    except re.error as exc:
        raise RuleSyntaxError(f"invalid pattern {pattern!r}: {exc}") from None

"""Template conformance: instances may fill the editing holes, nothing else.

A template is an alternating sequence of literal segments and named holes
(``{{{name}}}`` by default).  The subject conforms when it can be written
as literal0 . hole1 . literal1 . ... . holeN . literalN for some hole
contents: the first literal anchors at the start, the last at the end, and
each interior literal is matched at its leftmost occurrence after the
previous one.  Any edit outside a hole breaks one of those matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from ..doctree import Node
from ..errors import SchemaError, TemplateFetchError, TemplateParseError
from ..selector import evaluate, parse_selector
from .base import (
    Annotation,
    Severity,
    TextMap,
    ValidationContext,
    ValidatorKind,
    check_params,
    register,
)

KIND_ID = "template-conformance"

DEFAULT_HOLE_OPEN = "{{{"
DEFAULT_HOLE_CLOSE = "}}}"


@dataclass(frozen=True)
class Template:
    """Parsed template: len(literals) == len(holes) + 1, in alternation."""

    literals: tuple[str, ...]
    holes: tuple[str, ...]


def parse_template(source: str, hole_open: str = DEFAULT_HOLE_OPEN,
                   hole_close: str = DEFAULT_HOLE_CLOSE) -> Template:
    """Split template text into literals and hole names.

    Raises TemplateParseError on a stray closer, an unclosed hole, or a
    nested opener inside a hole.
    """
    literals: list[str] = []
    holes: list[str] = []
    pos = 0
    while True:
        open_at = source.find(hole_open, pos)
        close_at = source.find(hole_close, pos)
        if open_at < 0:
            if close_at >= 0:
                raise TemplateParseError(
                    f"stray hole closer at offset {close_at} (no matching {hole_open!r})"
                )
            literals.append(source[pos:])
            return Template(tuple(literals), tuple(holes))
        if 0 <= close_at < open_at:
            raise TemplateParseError(
                f"stray hole closer at offset {close_at} (no matching {hole_open!r})"
            )
        literals.append(source[pos:open_at])
        name_start = open_at + len(hole_open)
        end = source.find(hole_close, name_start)
        if end < 0:
            raise TemplateParseError(f"unclosed hole opened at offset {open_at}")
        inner_open = source.find(hole_open, name_start)
        if 0 <= inner_open < end:
            raise TemplateParseError(f"nested hole opener at offset {inner_open}")
        holes.append(source[name_start:end])
        pos = end + len(hole_close)


@dataclass(frozen=True)
class Mismatch:
    offset: int
    expected: str


def match_template(template: Template, subject: str) -> Optional[Mismatch]:
    """None when the subject conforms, else where matching first failed."""
    literals = template.literals
    if len(literals) == 1:
        return None if subject == literals[0] else Mismatch(0, literals[0])
    first = literals[0]
    if not subject.startswith(first):
        return Mismatch(0, first)
    pos = len(first)
    for lit in literals[1:-1]:
        found = subject.find(lit, pos)
        if found < 0:
            return Mismatch(pos, lit)
        pos = found + len(lit)
    last = literals[-1]
    if len(subject) - len(last) < pos or not subject.endswith(last):
        return Mismatch(pos, last)
    return None


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(
        KIND_ID,
        params,
        required={"template_source": str},
        optional={"hole_open": str, "hole_close": str, "scope_selector": str},
    )
    hole_open = params.setdefault("hole_open", DEFAULT_HOLE_OPEN)
    hole_close = params.setdefault("hole_close", DEFAULT_HOLE_CLOSE)
    if not hole_open or not hole_close:
        raise SchemaError(f"{KIND_ID}: hole delimiters must be non-empty")
    if params.get("scope_selector") is not None:
        params["_scope_selector"] = parse_selector(params["scope_selector"])
    if not _is_url(params["template_source"]):
        # inline templates are checked at ruleset load time
        try:
            params["_template"] = parse_template(
                params["template_source"], hole_open, hole_close)
        except TemplateParseError as exc:
            raise SchemaError(f"{KIND_ID}: template_source: {exc}") from None
    return params


def _is_url(source: str) -> bool:
    return source.startswith("http://") or source.startswith("https://")


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    source = params["template_source"]
    if _is_url(source):
        if ctx.template_fetcher is None:
            ctx.diagnostic("template-fetch-failed", f"no fetcher configured for {source}")
            return [ctx.annotation(
                f"template {source} could not be fetched", severity=Severity.WARNING,
            )]
        try:
            source = ctx.template_fetcher(source)
        except TemplateFetchError as exc:
            ctx.diagnostic("template-fetch-failed", str(exc), url=params["template_source"])
            return [ctx.annotation(
                f"template {params['template_source']} could not be fetched: {exc}",
                severity=Severity.WARNING,
            )]
    try:
        template = params.get("_template") if not _is_url(params["template_source"]) else None
        if template is None:
            template = parse_template(source, params["hole_open"], params["hole_close"])
    except TemplateParseError as exc:
        ctx.diagnostic("template-malformed", str(exc), url=params["template_source"])
        return [ctx.annotation(
            f"template is malformed: {exc}", severity=Severity.WARNING,
        )]

    subject_node = _subject_node(ctx, matched, params)
    if subject_node is None:
        return [ctx.annotation(
            f"scope selector {params['scope_selector']!r} matched nothing",
            severity=Severity.WARNING,
        )]

    textmap = TextMap(ctx.tree, subject_node)
    mismatch = match_template(template, textmap.text)
    if mismatch is None:
        return []
    anchor = textmap.anchor(
        mismatch.offset, mismatch.offset + max(1, len(mismatch.expected))
    )
    preview = mismatch.expected if len(mismatch.expected) <= 40 else mismatch.expected[:37] + "..."
    return [ctx.annotation(
        f"diverges from template at offset {mismatch.offset}: "
        f"expected segment {preview!r}",
        anchor=anchor,
    )]


def _subject_node(ctx: ValidationContext, matched: list[Node], params: dict) -> Optional[Node]:
    if params.get("scope_selector"):
        sel = params.get("_scope_selector") or parse_selector(params["scope_selector"])
        scoped = evaluate(ctx.tree, sel)
        return scoped[0] if scoped else None
    return matched[0] if matched else None


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset(),
    validate_params=validate_params,
    run=run,
))

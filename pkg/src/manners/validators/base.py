"""Validator plumbing: the annotation type, the kind registry, and the
text-offset machinery shared by the built-in validators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional

from ..doctree import DocTree, Node, NodePath, TextRange, is_inside_marker
from ..errors import SchemaError


class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class Annotation:
    """One finding: where it is, how bad it is, what to do about it.

    ``anchor`` is absent for page-level findings.  ``action`` is ``redact``
    only for validators whose kind declares the redaction capability, and a
    redact annotation carries the mask character the merge step applies.
    """

    ruleset_id: str
    rule_id: str
    severity: Severity
    message: str
    anchor: Optional[TextRange] = None
    action: str = "annotate"
    fix_hint: Optional[str] = None
    mask: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict = {
            "ruleset_id": self.ruleset_id,
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "message": self.message,
        }
        if self.anchor is not None:
            d["anchor"] = {
                "path": self.anchor.node.serialize(),
                "start": self.anchor.start,
                "end": self.anchor.end,
            }
        d["action"] = self.action
        if self.fix_hint is not None:
            d["fix_hint"] = self.fix_hint
        if self.mask is not None:
            d["mask"] = self.mask
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        anchor = None
        if "anchor" in d and d["anchor"] is not None:
            anchor = TextRange(
                node=NodePath.parse(d["anchor"]["path"]),
                start=int(d["anchor"]["start"]),
                end=int(d["anchor"]["end"]),
            )
        return cls(
            ruleset_id=d["ruleset_id"],
            rule_id=d["rule_id"],
            severity=Severity(d["severity"]),
            message=d["message"],
            anchor=anchor,
            action=d.get("action", "annotate"),
            fix_hint=d.get("fix_hint"),
            mask=d.get("mask"),
        )


@dataclass
class ValidationContext:
    """Everything a validator may consult besides its matched nodes and params.

    ``diagnostics`` collects non-finding trouble (checker timeouts, fetch
    failures); the pipeline folds it into the report.  ``template_fetcher``
    resolves template URLs; ``checker_allowlist`` maps command ids to argv
    lists under operator control.
    """

    tree: DocTree
    ruleset_id: str
    rule_id: str
    severity: Severity
    checker_allowlist: Mapping[str, list[str]] = field(default_factory=dict)
    template_fetcher: Optional[Callable[[str], str]] = None
    diagnostics: list[dict] = field(default_factory=list)

    def annotation(self, message: str, anchor: Optional[TextRange] = None, *,
                   severity: Optional[Severity] = None, action: str = "annotate",
                   fix_hint: Optional[str] = None, mask: Optional[str] = None) -> Annotation:
        return Annotation(
            ruleset_id=self.ruleset_id,
            rule_id=self.rule_id,
            severity=severity if severity is not None else self.severity,
            message=message,
            anchor=anchor,
            action=action,
            fix_hint=fix_hint,
            mask=mask,
        )

    def diagnostic(self, kind: str, message: str, **extra: object) -> None:
        entry = {"kind": kind, "message": message,
                 "ruleset_id": self.ruleset_id, "rule_id": self.rule_id}
        entry.update(extra)
        self.diagnostics.append(entry)


Runner = Callable[[ValidationContext, list[Node], dict], list[Annotation]]
ParamValidator = Callable[[dict, Mapping[str, list[str]]], dict]


@dataclass(frozen=True)
class ValidatorKind:
    kind_id: str
    capabilities: frozenset[str]
    validate_params: ParamValidator
    run: Runner


_REGISTRY: dict[str, ValidatorKind] = {}


def register(kind: ValidatorKind) -> ValidatorKind:
    if kind.kind_id in _REGISTRY:
        raise ValueError(f"validator kind {kind.kind_id!r} already registered")
    _REGISTRY[kind.kind_id] = kind
    return kind


def get_kind(kind_id: str) -> Optional[ValidatorKind]:
    return _REGISTRY.get(kind_id)


def registered_kinds() -> list[str]:
    return sorted(_REGISTRY)


# ---------------------------------------------------------------------------
# Param checking helpers (shared by the per-kind validate_params functions)

def check_params(kind_id: str, params: dict, required: dict, optional: dict) -> dict:
    """Check presence and types against {name: type-or-types} maps.

    Returns a shallow copy of params.  Raises SchemaError naming the kind
    and the offending key for missing, unknown, or mistyped values.
    """
    if not isinstance(params, dict):
        raise SchemaError(f"{kind_id}: params must be an object")
    for name in required:
        if name not in params:
            raise SchemaError(f"{kind_id}: missing required param {name!r}")
    known = set(required) | set(optional)
    for name in params:
        if name not in known:
            raise SchemaError(f"{kind_id}: unknown param {name!r}")
    for name, value in params.items():
        expected = required.get(name, optional.get(name))
        if expected is not None and not isinstance(value, expected):
            raise SchemaError(
                f"{kind_id}: param {name!r} must be "
                f"{getattr(expected, '__name__', expected)}, got {type(value).__name__}"
            )
    return dict(params)


# ---------------------------------------------------------------------------
# Text segment mapping

def text_nodes_under(tree: DocTree, nodes: list[Node]) -> list[Node]:
    """Text nodes at or below the given nodes, document order, deduplicated.

    Text inside injected annotation markers is skipped so that validating
    an already-annotated page never re-finds its own markers.
    """
    skip_markers = tree.has_markers
    if len(nodes) == 1:
        node = nodes[0]
        found = [node] if node.kind == "text" else \
            [n for n in tree.descendants(node) if n.kind == "text"]
        if skip_markers:
            found = [n for n in found if not is_inside_marker(n)]
        return found
    seen: dict[int, Node] = {}
    for node in nodes:
        if node.kind == "text":
            seen[node.order] = node
            continue
        for n in tree.descendants(node):
            if n.kind == "text":
                seen[n.order] = n
    found = [seen[order] for order in sorted(seen)]
    if skip_markers:
        found = [n for n in found if not is_inside_marker(n)]
    return found


class TextMap:
    """Offset map between an element's concatenated text and its text nodes.

    Validators that analyze a whole snippet (syntax balance, templates,
    external checkers) compute offsets in the concatenation; anchors must
    address a single text node, so ranges are mapped back and clamped to
    the text node containing the range start.
    """

    def __init__(self, tree: DocTree, node: Node) -> None:
        self.segments: list[tuple[Node, int]] = []  # (text node, start offset)
        pos = 0
        for tn in text_nodes_under(tree, [node]):
            self.segments.append((tn, pos))
            pos += len(tn.text)
        self.length = pos
        self.text = "".join(tn.text for tn, _ in self.segments)

    def anchor(self, start: int, end: int) -> Optional[TextRange]:
        """Map a concatenation range to a TextRange in the owning text node."""
        if not self.segments:
            return None
        start = max(0, min(start, self.length))
        end = max(start, min(end, self.length))
        for tn, seg_start in reversed(self.segments):
            if start >= seg_start:
                local_start = start - seg_start
                local_end = min(end - seg_start, len(tn.text))
                if local_start >= len(tn.text) and local_start > 0:
                    # start sits exactly at the end of the last segment
                    local_start = len(tn.text)
                return TextRange(tn.path, local_start, max(local_start, local_end))
        return None

"""Pipeline core: fire rules, run validators, assemble the report, and
merge the annotation layer into the outgoing page.

The original content is never modified: annotate-mode findings wrap their
characters in marker elements that add no text, redact-mode findings mask
exactly their characters in the delivered view, and everything else rides
in an embedded JSON report for the overlay to render.

Wire contract consumed by the overlay:

* marker elements: ``<span data-manners-rule="<ruleset>:<rule>"
  data-manners-severity="..." data-manners-id="<index>">``, where the id
  is the annotation's index in ``report.annotations``;
* one ``<script type="application/json" id="manners-report">`` element
  carrying the report, injected at end of body;
* one stylesheet/script reference pair injected at end of head.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Mapping, Optional

from .doctree import (
    CDATA_ELEMENTS,
    MARKER_ATTR,
    DocTree,
    NO_MARKUP_ELEMENTS,
    Node,
    PathNotFound,
    VOID_ELEMENTS,
    escape_attr,
    escape_text,
    parse_html,
)
from .errors import EncodingError, MannersError
from .rules import Rule, RuleSet, fires_nodes
from .validators import Annotation, ValidationContext, get_kind

RULE_ATTR = "data-manners-rule"
SEVERITY_ATTR = "data-manners-severity"
REPORT_ELEMENT_ID = "manners-report"
OVERLAY_CSS_PATH = "/_manners/ui/overlay.css"
OVERLAY_JS_PATH = "/_manners/ui/overlay.js"


@dataclass
class Report:
    """The full validation outcome for one page view."""

    url: str
    generated_at: str
    doc_hash: str
    annotations: list[Annotation] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "generated_at": self.generated_at,
            "doc_hash": self.doc_hash,
            "annotations": [a.to_dict() for a in self.annotations],
            "diagnostics": self.diagnostics,
            "stats": self.stats,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(
            url=d["url"],
            generated_at=d["generated_at"],
            doc_hash=d["doc_hash"],
            annotations=[Annotation.from_dict(a) for a in d.get("annotations", [])],
            diagnostics=list(d.get("diagnostics", [])),
            stats=dict(d.get("stats", {})),
        )

    @property
    def error_count(self) -> int:
        return sum(1 for a in self.annotations if a.severity.value == "error")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


# ---------------------------------------------------------------------------
# Pipeline

def run_pipeline(
    url: str,
    body: bytes,
    candidates: list[tuple[RuleSet, Rule]],
    *,
    declared_encoding: Optional[str] = None,
    strict_decoding: bool = False,
    checker_allowlist: Optional[Mapping[str, list[str]]] = None,
    template_fetcher: Optional[Callable[[str], str]] = None,
    extra_diagnostics: Optional[list[dict]] = None,
    tree: Optional[DocTree] = None,
) -> tuple[Report, Optional[DocTree]]:
    """Evaluate candidate rules against one page and assemble the Report.

    ``candidates`` are the requester's subscribed, enabled rules (see
    ``rules.subscribed_rules``); firing is decided here so the stats can
    count evaluated vs fired.  On parse failure the report carries a
    page-level diagnostic and the tree is None — the caller serves the
    page unannotated.  Callers that already hold the parsed tree for
    exactly these body bytes (the proxy's digest-keyed cache) pass it via
    ``tree`` to skip re-parsing.
    """
    started = time.perf_counter()
    diagnostics: list[dict] = list(extra_diagnostics or [])
    annotations: list[Annotation] = []

    if tree is None:
        try:
            tree = parse_html(body, declared_encoding=declared_encoding, url=url,
                              strict_decoding=strict_decoding)
        except (EncodingError, ValueError) as exc:
            diagnostics.append({"kind": "parse-failure", "message": str(exc)})
            report = Report(
                url=url,
                generated_at=_now_iso(),
                doc_hash=hashlib.sha256(body).hexdigest(),
                annotations=[],
                diagnostics=diagnostics,
                stats={"rules_evaluated": len(candidates), "rules_fired": 0,
                       "duration_ms": _elapsed_ms(started)},
            )
            return report, None

    allowlist = dict(checker_allowlist or {})
    fired_count = 0
    for ruleset, rule in candidates:
        fired, matched_nodes = fires_nodes(rule, url, tree)
        if not fired:
            continue
        fired_count += 1
        ctx = ValidationContext(
            tree=tree,
            ruleset_id=ruleset.id,
            rule_id=rule.id,
            severity=rule.severity,
            checker_allowlist=allowlist,
            template_fetcher=template_fetcher,
            diagnostics=diagnostics,
        )
        kind = get_kind(rule.active.kind)
        try:
            annotations.extend(kind.run(ctx, matched_nodes, rule.active.params))
        except MannersError as exc:
            diagnostics.append({
                "kind": "validator-error",
                "ruleset_id": ruleset.id,
                "rule_id": rule.id,
                "message": str(exc),
            })

    annotations = _assert_anchors(tree, annotations, diagnostics)

    report = Report(
        url=url,
        generated_at=_now_iso(),
        doc_hash=tree.source_hash,
        annotations=annotations,
        diagnostics=diagnostics,
        stats={
            "rules_evaluated": len(candidates),
            "rules_fired": fired_count,
            "duration_ms": _elapsed_ms(started),
        },
    )
    return report, tree


def _elapsed_ms(started: float) -> int:
    return int((time.perf_counter() - started) * 1000)


def _anchor_error(tree: DocTree, annotation: Annotation) -> Optional[str]:
    anchor = annotation.anchor
    try:
        node = tree.resolve(anchor.node)
    except PathNotFound:
        return f"path {anchor.node} does not resolve"
    if node.kind != "text":
        return f"path {anchor.node} is not a text node"
    if not (0 <= anchor.start <= anchor.end <= len(node.text)):
        return (f"range [{anchor.start},{anchor.end}) out of bounds "
                f"for {anchor.node} (length {len(node.text)})")
    return None


def _assert_anchors(tree: DocTree, annotations: list[Annotation],
                    diagnostics: list[dict]) -> list[Annotation]:
    """Post-validation pass: every anchor must be valid against the tree.

    Invalid anchors are downgraded to page-level findings, never dropped.
    """
    checked = []
    for a in annotations:
        if a.anchor is not None:
            problem = _anchor_error(tree, a)
            if problem is not None:
                diagnostics.append({
                    "kind": "anchor-invalid",
                    "ruleset_id": a.ruleset_id,
                    "rule_id": a.rule_id,
                    "message": problem,
                })
                a = Annotation(
                    ruleset_id=a.ruleset_id, rule_id=a.rule_id, severity=a.severity,
                    message=a.message, anchor=None, action=a.action,
                    fix_hint=a.fix_hint, mask=a.mask,
                )
        checked.append(a)
    return checked


# ---------------------------------------------------------------------------
# Merge

@dataclass
class _Interval:
    start: int
    end: int
    ann_id: int
    annotation: Annotation
    children: list["_Interval"] = field(default_factory=list)

    @property
    def sort_key(self) -> tuple:
        # start asc, end desc, rule_id asc; annotation index as final tiebreak
        return (self.start, -self.end, self.annotation.rule_id, self.ann_id)


class SerialSegments:
    """Precomputed serialization of a tree, split so each text node owns one
    segment.  A merge is then a shallow list copy plus substitutions at the
    patched text nodes, instead of a full re-serialization.  Trees are
    immutable, so this caches safely and every thread derives the same value.
    """

    def __init__(self, tree: DocTree) -> None:
        self.segments: list[str] = []
        self.text_slots: dict[int, tuple[int, bool, bool]] = {}
        self.head_end = -1
        self.body_end = -1
        self.existing_ids: set[str] = set()
        self.overlay_present = False
        if tree.doctype:
            self.segments.append(f"<!{tree.doctype}>")
        for child in tree.root.children:
            self._build(child, raw=False, markup_ok=True)

    def _build(self, node: Node, raw: bool, markup_ok: bool) -> None:
        segments = self.segments
        if node.kind == "text":
            self.text_slots[node.order] = (len(segments), raw, markup_ok)
            segments.append(node.text if raw else escape_text(node.text))
            return
        if node.kind == "comment":
            segments.append(f"<!--{node.text}-->")
            return
        if node.attrs:
            attrs = "".join(
                f" {k}" if v == "" else f' {k}="{escape_attr(v)}"'
                for k, v in node.attrs.items()
            )
            if MARKER_ATTR in node.attrs:
                self.existing_ids.add(node.attrs[MARKER_ATTR])
            if node.name == "script" and node.attrs.get("id") == REPORT_ELEMENT_ID:
                self.overlay_present = True
        else:
            attrs = ""
        segments.append(f"<{node.name}{attrs}>")
        if node.name in VOID_ELEMENTS:
            return
        child_raw = node.name in CDATA_ELEMENTS
        child_markup_ok = markup_ok and node.name not in NO_MARKUP_ELEMENTS
        for child in node.children:
            self._build(child, raw=child_raw, markup_ok=child_markup_ok)
        if node.name == "head" and self.head_end < 0:
            self.head_end = len(segments)
        elif node.name == "body" and self.body_end < 0:
            self.body_end = len(segments)
        segments.append(f"</{node.name}>")


def merge(tree: DocTree, report: Report, overlay_enabled: bool = False) -> bytes:
    """Layer the report onto the page; returns the annotated HTML bytes.

    Never fails the page: invalid anchors are downgraded to page-level
    with a diagnostic.  Re-merging an already-merged page with the same
    report is a no-op (markers carry the reserved id attribute and are
    skipped), so merge is idempotent.  With an empty report and the
    overlay disabled, output equals the plain re-serialization of the
    tree.
    """
    serial = tree.serial_segments
    if serial is None:
        serial = SerialSegments(tree)
        tree.serial_segments = serial

    diagnostics = list(report.diagnostics)
    downgraded: dict[int, Annotation] = {}
    by_node: dict[int, list[_Interval]] = {}
    for idx, annotation in enumerate(report.annotations):
        if annotation.anchor is None or str(idx) in serial.existing_ids:
            continue
        problem = _anchor_error(tree, annotation)
        if problem is not None:
            diagnostics.append({
                "kind": "anchor-invalid",
                "ruleset_id": annotation.ruleset_id,
                "rule_id": annotation.rule_id,
                "message": problem,
            })
            downgraded[idx] = annotation
            continue
        node = tree.resolve(annotation.anchor.node)
        if _inside_no_markup_element(node) and annotation.action != "redact":
            # markup cannot be injected into script/style/title/... content;
            # the finding stays in the report without a marker
            diagnostics.append({
                "kind": "anchor-unmarkable",
                "ruleset_id": annotation.ruleset_id,
                "rule_id": annotation.rule_id,
                "message": f"anchor {annotation.anchor.node} sits inside raw text content",
            })
            continue
        by_node.setdefault(node.order, []).append(
            _Interval(annotation.anchor.start, annotation.anchor.end, idx, annotation))

    inject = overlay_enabled and not serial.overlay_present
    if not by_node and not inject:
        parts = serial.segments
    else:
        parts = list(serial.segments)
        for order, intervals in by_node.items():
            slot, raw, markup_ok = serial.text_slots[order]
            forest = _build_forest(intervals)
            buf: list[str] = []
            _emit_text_patched(tree.all_nodes[order].text, forest, buf,
                               markers=markup_ok, escape=not raw)
            parts[slot] = "".join(buf)
        if inject:
            injections = _injections(tree, report, diagnostics, downgraded)
            parts.insert(serial.head_end, injections["head"])
            parts.insert(serial.body_end + 1, injections["body"])

    return "".join(parts).encode(tree.encoding, errors="xmlcharrefreplace")


def _build_forest(intervals: list[_Interval]) -> list[_Interval]:
    """Arrange ranges into a nesting forest, splitting partial overlaps.

    Ordered by (start asc, end desc, rule_id asc) so wider ranges nest
    outside; a range that straddles its container's end is split at the
    boundary and continues as a sibling.
    """
    queue = sorted(intervals, key=lambda iv: iv.sort_key)
    roots: list[_Interval] = []
    stack: list[_Interval] = []
    while queue:
        iv = queue.pop(0)
        while stack and iv.start >= stack[-1].end:
            stack.pop()
        if stack and iv.end > stack[-1].end:
            container = stack[-1]
            rest = _Interval(container.end, iv.end, iv.ann_id, iv.annotation)
            iv = _Interval(iv.start, container.end, iv.ann_id, iv.annotation)
            keys = [q.sort_key for q in queue]
            queue.insert(bisect.bisect_left(keys, rest.sort_key), rest)
        (stack[-1].children if stack else roots).append(iv)
        if iv.end > iv.start:
            stack.append(iv)
    return roots


def _marker_open(iv: _Interval) -> str:
    a = iv.annotation
    return (
        f'<span {RULE_ATTR}="{escape_attr(a.ruleset_id)}:{escape_attr(a.rule_id)}"'
        f' {SEVERITY_ATTR}="{a.severity.value}"'
        f' {MARKER_ATTR}="{iv.ann_id}">'
    )


def _inside_no_markup_element(node: Node) -> bool:
    cur = node.parent
    while cur is not None:
        if cur.kind == "element" and cur.name in NO_MARKUP_ELEMENTS:
            return True
        cur = cur.parent
    return False


def _emit_text_patched(text: str, forest: list[_Interval], out: list[str],
                       markers: bool, escape: bool) -> None:
    def chunk(lo: int, hi: int, current_mask: Optional[str]) -> str:
        segment = text[lo:hi]
        if current_mask:
            segment = current_mask * len(segment)
        return escape_text(segment) if escape else segment

    def emit_level(lo: int, hi: int, items: list[_Interval], current_mask: Optional[str]) -> None:
        pos = lo
        for iv in items:
            if iv.start > pos:
                out.append(chunk(pos, iv.start, current_mask))
            inner_mask = iv.annotation.mask if iv.annotation.action == "redact" else current_mask
            if markers:
                out.append(_marker_open(iv))
            emit_level(iv.start, iv.end, iv.children, inner_mask)
            if markers:
                out.append("</span>")
            pos = iv.end
        if pos < hi:
            out.append(chunk(pos, hi, current_mask))

    emit_level(0, len(text), forest, None)


def _injections(tree: DocTree, report: Report, diagnostics: list[dict],
                downgraded: dict[int, Annotation]) -> dict:
    head = (
        f'<link rel="stylesheet" href="{OVERLAY_CSS_PATH}">'
        f'<script type="module" src="{OVERLAY_JS_PATH}" defer></script>'
    )
    embedded = report.to_dict()
    embedded["diagnostics"] = diagnostics
    for idx in downgraded:
        embedded["annotations"][idx].pop("anchor", None)
    payload = json.dumps(embedded, ensure_ascii=False).replace("<", "\\u003c")
    body = f'<script type="application/json" id="{REPORT_ELEMENT_ID}">{payload}</script>'
    return {"head": head, "body": body}

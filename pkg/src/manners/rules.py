"""Rule and ruleset model: parse rule files, decide which rules fire.

Ruleset files are UTF-8 JSON::

    {
      "schema_version": 1,
      "id": "wiki-basics",
      "version": "1.2.0",
      "title": "Wiki basics",
      "rules": [
        {
          "id": "no-badword",
          "title": "...",
          "description": "...",
          "severity": "warning",
          "firing": {"url_pattern": "^https://wiki\\.", "selector": "//p"},
          "active": {"kind": "regex-filter", "params": {...}},
          "tags": ["content"]
        }
      ]
    }

``url_pattern`` uses unanchored search semantics: write ``^`` explicitly
to anchor.  The normative JSON Schema ships in ``docs/ruleset.schema.json``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .doctree import DocTree, NodePath
from .errors import RuleSyntaxError, SchemaError, SelectorError
from .regexes import compile_rule_regex
from .selector import Selector, evaluate, parse_selector
from .validators import Severity, get_kind

SUPPORTED_SCHEMA_VERSION = 1


@dataclass
class FiringPart:
    """When a rule applies: a URL regex, optionally narrowed by a selector."""

    url_pattern: str
    selector: Optional[Selector] = None
    url_regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.url_regex = compile_rule_regex(self.url_pattern)


@dataclass
class ActivePart:
    """What a fired rule does: a registered validator kind plus its params."""

    kind: str
    params: dict


@dataclass
class Rule:
    id: str
    title: str
    description: str
    severity: Severity
    firing: FiringPart
    active: ActivePart
    tags: tuple[str, ...] = ()


@dataclass
class RuleSet:
    schema_version: int
    id: str
    version: str
    title: str
    rules: list[Rule]

    def rule(self, rule_id: str) -> Optional[Rule]:
        for r in self.rules:
            if r.id == rule_id:
                return r
        return None


@dataclass(frozen=True)
class SubscriptionEntry:
    repo_url: str
    ruleset_id: str
    enabled: bool = True
    disabled_rule_ids: frozenset[str] = frozenset()


@dataclass
class Subscription:
    """A user's chosen ruleset activations across repositories."""

    user_id: str
    entries: list[SubscriptionEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "entries": [
                {
                    "repo_url": e.repo_url,
                    "ruleset_id": e.ruleset_id,
                    "enabled": e.enabled,
                    "disabled_rule_ids": sorted(e.disabled_rule_ids),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, user_id: Optional[str] = None) -> "Subscription":
        if not isinstance(d, dict) or not isinstance(d.get("entries", []), list):
            raise SchemaError("subscription must be an object with an entries list")
        entries = []
        seen = set()
        for i, raw in enumerate(d.get("entries", [])):
            if not isinstance(raw, dict):
                raise SchemaError(f"subscription entry {i} must be an object")
            try:
                entry = SubscriptionEntry(
                    repo_url=str(raw["repo_url"]),
                    ruleset_id=str(raw["ruleset_id"]),
                    enabled=bool(raw.get("enabled", True)),
                    disabled_rule_ids=frozenset(raw.get("disabled_rule_ids", [])),
                )
            except KeyError as exc:
                raise SchemaError(f"subscription entry {i} missing {exc.args[0]!r}") from None
            key = (entry.repo_url, entry.ruleset_id)
            if key in seen:
                raise SchemaError(
                    "subscription entries must be unique per (repo_url, ruleset_id); "
                    f"duplicate: {key}"
                )
            seen.add(key)
            entries.append(entry)
        return cls(user_id=user_id or str(d.get("user_id", "")), entries=entries)


# ---------------------------------------------------------------------------
# Ruleset parsing

_RULE_KEYS = {"id", "title", "description", "severity", "firing", "active", "tags"}
_TOP_KEYS = {"schema_version", "id", "version", "title", "rules"}


def _require(obj: dict, key: str, where: str) -> object:
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def parse_ruleset(
    data: bytes | str | dict,
    *,
    checker_allowlist: Optional[Mapping[str, list[str]]] = None,
) -> RuleSet:
    """Parse and validate a ruleset document.

    Every regex and selector is compiled here, once; rules referencing
    external checkers are rejected unless their command id appears in
    ``checker_allowlist`` (which only ever comes from operator config,
    never from rule files).
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RuleSyntaxError(f"ruleset is not valid UTF-8: {exc}") from None
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise RuleSyntaxError(f"ruleset is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("ruleset document must be a JSON object")

    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"ruleset: unknown top-level field(s) {sorted(unknown)}")
    version = _require(data, "schema_version", "ruleset")
    if version != SUPPORTED_SCHEMA_VERSION:
        raise SchemaError(
            f"ruleset: unsupported schema_version {version!r} "
            f"(supported: {SUPPORTED_SCHEMA_VERSION})"
        )
    ruleset_id = str(_require(data, "id", "ruleset"))
    rules_raw = _require(data, "rules", "ruleset")
    if not isinstance(rules_raw, list):
        raise SchemaError("ruleset: rules must be a list")

    allowlist = dict(checker_allowlist) if checker_allowlist else {}
    rules: list[Rule] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(rules_raw):
        rule = _parse_rule(raw, i, allowlist)
        if rule.id in seen_ids:
            raise SchemaError(f"ruleset {ruleset_id!r}: duplicate rule id {rule.id!r}")
        seen_ids.add(rule.id)
        rules.append(rule)

    return RuleSet(
        schema_version=int(version),
        id=ruleset_id,
        version=str(_require(data, "version", "ruleset")),
        title=str(_require(data, "title", "ruleset")),
        rules=rules,
    )


def _parse_rule(raw: object, index: int, allowlist: Mapping[str, list[str]]) -> Rule:
    where = f"rule #{index}"
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: must be an object")
    rule_id = str(raw.get("id") or "")
    if rule_id:
        where = f"rule {rule_id!r}"
    if not rule_id:
        raise SchemaError(f"{where}: missing required field 'id'")
    unknown = set(raw) - _RULE_KEYS
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")

    try:
        severity = Severity(str(_require(raw, "severity", where)))
    except ValueError:
        raise SchemaError(
            f"{where}: severity must be one of "
            f"{[s.value for s in Severity]}, got {raw['severity']!r}"
        ) from None

    firing_raw = _require(raw, "firing", where)
    if not isinstance(firing_raw, dict) or set(firing_raw) - {"url_pattern", "selector"}:
        raise SchemaError(f"{where}: firing must be an object with url_pattern and optional selector")
    url_pattern = _require(firing_raw, "url_pattern", f"{where} firing")
    try:
        selector = None
        if firing_raw.get("selector") is not None:
            selector = parse_selector(str(firing_raw["selector"]))
        firing = FiringPart(url_pattern=str(url_pattern), selector=selector)
    except SelectorError as exc:
        raise RuleSyntaxError(f"{where}: firing.selector: {exc}") from None
    except RuleSyntaxError as exc:
        raise RuleSyntaxError(f"{where}: firing.url_pattern: {exc}") from None

    active_raw = _require(raw, "active", where)
    if not isinstance(active_raw, dict) or set(active_raw) - {"kind", "params"}:
        raise SchemaError(f"{where}: active must be an object with kind and params")
    kind_id = str(_require(active_raw, "kind", f"{where} active"))
    kind = get_kind(kind_id)
    if kind is None:
        raise SchemaError(f"{where}: unknown validator kind {kind_id!r}")
    params_raw = active_raw.get("params", {})
    try:
        params = kind.validate_params(params_raw, allowlist)
    except SchemaError as exc:
        raise SchemaError(f"{where}: active.params: {exc}") from None
    except (RuleSyntaxError, SelectorError) as exc:
        raise RuleSyntaxError(f"{where}: active.params: {exc}") from None

    tags = raw.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise SchemaError(f"{where}: tags must be a list of strings")

    return Rule(
        id=rule_id,
        title=str(_require(raw, "title", where)),
        description=str(_require(raw, "description", where)),
        severity=severity,
        firing=firing,
        active=ActivePart(kind=kind_id, params=params),
        tags=tuple(tags),
    )


# ---------------------------------------------------------------------------
# Firing

def fires_nodes(rule: Rule, url: str, tree: DocTree) -> tuple[bool, list]:
    """Node-level firing decision shared by fires() and the pipeline."""
    if rule.firing.url_regex.search(url) is None:
        return False, []
    if rule.firing.selector is None:
        return True, [tree.root]
    matched = evaluate(tree, rule.firing.selector)
    if not matched:
        return False, []
    return True, matched


def fires(rule: Rule, url: str, tree: DocTree) -> tuple[bool, list[NodePath]]:
    """Decide applicability of one rule to one (url, document).

    Fired means the URL pattern matches (search semantics) and, when a
    selector is present, it matches at least one node.  ``matched`` is the
    selector's match list, or the tree root when no selector narrows it.
    """
    fired, nodes = fires_nodes(rule, url, tree)
    return fired, [n.path for n in nodes]


@dataclass(frozen=True)
class ActiveRule:
    """One subscribed, enabled, fired rule with its selector matches."""

    ruleset: RuleSet
    rule: Rule
    matched: tuple[NodePath, ...]


def subscribed_rules(
    sub: Subscription,
    loaded: Mapping[tuple[str, str], RuleSet],
) -> tuple[list[tuple[RuleSet, Rule]], list[dict]]:
    """Expand a subscription into candidate rules, before any firing check.

    Missing rulesets become diagnostics, never failures: the page must
    still be served.  Order is (repo_url, ruleset_id, rule position).
    """
    candidates: list[tuple[RuleSet, Rule]] = []
    diagnostics: list[dict] = []
    for entry in sorted(sub.entries, key=lambda e: (e.repo_url, e.ruleset_id)):
        if not entry.enabled:
            continue
        ruleset = loaded.get((entry.repo_url, entry.ruleset_id))
        if ruleset is None:
            diagnostics.append({
                "kind": "missing-ruleset",
                "repo_url": entry.repo_url,
                "ruleset_id": entry.ruleset_id,
                "message": f"subscribed ruleset {entry.ruleset_id!r} is not loaded "
                           f"from {entry.repo_url}",
            })
            continue
        for rule in ruleset.rules:
            if rule.id not in entry.disabled_rule_ids:
                candidates.append((ruleset, rule))
    return candidates, diagnostics


def resolve_active_rules(
    sub: Subscription,
    loaded: Mapping[tuple[str, str], RuleSet],
    url: str,
    tree: DocTree,
) -> tuple[list[ActiveRule], list[dict]]:
    """Subscribed, enabled, non-disabled rules that fire on (url, tree)."""
    candidates, diagnostics = subscribed_rules(sub, loaded)
    active: list[ActiveRule] = []
    for ruleset, rule in candidates:
        fired, matched = fires(rule, url, tree)
        if fired:
            active.append(ActiveRule(ruleset=ruleset, rule=rule, matched=tuple(matched)))
    return active, diagnostics

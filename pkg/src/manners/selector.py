"""Content selector grammar: a closed subset of XPath 1.0 abbreviated syntax.

Grammar (anything outside it is a parse error, never a silent partial
match)::

    selector  := ('/' | '//') step (('/' | '//') step)*
    step      := nametest predicate*
    nametest  := NAME | '*' | 'text()'
    predicate := '[' INTEGER ']'                  positional
               | '[@' NAME '=' quoted ']'         attribute equality
               | '[text()' '=' quoted ']'         text equality
    NAME      := [a-zA-Z][a-zA-Z0-9-]*
    quoted    := "'" chars "'"  |  '"' chars '"'  (no escapes)

Evaluation semantics, pinned:

* ``/`` selects children of each context node, ``//`` all descendants.
* ``text()`` as a nametest selects text nodes; names and ``*`` select
  elements.
* Predicates filter the candidate list gathered per context node, applied
  left to right.  ``[n]`` keeps the n-th candidate (1-based) of the list
  gathered for that context — including on the descendant axis.
* ``[@a='v']`` is exact attribute equality; ``[text()='v']`` compares the
  concatenated descendant text of an element (or the content of a text
  node) for equality.
* Results are in document order with duplicates removed and depend only on
  (tree, selector).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .doctree import DocTree, Node, NodePath, node_text
from .errors import SelectorError

_NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9-]*")
_INT_RE = re.compile(r"[1-9][0-9]*")


@dataclass(frozen=True)
class Position:
    n: int

    def serialize(self) -> str:
        return f"[{self.n}]"


@dataclass(frozen=True)
class AttrEquals:
    name: str
    value: str

    def serialize(self) -> str:
        return f"[@{self.name}={_quote(self.value)}]"


@dataclass(frozen=True)
class TextEquals:
    value: str

    def serialize(self) -> str:
        return f"[text()={_quote(self.value)}]"


Predicate = Union[Position, AttrEquals, TextEquals]


@dataclass(frozen=True)
class Step:
    axis: str  # "child" or "descendant"
    test: str  # element name, "*", or "text()"
    predicates: tuple[Predicate, ...] = ()


@dataclass(frozen=True)
class Selector:
    """Parsed selector expression; immutable and shareable."""

    steps: tuple[Step, ...]

    def serialize(self) -> str:
        parts = []
        for step in self.steps:
            parts.append("//" if step.axis == "descendant" else "/")
            parts.append(step.test)
            for pred in step.predicates:
                parts.append(pred.serialize())
        return "".join(parts)

    def __str__(self) -> str:
        return self.serialize()


def _quote(value: str) -> str:
    if "'" not in value:
        return f"'{value}'"
    if '"' not in value:
        return f'"{value}"'
    raise SelectorError("value mixes both quote characters", value, 0)


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def fail(self, message: str) -> None:
        raise SelectorError(message, self.text, self.pos)

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, literal: str) -> bool:
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str) -> None:
        if not self.take(literal):
            self.fail(f"expected {literal!r}")

    def match(self, pattern: re.Pattern) -> Optional[str]:
        m = pattern.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return m.group()
        return None


def parse_selector(text: str) -> Selector:
    """Parse a selector expression; raises SelectorError outside the grammar."""
    scanner = _Scanner(text)
    steps: list[Step] = []
    if scanner.eof() or scanner.peek() != "/":
        scanner.fail("selector must start with '/' or '//'")
    while not scanner.eof():
        axis = "descendant" if scanner.take("//") else ("child" if scanner.take("/") else None)
        if axis is None:
            scanner.fail("expected '/' or '//'")
        steps.append(_parse_step(scanner, axis))
    if not steps:
        scanner.fail("selector has no steps")
    return Selector(tuple(steps))


def _parse_step(scanner: _Scanner, axis: str) -> Step:
    if scanner.take("text()"):
        test = "text()"
    elif scanner.take("*"):
        test = "*"
    else:
        name = scanner.match(_NAME_RE)
        if name is None:
            scanner.fail("expected a name test, '*', or 'text()'")
        test = name
    predicates: list[Predicate] = []
    while scanner.peek() == "[":
        predicates.append(_parse_predicate(scanner))
    return Step(axis=axis, test=test, predicates=tuple(predicates))


def _parse_predicate(scanner: _Scanner) -> Predicate:
    scanner.expect("[")
    if scanner.take("@"):
        name = scanner.match(_NAME_RE)
        if name is None:
            scanner.fail("expected an attribute name")
        scanner.expect("=")
        value = _parse_quoted(scanner)
        scanner.expect("]")
        return AttrEquals(name, value)
    if scanner.take("text()"):
        scanner.expect("=")
        value = _parse_quoted(scanner)
        scanner.expect("]")
        return TextEquals(value)
    digits = scanner.match(_INT_RE)
    if digits is None:
        scanner.fail("expected a position, '@name=', or 'text()='")
    scanner.expect("]")
    return Position(int(digits))


def _parse_quoted(scanner: _Scanner) -> str:
    quote = scanner.peek()
    if quote not in ("'", '"'):
        scanner.fail("expected a quoted value")
    scanner.pos += 1
    end = scanner.text.find(quote, scanner.pos)
    if end < 0:
        scanner.fail("unterminated quoted value")
    value = scanner.text[scanner.pos:end]
    scanner.pos = end + 1
    return value


# ---------------------------------------------------------------------------
# Evaluation

def _gather(tree: DocTree, context: Node, step: Step) -> list[Node]:
    test = step.test
    pool = context.children if step.axis == "child" else tree.descendants(context)
    if test == "text()":
        candidates = [c for c in pool if c.kind == "text"]
    elif test == "*":
        candidates = [c for c in pool if c.kind == "element"]
    else:
        candidates = [c for c in pool if c.name == test and c.kind == "element"]
    for pred in step.predicates:
        if isinstance(pred, Position):
            candidates = [candidates[pred.n - 1]] if pred.n <= len(candidates) else []
        elif isinstance(pred, AttrEquals):
            candidates = [c for c in candidates
                          if c.kind == "element" and c.attrs.get(pred.name) == pred.value]
        else:
            candidates = [c for c in candidates if node_text(c) == pred.value]
    return candidates


def evaluate(tree: DocTree, sel: Selector, context: Optional[Node] = None) -> list[Node]:
    """Evaluate a selector against the tree (or a subtree rooted at ``context``).

    Returns matching nodes in document order without duplicates.
    """
    contexts = [context if context is not None else tree.root]
    for step in sel.steps:
        if len(contexts) == 1:
            candidates = _gather(tree, contexts[0], step)
        else:
            gathered: dict[int, Node] = {}
            for ctx in contexts:
                for node in _gather(tree, ctx, step):
                    gathered[node.order] = node
            candidates = [gathered[order] for order in sorted(gathered)]
        contexts = candidates
        if not contexts:
            break
    return contexts


def select(tree: DocTree, sel: Selector, context: Optional[Node] = None) -> list[NodePath]:
    """Like :func:`evaluate` but returning stable node paths."""
    return [node.path for node in evaluate(tree, sel, context)]

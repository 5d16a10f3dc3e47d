"""Immutable HTML document tree: parsing, node addressing, text extraction.

The tree is the substrate every rule evaluates against.  It is built once
per fetched page, never mutated afterwards, and safe to share across
concurrent request handlers.

Error recovery policy (deterministic; recovered shapes are frozen as golden
tests):

* ``html``, ``head`` and ``body`` are synthesized when missing.  Head-only
  elements (``title``, ``meta``, ``link``, ``base``, ``style``, ``script``,
  ``noscript``) appearing before any body content go into ``head``; any
  other tag or non-whitespace text opens ``body``.
* Void elements (``br``, ``img``, ``meta``, ...) never take children; their
  end tags are ignored.
* A start tag implicitly closes open elements per ``IMPLIED_END_BY``
  (e.g. ``<p>`` closes an open ``p``, ``<li>`` closes an open ``li``).
* An end tag with no open element of that name is ignored; otherwise it
  closes every element above the match as well (no adoption agency).
* Duplicate ``<html>``/``<body>`` start tags and ``</body>``/``</html>``
  end tags are ignored; everything still open is closed at end of input.
* Self-closing syntax (``<div/>``) is honored: the element ends empty.
* Whitespace-only text outside ``body`` is dropped; all other text is
  preserved exactly.  Adjacent text nodes are merged.
* Character and entity references are decoded during tokenization;
  duplicate attributes keep the first value; valueless attributes get "".
* The doctype is recorded on the tree, not as a node.  Processing
  instructions and non-doctype declarations are dropped.
"""

from __future__ import annotations

import codecs
import hashlib
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Iterator, Optional

from .errors import EncodingError, PathNotFound

# Marker machinery reserved by the annotation layer.  Validators skip text
# inside elements carrying MARKER_ATTR, and the merge step never re-wraps
# such regions, which is what makes merging idempotent.
MARKER_ATTR = "data-manners-id"

VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Content of these is tokenized as raw text (no tags, no entity decoding);
# serialized back verbatim.
CDATA_ELEMENTS = frozenset(
    "script style xmp iframe noembed noframes".split()
)
# Entities decode inside these but markup is still literal text; serialized
# with escaping, and the annotation layer never injects markers inside.
RCDATA_ELEMENTS = frozenset(("title", "textarea"))

# Elements whose text content cannot legally contain injected markup.
NO_MARKUP_ELEMENTS = CDATA_ELEMENTS | RCDATA_ELEMENTS

# Kept name for the rendered-text convention: extract_text skips these.
RAW_TEXT_ELEMENTS = CDATA_ELEMENTS

HEAD_ONLY_ELEMENTS = frozenset(
    "title base link meta style script noscript".split()
)

_P_CLOSERS = frozenset(
    "address article aside blockquote details div dl fieldset figcaption "
    "figure footer form h1 h2 h3 h4 h5 h6 header hr main menu nav ol p pre "
    "section table ul li dt dd".split()
)

# New start tag -> set of open element names it implicitly closes (applied
# repeatedly while the innermost open element is in the set).
IMPLIED_END_BY = {name: frozenset({"p"}) for name in _P_CLOSERS}
IMPLIED_END_BY.update(
    {
        "li": frozenset({"li", "p"}),
        "dt": frozenset({"dt", "dd", "p"}),
        "dd": frozenset({"dt", "dd", "p"}),
        "tr": frozenset({"td", "th", "tr"}),
        "td": frozenset({"td", "th"}),
        "th": frozenset({"td", "th"}),
        "thead": frozenset({"td", "th", "tr", "tbody", "thead", "tfoot"}),
        "tbody": frozenset({"td", "th", "tr", "tbody", "thead", "tfoot"}),
        "tfoot": frozenset({"td", "th", "tr", "tbody", "thead", "tfoot"}),
        "option": frozenset({"option"}),
        "optgroup": frozenset({"option", "optgroup"}),
    }
)

_STEP_RE = re.compile(r"([a-zA-Z][a-zA-Z0-9-]*|text\(\)|comment\(\))\[([1-9][0-9]*)\]$")


class Node:
    """One node of a document tree.

    ``kind`` is one of ``document``, ``element``, ``text``, ``comment``.
    Trees are immutable once :func:`parse_html` returns; nothing in this
    package mutates a built node.  ``order`` is the document-order index;
    ``subtree_end`` the order of the subtree's last node, so a node's
    descendants are exactly the orders in (order, subtree_end].
    """

    __slots__ = ("kind", "name", "attrs", "text", "children", "parent",
                 "order", "subtree_end", "_path")

    def __init__(self, kind: str, name: str, attrs: Optional[dict] = None,
                 text: str = "", order: int = 0):
        self.kind = kind
        self.name = name
        self.attrs = attrs if attrs is not None else {}
        self.text = text
        self.children: list[Node] = []
        self.parent: Optional[Node] = None
        self.order = order
        self.subtree_end = order
        self._path: Optional[NodePath] = None

    def __repr__(self) -> str:
        if self.kind == "element":
            return f"<Node element {self.name} children={len(self.children)}>"
        return f"<Node {self.kind} {self.text[:20]!r}>"

    @property
    def step_name(self) -> str:
        """The name used for this node in a NodePath step."""
        if self.kind == "text":
            return "text()"
        if self.kind == "comment":
            return "comment()"
        return self.name

    @property
    def path(self) -> "NodePath":
        """Stable address of this node, computed on first use."""
        if self._path is None:
            if self.parent is None:
                self._path = ROOT_PATH
            else:
                step_name = self.step_name
                index = 0
                for sibling in self.parent.children:
                    if sibling.step_name == step_name:
                        index += 1
                    if sibling is self:
                        break
                self._path = self.parent.path.child(step_name, index)
        return self._path


@dataclass(frozen=True)
class NodePath:
    """Stable address of a node: (name, 1-based index among same-name siblings) steps.

    The canonical string form ``/html[1]/body[1]/p[2]`` appears verbatim in
    reports and injected marker attributes.  Text and comment nodes use the
    pseudo-names ``text()`` and ``comment()``.  The document root serializes
    to ``/``.
    """

    steps: tuple[tuple[str, int], ...]

    def serialize(self) -> str:
        if not self.steps:
            return "/"
        return "".join(f"/{name}[{idx}]" for name, idx in self.steps)

    def __str__(self) -> str:
        return self.serialize()

    def child(self, name: str, idx: int) -> "NodePath":
        return NodePath(self.steps + ((name, idx),))

    @classmethod
    def parse(cls, text: str) -> "NodePath":
        """Parse the canonical string form; raises PathNotFound on bad syntax."""
        if text == "/":
            return ROOT_PATH
        if not text.startswith("/") or text.endswith("/"):
            raise PathNotFound(f"malformed node path: {text!r}")
        steps = []
        for part in text[1:].split("/"):
            m = _STEP_RE.match(part)
            if not m:
                raise PathNotFound(f"malformed node path step {part!r} in {text!r}")
            steps.append((m.group(1), int(m.group(2))))
        return cls(tuple(steps))


ROOT_PATH = NodePath(())


@dataclass(frozen=True)
class TextRange:
    """A character range inside one text node, in Unicode code points.

    ``start`` is inclusive, ``end`` exclusive; both are offsets into the
    addressed text node's content (never bytes, so anchors survive
    re-serialization in any encoding).
    """

    node: NodePath
    start: int
    end: int


class DocTree:
    """Parsed, immutable document tree for one fetched page.

    ``all_nodes`` holds every node in document order, indexed by its
    ``order``, which makes descendant queries order-range slices.  Immutable
    after construction and safe to share across concurrent handlers; the
    lazily computed caches (paths, marker flag, serialization segments) are
    derived values that every thread computes identically.
    """

    def __init__(self, root: Node, source_url: str, source_hash: str, encoding: str,
                 doctype: Optional[str] = None, all_nodes: Optional[list[Node]] = None):
        self.root = root
        self.source_url = source_url
        self.source_hash = source_hash
        self.encoding = encoding
        self.doctype = doctype
        self.all_nodes = all_nodes if all_nodes is not None else _collect_nodes(root)
        self._has_markers: Optional[bool] = None
        self.serial_segments = None  # built on first merge (see annotator)
        for node in reversed(self.all_nodes):
            node.subtree_end = node.children[-1].subtree_end if node.children else node.order

    def resolve(self, path: NodePath | str) -> Node:
        """Return the node addressed by ``path``; raises PathNotFound."""
        parsed = NodePath.parse(path) if isinstance(path, str) else path
        node = self.root
        for step_name, index in parsed.steps:
            found = None
            count = 0
            for child in node.children:
                if child.step_name == step_name:
                    count += 1
                    if count == index:
                        found = child
                        break
            if found is None:
                raise PathNotFound(
                    f"no node at {parsed.serialize()} in {self.source_url}")
            node = found
        return node

    def iter_nodes(self) -> Iterator[Node]:
        """All nodes in document order."""
        return iter(self.all_nodes)

    def descendants(self, node: Node) -> list[Node]:
        """Every node below ``node``, in document order."""
        return self.all_nodes[node.order + 1:node.subtree_end + 1]

    @property
    def has_markers(self) -> bool:
        """Whether any injected annotation marker exists in this tree."""
        if self._has_markers is None:
            self._has_markers = any(
                n.kind == "element" and MARKER_ATTR in n.attrs
                for n in self.all_nodes)
        return self._has_markers


def _collect_nodes(root: Node) -> list[Node]:
    nodes = []
    stack = [root]
    while stack:
        node = stack.pop()
        node.order = len(nodes)
        nodes.append(node)
        for child in node.children:
            child.parent = node
        stack.extend(reversed(node.children))
    return nodes


def text_of(tree: DocTree, path: NodePath | str) -> str:
    """Text content at ``path``: the node's own text, or for elements the
    concatenation of descendant text nodes in document order."""
    return node_text(tree.resolve(path))


def node_text(node: Node) -> str:
    """Rendered text: descendant text nodes, skipping script/style content."""
    if node.kind == "text":
        return node.text
    if node.kind == "comment":
        return ""
    parts = []
    stack = list(reversed(node.children))
    while stack:
        n = stack.pop()
        if n.kind == "text":
            parts.append(n.text)
        elif n.kind == "element" and n.name not in RAW_TEXT_ELEMENTS:
            stack.extend(reversed(n.children))
    return "".join(parts)


def extract_text(tree: DocTree) -> str:
    """Concatenated text of the whole document, in document order."""
    return node_text(tree.root)


def is_inside_marker(node: Node) -> bool:
    """True when the node sits inside an injected annotation marker."""
    cur = node.parent
    while cur is not None:
        if cur.kind == "element" and MARKER_ATTR in cur.attrs:
            return True
        cur = cur.parent
    return False


# ---------------------------------------------------------------------------
# Parsing

class _TreeBuilder(HTMLParser):
    """Tokenizer callbacks implementing the recovery policy above.

    Nodes are created strictly in document order, so creation order doubles
    as the tree's document-order numbering.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.all_nodes: list[Node] = []
        self.document = self._new_node("document", "#document")
        self.html: Optional[Node] = None
        self.head: Optional[Node] = None
        self.body: Optional[Node] = None
        self.open_stack: list[Node] = [self.document]
        self.doctype: Optional[str] = None

    # -- insertion helpers

    def _new_node(self, kind: str, name: str, attrs: Optional[dict] = None,
                  text: str = "") -> Node:
        node = Node(kind, name, attrs, text, order=len(self.all_nodes))
        self.all_nodes.append(node)
        return node

    def _append_new(self, kind: str, name: str, attrs: Optional[dict] = None,
                    text: str = "") -> Node:
        parent = self.open_stack[-1]
        node = self._new_node(kind, name, attrs, text)
        node.parent = parent
        parent.children.append(node)
        return node

    def _append_text(self, data: str) -> None:
        parent = self.open_stack[-1]
        children = parent.children
        if children and children[-1].kind == "text":
            children[-1].text += data
        else:
            self._append_new("text", "#text", text=data)

    def _ensure_html(self) -> None:
        if self.html is None:
            self.html = self._new_node("element", "html")
            self.html.parent = self.document
            self.document.children.append(self.html)
            self.open_stack.append(self.html)

    def _ensure_head(self) -> None:
        self._ensure_html()
        if self.head is None:
            self.head = self._new_node("element", "head")
            self.head.parent = self.html
            self.html.children.append(self.head)

    def _ensure_body(self) -> None:
        self._ensure_html()
        if self.head is None:
            self._ensure_head()
        if self.body is None:
            self.body = self._new_node("element", "body")
            self.body.parent = self.html
            # /html stays open under the body for the rest of the input
            while self.open_stack[-1] is not self.html:
                self.open_stack.pop()
            self.html.children.append(self.body)
            self.open_stack.append(self.body)

    def _in_head_element(self) -> bool:
        if self.head is None:
            return False
        for node in reversed(self.open_stack):
            if node is self.head:
                return True
        return False

    # -- tokenizer callbacks

    def handle_starttag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        if attrs:
            attr_map: dict[str, str] = {}
            for name, value in attrs:
                if name not in attr_map:
                    attr_map[name] = value if value is not None else ""
        else:
            attr_map = {}

        if tag == "html":
            if self.html is None:
                self._ensure_html()
                self.html.attrs = attr_map
            return
        if tag == "head":
            if self.head is None:
                self._ensure_head()
                self.head.attrs = attr_map
                self.open_stack.append(self.head)
            return
        if tag == "body":
            if self.body is None:
                self._ensure_body()
                self.body.attrs = attr_map
            return

        if self.body is None:
            if tag in HEAD_ONLY_ELEMENTS:
                if not self._in_head_element():
                    self._ensure_head()
                    self.open_stack.append(self.head)
                node = self._append_new("element", tag, attr_map)
                if tag not in VOID_ELEMENTS:
                    self.open_stack.append(node)
                return
            self._ensure_body()

        closers = IMPLIED_END_BY.get(tag)
        if closers:
            stack = self.open_stack
            while (
                stack[-1].kind == "element"
                and stack[-1].name in closers
                and stack[-1] is not self.body and stack[-1] is not self.head
            ):
                stack.pop()

        node = self._append_new("element", tag, attr_map)
        if tag not in VOID_ELEMENTS:
            self.open_stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        # <tag/> — treated as a start tag; non-void elements simply end empty
        if tag in VOID_ELEMENTS:
            self.handle_starttag(tag, attrs)
        else:
            self.handle_starttag(tag, attrs)
            self.handle_endtag(tag)

    def handle_endtag(self, tag: str) -> None:
        if tag in ("html", "body") or tag in VOID_ELEMENTS:
            return
        if tag == "head":
            if self._in_head_element():
                while self.open_stack.pop() is not self.head:
                    pass
            return
        for i in range(len(self.open_stack) - 1, -1, -1):
            node = self.open_stack[i]
            if node.kind == "element" and node.name == tag:
                if node in (self.html, self.body, self.head):
                    return
                del self.open_stack[i:]
                return
        # no matching open element: ignored

    def handle_data(self, data: str) -> None:
        if not data:
            return
        if self.body is None:
            if not self._in_head_element():
                if data.strip() == "":
                    return
                self._ensure_body()
            elif self.open_stack[-1] is self.head:
                # text directly inside head (not in a title/script/...)
                if data.strip() == "":
                    return
                self._ensure_body()
        self._append_text(data)

    def handle_comment(self, data: str) -> None:
        if self.body is None and not self._in_head_element():
            self._ensure_html()
        self._append_new("comment", "#comment", text=data)

    def handle_decl(self, decl: str) -> None:
        if decl.lower().startswith("doctype") and self.doctype is None:
            self.doctype = decl

    def finish(self) -> Node:
        self._ensure_body()
        return self.document


_META_CHARSET_RE = re.compile(
    rb"""<meta[^>]+charset\s*=\s*["']?\s*([a-zA-Z0-9_.:-]+)""", re.IGNORECASE
)


def sniff_encoding(data: bytes, declared_encoding: Optional[str] = None) -> str:
    """Resolve the encoding label: declared > BOM > meta charset > utf-8."""
    if declared_encoding:
        return declared_encoding
    if data.startswith(codecs.BOM_UTF8):
        return "utf-8-sig"
    if data.startswith(codecs.BOM_UTF16_LE) or data.startswith(codecs.BOM_UTF16_BE):
        return "utf-16"
    m = _META_CHARSET_RE.search(data[:1024])
    if m:
        return m.group(1).decode("ascii")
    return "utf-8"


def parse_html(
    data: bytes,
    declared_encoding: Optional[str] = None,
    url: str = "about:blank",
    strict_decoding: bool = False,
) -> DocTree:
    """Parse page bytes into a DocTree.

    ``declared_encoding`` is the transport-level charset (e.g. from the
    Content-Type header) and wins over sniffing.  With ``strict_decoding``
    undecodable input raises EncodingError instead of substituting U+FFFD.
    """
    if not data:
        raise ValueError("parse_html requires non-empty input")
    label = sniff_encoding(data, declared_encoding)
    try:
        codec = codecs.lookup(label)
    except LookupError:
        if strict_decoding:
            raise EncodingError(f"unknown encoding label {label!r}") from None
        codec, label = codecs.lookup("utf-8"), "utf-8"
    try:
        text = data.decode(codec.name, errors="strict" if strict_decoding else "replace")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"undecodable input under {label!r}: {exc}") from None

    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    root = builder.finish()
    return DocTree(
        root=root,
        source_url=url,
        source_hash=hashlib.sha256(data).hexdigest(),
        encoding=codec.name,
        doctype=builder.doctype,
        all_nodes=builder.all_nodes,
    )


# ---------------------------------------------------------------------------
# Serialization

_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;"}
_ATTR_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;"}
_TEXT_ESC_RE = re.compile(r"[&<>]")
_ATTR_ESC_RE = re.compile(r'[&<>"]')


def escape_text(text: str) -> str:
    return _TEXT_ESC_RE.sub(lambda m: _TEXT_ESCAPES[m.group()], text)


def escape_attr(text: str) -> str:
    return _ATTR_ESC_RE.sub(lambda m: _ATTR_ESCAPES[m.group()], text)


def _serialize_node(node: Node, out: list[str]) -> None:
    if node.kind == "text":
        out.append(escape_text(node.text))
        return
    if node.kind == "comment":
        out.append(f"<!--{node.text}-->")
        return
    # element; valueless attributes serialize bare, matching how they parse
    if node.attrs:
        attrs = "".join(
            f" {k}" if v == "" else f' {k}="{escape_attr(v)}"'
            for k, v in node.attrs.items()
        )
    else:
        attrs = ""
    out.append(f"<{node.name}{attrs}>")
    if node.name in VOID_ELEMENTS:
        return
    if node.name in RAW_TEXT_ELEMENTS:
        for child in node.children:
            if child.kind == "text":
                out.append(child.text)
    else:
        for child in node.children:
            _serialize_node(child, out)
    out.append(f"</{node.name}>")


def serialize_html(tree: DocTree) -> bytes:
    """Re-serialize the tree in its source encoding.

    Stable under parse/serialize round-trips of its own output, which is
    what the merge idempotence guarantee builds on.  Characters outside the
    target encoding become numeric character references.
    """
    out: list[str] = []
    if tree.doctype:
        out.append(f"<!{tree.doctype}>")
    for child in tree.root.children:
        _serialize_node(child, out)
    return "".join(out).encode(tree.encoding, errors="xmlcharrefreplace")

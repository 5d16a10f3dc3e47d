"""Shared fixtures: independent oracles, random generators, mock servers."""

from __future__ import annotations

import json
import random
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from manners.doctree import DocTree, Node
from manners.selector import AttrEquals, Position, Selector, TextEquals

# ---------------------------------------------------------------------------
# Selector oracle: an exhaustive recursive walk, independent of the
# production evaluator.  It computes its own document-order numbering and
# applies each step per context node, exactly as the pinned semantics say.


def _oracle_order(tree: DocTree) -> dict[int, int]:
    numbering: dict[int, int] = {}

    def walk(node: Node) -> None:
        numbering[id(node)] = len(numbering)
        for child in node.children:
            walk(child)

    walk(tree.root)
    return numbering


def _oracle_text(node: Node) -> str:
    if node.kind == "text":
        return node.text
    if node.kind != "element":
        return ""
    out = []

    def collect(n: Node) -> None:
        for c in n.children:
            if c.kind == "text":
                out.append(c.text)
            elif c.kind == "element" and c.name not in ("script", "style"):
                collect(c)

    collect(node)
    return "".join(out)


def oracle_select(tree: DocTree, sel: Selector) -> list[str]:
    numbering = _oracle_order(tree)
    contexts = [tree.root]
    for step in sel.steps:
        next_nodes: list[Node] = []
        for ctx in contexts:
            if step.axis == "child":
                pool = list(ctx.children)
            else:
                pool = []

                def collect(n: Node) -> None:
                    for c in n.children:
                        pool.append(c)
                        collect(c)

                collect(ctx)
            if step.test == "text()":
                candidates = [n for n in pool if n.kind == "text"]
            elif step.test == "*":
                candidates = [n for n in pool if n.kind == "element"]
            else:
                candidates = [n for n in pool
                              if n.kind == "element" and n.name == step.test]
            for pred in step.predicates:
                if isinstance(pred, Position):
                    candidates = [candidates[pred.n - 1]] if len(candidates) >= pred.n else []
                elif isinstance(pred, AttrEquals):
                    candidates = [n for n in candidates
                                  if n.kind == "element" and n.attrs.get(pred.name) == pred.value]
                elif isinstance(pred, TextEquals):
                    candidates = [n for n in candidates if _oracle_text(n) == pred.value]
            next_nodes.extend(candidates)
        dedup: dict[int, Node] = {}
        for n in next_nodes:
            dedup[id(n)] = n
        contexts = sorted(dedup.values(), key=lambda n: numbering[id(n)])
    return [str(n.path) for n in contexts]


# ---------------------------------------------------------------------------
# Template oracle: escaped literal segments joined by lazy wildcards;
# conformance iff the whole subject matches.


def oracle_template_literals(template: str, hole_open: str = "{{{",
                             hole_close: str = "}}}") -> list[str]:
    parts = re.split(re.escape(hole_open) + r".*?" + re.escape(hole_close),
                     template, flags=re.DOTALL)
    return parts


def oracle_template_conforms(template: str, subject: str, hole_open: str = "{{{",
                             hole_close: str = "}}}") -> bool:
    literals = oracle_template_literals(template, hole_open, hole_close)
    pattern = "(?s:.*?)".join(re.escape(lit) for lit in literals)
    return re.fullmatch(pattern, subject, flags=re.DOTALL) is not None


# ---------------------------------------------------------------------------
# Regex filter oracle: naive scan advancing past each match end.


def oracle_leftmost_matches(pattern: str, text: str) -> list[tuple[int, int]]:
    rx = re.compile(pattern)
    out = []
    pos = 0
    while pos <= len(text):
        m = rx.search(text, pos)
        if m is None:
            break
        if m.end() == m.start():
            pos = m.start() + 1
            continue
        out.append((m.start(), m.end()))
        pos = m.end()
    return out


# ---------------------------------------------------------------------------
# Random document generator (via public parse path)

_TAGS = ["div", "p", "span", "em", "code", "ul", "section", "h1", "h2"]
_ATTR_NAMES = ["class", "id", "data-k"]
_ATTR_VALUES = ["snippet", "note", "x", "y-1", "wide"]
_WORDS = ["alpha", "beta", "gamma delta", "x y", "42", "lorem"]


def random_html(rng: random.Random, max_depth: int = 6, max_nodes: int = 200) -> str:
    budget = [rng.randint(3, max_nodes)]

    def element(depth: int) -> str:
        budget[0] -= 1
        tag = rng.choice(_TAGS)
        attrs = ""
        if rng.random() < 0.5:
            attrs = f' {rng.choice(_ATTR_NAMES)}="{rng.choice(_ATTR_VALUES)}"'
        if depth >= max_depth or budget[0] <= 0 or rng.random() < 0.3:
            inner = rng.choice(_WORDS) if rng.random() < 0.7 else ""
            return f"<{tag}{attrs}>{inner}</{tag}>"
        children = []
        for _ in range(rng.randint(1, 4)):
            if budget[0] <= 0:
                break
            if rng.random() < 0.35:
                children.append(rng.choice(_WORDS))
            else:
                children.append(element(depth + 1))
        return f"<{tag}{attrs}>{''.join(children)}</{tag}>"

    body = []
    while budget[0] > 0 and len(body) < 8:
        body.append(element(1))
    return f"<html><head><title>t</title></head><body>{''.join(body)}</body></html>"


def random_selector(rng: random.Random) -> str:
    n_steps = rng.randint(1, 4)
    parts = []
    for _ in range(n_steps):
        axis = "//" if rng.random() < 0.5 else "/"
        roll = rng.random()
        if roll < 0.15:
            test = "*"
        elif roll < 0.25:
            test = "text()"
        else:
            test = rng.choice(_TAGS)
        preds = ""
        if test != "text()":
            p = rng.random()
            if p < 0.2:
                preds = f"[{rng.randint(1, 3)}]"
            elif p < 0.35:
                preds = f"[@{rng.choice(_ATTR_NAMES)}='{rng.choice(_ATTR_VALUES)}']"
            elif p < 0.4:
                preds = f"[text()='{rng.choice(_WORDS)}']"
        elif rng.random() < 0.2:
            preds = f"[{rng.randint(1, 3)}]"
        parts.append(f"{axis}{test}{preds}")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Mock HTTP servers


class RecordedRequest:
    def __init__(self, method: str, path: str, headers: dict, body: bytes):
        self.method = method
        self.path = path
        self.headers = headers
        self.body = body


class MockServer:
    """Configurable origin/repository server for integration tests.

    ``routes`` maps a path to a dict with ``status`` (default 200),
    ``headers`` (list of pairs), ``body`` (bytes), and optional ``etag``.
    A request with a matching If-None-Match gets 304 with no body.
    """

    def __init__(self) -> None:
        self.routes: dict[str, dict] = {}
        self.requests: list[RecordedRequest] = []
        self.hit_counts: dict[str, int] = {}
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt: str, *args: object) -> None:
                pass

            def _serve(self) -> None:
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                with outer._lock:
                    outer.requests.append(RecordedRequest(
                        self.command, self.path, dict(self.headers), body))
                    outer.hit_counts[self.path] = outer.hit_counts.get(self.path, 0) + 1
                    route = outer.routes.get(self.path)
                if route is None:
                    payload = b"not found"
                    self.send_response(404)
                    self.send_header("Content-Type", "text/plain")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                    return
                etag = route.get("etag")
                if etag and self.headers.get("If-None-Match") == etag:
                    self.send_response(304)
                    self.send_header("ETag", etag)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                status = route.get("status", 200)
                payload = route.get("body", b"")
                self.send_response(status)
                for name, value in route.get("headers", []):
                    self.send_header(name, value)
                if etag:
                    self.send_header("ETag", etag)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(payload)

            do_GET = _serve
            do_POST = _serve
            do_HEAD = _serve
            do_PUT = _serve

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05), daemon=True)

    def start(self) -> str:
        self._thread.start()
        host, port = self._httpd.server_address
        self.url = f"http://{host}:{port}"
        return self.url

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    # -- helpers

    def add_page(self, path: str, body: bytes, content_type: str = "text/html") -> None:
        self.routes[path] = {"body": body, "headers": [("Content-Type", content_type)]}

    def add_repo(self, base_path: str, repo_id: str, rulesets: dict[str, dict],
                 *, versions: dict[str, str] | None = None, etag: str | None = None,
                 tamper: dict[str, bytes] | None = None) -> None:
        """Install a manifest plus ruleset files under ``base_path``.

        ``rulesets`` maps ruleset_id to its JSON document; ``tamper``
        optionally substitutes the served bytes (digest still computed
        over the true document)."""
        import hashlib

        entries = []
        for rsid, doc in rulesets.items():
            raw = json.dumps(doc).encode()
            digest = hashlib.sha256(raw).hexdigest()
            entries.append({
                "ruleset_id": rsid,
                "version": (versions or {}).get(rsid, doc.get("version", "1.0")),
                "sha256": digest,
                "href": f"{rsid}.json",
                "title": doc.get("title", rsid),
            })
            served = (tamper or {}).get(rsid, raw)
            self.routes[f"{base_path}/{rsid}.json"] = {
                "body": served, "headers": [("Content-Type", "application/json")]}
        manifest = {"schema_version": 1, "repo_id": repo_id, "rulesets": entries}
        self.routes[f"{base_path}/index.json"] = {
            "body": json.dumps(manifest).encode(),
            "headers": [("Content-Type", "application/json")],
            **({"etag": etag} if etag else {}),
        }


@pytest.fixture
def make_checker(tmp_path):
    """Write a small executable shell script usable as an external checker."""

    def _make(name: str, script: str) -> str:
        path = tmp_path / name
        path.write_text(f"#!/bin/sh\n{script}\n")
        path.chmod(0o755)
        return str(path)

    return _make


@pytest.fixture
def mock_server():
    server = MockServer()
    server.start()
    yield server
    server.stop()


@pytest.fixture
def mock_origin():
    server = MockServer()
    server.start()
    yield server
    server.stop()

"""The annotating man-in-the-middle service.

Terminates client HTTP requests, fetches the page unmodified from its
origin, runs the requester's subscribed rules over eligible HTML, merges
the annotation layer, and serves the result.  Everything else passes
through byte-identical.  In strict-save mode, form POSTs matching the
configured endpoint are checked first and blocked (HTTP 422) when they
produce error-severity findings.

Wire surface (normative, covered by integration tests):

* header ``X-Manners-Findings``: finding count on eligible HTML
  (``-1`` when the pipeline failed and the page was served unannotated);
* cookie ``manners_uid``: opaque per-user identity, set on first contact,
  never forwarded to the origin;
* management API under ``/_manners/api/`` and overlay assets under
  ``/_manners/ui/`` — handled locally, never proxied upstream.

Documented header adjustments: hop-by-hop headers are stripped both ways,
``Accept-Encoding`` is narrowed to ``gzip, deflate``, ``Content-Length``
is recomputed, and in reverse mode ``Location`` headers pointing at the
upstream are rewritten to the proxy.
"""

from __future__ import annotations

import gzip
import json
import mimetypes
import re
import threading
import uuid
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlsplit

import httpx

from .annotator import Report, merge, run_pipeline
from .doctree import escape_text
from .errors import MannersError, SchemaError, TemplateFetchError
from .regexes import compile_rule_regex
from .repository import RepositoryClient, SubscriptionStore
from .rules import Subscription, subscribed_rules

FINDINGS_HEADER = "X-Manners-Findings"
DIAGNOSTIC_HEADER = "X-Manners-Diagnostic"
UID_COOKIE = "manners_uid"

HOP_BY_HOP = frozenset({
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "te", "trailer", "trailers", "transfer-encoding", "upgrade",
})

STATIC_DIR = Path(__file__).parent / "static"


@dataclass
class StrictSave:
    endpoint_pattern: str
    content_field: str


@dataclass
class ProxyConfig:
    """Proxy settings; see README for the config file keys."""

    listen_address: str = "127.0.0.1:8080"
    mode: str = "reverse"
    upstream: Optional[str] = None
    repos: list[str] = field(default_factory=list)
    default_subscription: Subscription = field(
        default_factory=lambda: Subscription(user_id=""))
    eligible_content_types: list[str] = field(default_factory=lambda: ["text/html"])
    overlay_enabled: bool = True
    strict_save: Optional[StrictSave] = None
    checker_allowlist: dict[str, list[str]] = field(default_factory=dict)
    origin_timeout_ms: int = 10000
    max_body_bytes: int = 4 * 1024 * 1024
    cache_dir: str = "~/.manners/cache"
    subscriptions_path: str = "~/.manners/subscriptions.json"
    strict_decoding: bool = False

    def validate(self) -> None:
        if self.mode not in ("forward", "reverse"):
            raise SchemaError(f"config: mode must be 'forward' or 'reverse', got {self.mode!r}")
        if self.mode == "reverse" and not self.upstream:
            raise SchemaError("config: reverse mode requires an upstream origin URL")
        if self.strict_save is not None:
            if not self.strict_save.endpoint_pattern or not self.strict_save.content_field:
                raise SchemaError(
                    "config: strict_save requires endpoint_pattern and content_field")
            compile_rule_regex(self.strict_save.endpoint_pattern)
        if self.max_body_bytes <= 0:
            raise SchemaError("config: max_body_bytes must be positive")
        if self.origin_timeout_ms <= 0:
            raise SchemaError("config: origin_timeout_ms must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "ProxyConfig":
        known = {
            "listen", "mode", "upstream", "repos", "default_subscription",
            "eligible_content_types", "overlay_enabled", "strict_save",
            "checker_allowlist", "origin_timeout_ms", "max_body_bytes",
            "cache_dir", "subscriptions_path", "strict_decoding",
        }
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"config: unknown key(s) {sorted(unknown)}")
        strict_save = None
        if raw.get("strict_save") is not None:
            ss = raw["strict_save"]
            if not isinstance(ss, dict) or set(ss) - {"endpoint_pattern", "content_field"}:
                raise SchemaError("config: strict_save takes endpoint_pattern and content_field")
            strict_save = StrictSave(
                endpoint_pattern=str(ss.get("endpoint_pattern", "")),
                content_field=str(ss.get("content_field", "")),
            )
        default_sub = Subscription(user_id="")
        if raw.get("default_subscription") is not None:
            default_sub = Subscription.from_dict(raw["default_subscription"])
        allowlist = {}
        for cid, argv in (raw.get("checker_allowlist") or {}).items():
            allowlist[str(cid)] = [argv] if isinstance(argv, str) else [str(a) for a in argv]
        config = cls(
            listen_address=str(raw.get("listen", cls.listen_address)),
            mode=str(raw.get("mode", "reverse")),
            upstream=raw.get("upstream"),
            repos=[str(r) for r in raw.get("repos", [])],
            default_subscription=default_sub,
            eligible_content_types=[str(t).lower() for t in
                                    raw.get("eligible_content_types", ["text/html"])],
            overlay_enabled=bool(raw.get("overlay_enabled", True)),
            strict_save=strict_save,
            checker_allowlist=allowlist,
            origin_timeout_ms=int(raw.get("origin_timeout_ms", 10000)),
            max_body_bytes=int(raw.get("max_body_bytes", 4 * 1024 * 1024)),
            cache_dir=str(raw.get("cache_dir", cls.cache_dir)),
            subscriptions_path=str(raw.get("subscriptions_path", cls.subscriptions_path)),
            strict_decoding=bool(raw.get("strict_decoding", False)),
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path, *, env: Optional[dict] = None) -> "ProxyConfig":
        import os

        env = env if env is not None else dict(os.environ)
        raw = json.loads(Path(path).expanduser().read_text())
        if env.get("MANNERS_LISTEN"):
            raw["listen"] = env["MANNERS_LISTEN"]
        return cls.from_dict(raw)


class ProxyServer:
    """Owns the shared state: config, rule cache, subscriptions, HTTP clients."""

    def __init__(self, config: ProxyConfig) -> None:
        config.validate()
        self.config = config
        self.repo_client = RepositoryClient(
            config.cache_dir, timeout_s=config.origin_timeout_ms / 1000.0)
        self.subscriptions = SubscriptionStore(
            config.subscriptions_path, default_subscription=config.default_subscription)
        self.origin = httpx.Client(
            timeout=config.origin_timeout_ms / 1000.0, follow_redirects=False)
        self.loaded, self.load_diagnostics = self.repo_client.load_all(
            config.repos, checker_allowlist=config.checker_allowlist)
        self._template_cache: dict[str, str] = {}
        self._template_lock = threading.Lock()
        # parsed trees are immutable and shareable; cache them by content
        # digest so repeat views skip re-parsing
        self._tree_cache: "OrderedDict[tuple, object]" = OrderedDict()
        self._tree_lock = threading.Lock()
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    # -- lifecycle

    def bind(self) -> tuple[str, int]:
        """Bind the listening socket; returns the actual (host, port)."""
        if self._httpd is None:
            host, _, port = self.config.listen_address.rpartition(":")
            server = _Server((host or "127.0.0.1", int(port)), _Handler)
            server.proxy = self
            self._httpd = server
        address = self._httpd.server_address
        return address[0], address[1]

    def start(self) -> tuple[str, int]:
        """Bind and serve in a background thread; returns (host, port)."""
        host, port = self.bind()
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05),
            daemon=True)
        self._thread.start()
        return host, port

    def serve_forever(self) -> None:
        self.bind()
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.origin.close()
        self.repo_client.close()

    # -- shared helpers

    def fetch_template(self, url: str) -> str:
        with self._template_lock:
            cached = self._template_cache.get(url)
        if cached is not None:
            return cached
        try:
            resp = self.origin.get(url)
        except httpx.HTTPError as exc:
            raise TemplateFetchError(f"cannot fetch template {url}: {exc}") from None
        if resp.status_code != 200:
            raise TemplateFetchError(f"template fetch {url} returned HTTP {resp.status_code}")
        with self._template_lock:
            self._template_cache[url] = resp.text
        return resp.text

    def candidates_for(self, user_id: str) -> tuple[list, list[dict]]:
        sub = self.subscriptions.get(user_id)
        candidates, diags = subscribed_rules(sub, self.loaded)
        return candidates, list(self.load_diagnostics) + diags

    TREE_CACHE_SIZE = 64

    def cached_tree(self, url: str, body: bytes, charset: Optional[str]):
        """Parsed tree for these exact bytes, or None (parse failures are
        not cached so the pipeline can report them per request)."""
        import hashlib

        from .annotator import parse_html
        from .errors import EncodingError

        key = (hashlib.sha256(body).hexdigest(), url, charset,
               self.config.strict_decoding)
        with self._tree_lock:
            tree = self._tree_cache.get(key)
            if tree is not None:
                self._tree_cache.move_to_end(key)
                return tree
        try:
            tree = parse_html(body, declared_encoding=charset, url=url,
                              strict_decoding=self.config.strict_decoding)
        except (EncodingError, ValueError):
            return None
        with self._tree_lock:
            self._tree_cache[key] = tree
            while len(self._tree_cache) > self.TREE_CACHE_SIZE:
                self._tree_cache.popitem(last=False)
        return tree


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    proxy: ProxyServer


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _Server

    # quiet by default; BaseHTTPRequestHandler logs to stderr otherwise
    def log_message(self, format: str, *args: object) -> None:
        pass

    # -- plumbing

    @property
    def proxy(self) -> ProxyServer:
        return self.server.proxy

    def _user_id(self) -> tuple[str, bool]:
        """(user id, needs Set-Cookie)."""
        header = self.headers.get("Cookie", "")
        for part in header.split(";"):
            name, _, value = part.strip().partition("=")
            if name == UID_COOKIE and value:
                return value, False
        return uuid.uuid4().hex, True

    def _respond(self, status: int, headers: list[tuple[str, str]], body: bytes,
                 set_cookie: Optional[str] = None) -> None:
        self.send_response(status)
        seen_length = False
        for name, value in headers:
            if name.lower() == "content-length":
                seen_length = True
            self.send_header(name, value)
        if not seen_length:
            self.send_header("Content-Length", str(len(body)))
        if set_cookie:
            self.send_header(
                "Set-Cookie", f"{UID_COOKIE}={set_cookie}; Path=/; HttpOnly; SameSite=Lax")
        self.end_headers()
        if self.command != "HEAD" and body:
            self.wfile.write(body)

    def _respond_json(self, status: int, payload: dict,
                      set_cookie: Optional[str] = None) -> None:
        body = json.dumps(payload, indent=2).encode("utf-8")
        self._respond(status, [("Content-Type", "application/json; charset=utf-8")],
                      body, set_cookie)

    def _read_request_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length > 0 else b""

    def _target_url(self) -> Optional[str]:
        if self.path.startswith("http://") or self.path.startswith("https://"):
            return self.path if self.proxy.config.mode == "forward" else None
        if self.proxy.config.mode == "reverse":
            return self.proxy.config.upstream.rstrip("/") + self.path
        return None

    # -- HTTP methods

    def do_GET(self) -> None:
        self._route()

    def do_HEAD(self) -> None:
        self._route()

    def do_POST(self) -> None:
        self._route()

    def do_PUT(self) -> None:
        self._route()

    def do_DELETE(self) -> None:
        self._route()

    def do_PATCH(self) -> None:
        self._route()

    def do_OPTIONS(self) -> None:
        self._route()

    def _route(self) -> None:
        try:
            path = urlsplit(self.path).path
            if path == "/_manners" or path.startswith("/_manners/"):
                self._management(path)
                return
            url = self._target_url()
            if url is None:
                self._respond(400, [("Content-Type", "text/plain; charset=utf-8")],
                              b"manners proxy: cannot derive a target URL "
                              b"for this request in the current mode\n")
                return
            if (self.command == "POST" and self.proxy.config.strict_save is not None
                    and re.search(self.proxy.config.strict_save.endpoint_pattern, url)):
                self._check_save(url)
                return
            self._proxy_pass(url)
        except (BrokenPipeError, ConnectionResetError):
            pass

    # -- origin proxying

    def _upstream_headers(self) -> dict:
        headers = {}
        for name, value in self.headers.items():
            lname = name.lower()
            if lname in HOP_BY_HOP or lname in ("host", "content-length", "accept-encoding"):
                continue
            if lname == "cookie":
                kept = [p.strip() for p in value.split(";")
                        if p.strip().partition("=")[0] != UID_COOKIE]
                if kept:
                    headers["Cookie"] = "; ".join(kept)
                continue
            headers[name] = value
        headers["Accept-Encoding"] = "gzip, deflate"
        return headers

    def _response_headers(self, resp: httpx.Response,
                          drop_encoding: bool = False) -> list[tuple[str, str]]:
        out = []
        upstream = self.proxy.config.upstream
        for name, value in resp.headers.multi_items():
            lname = name.lower()
            if lname in HOP_BY_HOP or lname == "content-length":
                continue
            if drop_encoding and lname == "content-encoding":
                continue
            if (lname == "location" and self.proxy.config.mode == "reverse"
                    and upstream and value.startswith(upstream.rstrip("/"))):
                value = value[len(upstream.rstrip("/")):] or "/"
            out.append((name, value))
        return out

    def _proxy_pass(self, url: str) -> None:
        user_id, new_user = self._user_id()
        body = self._read_request_body()
        try:
            upstream_req = self.proxy.origin.build_request(
                self.command, url, headers=self._upstream_headers(), content=body)
            resp = self.proxy.origin.send(upstream_req, stream=True)
        except httpx.HTTPError as exc:
            self._respond(502, [("Content-Type", "text/plain; charset=utf-8")],
                          f"manners proxy: origin unreachable: {exc}\n".encode(),
                          set_cookie=user_id if new_user else None)
            return

        try:
            limit = self.proxy.config.max_body_bytes
            raw = bytearray()
            overflow = False
            iterator = resp.iter_raw()
            for chunk in iterator:
                raw.extend(chunk)
                if len(raw) > limit:
                    overflow = True
                    break

            if self.command == "HEAD":
                headers = self._response_headers(resp)
                length = resp.headers.get("content-length")
                if length is not None:
                    headers.append(("Content-Length", length))
                else:
                    headers.append(("Content-Length", "0"))
                self._respond(resp.status_code, headers, b"",
                              set_cookie=user_id if new_user else None)
                return

            if overflow:
                self._stream_through(resp, bytes(raw), iterator,
                                     set_cookie=user_id if new_user else None)
                return

            self._finish_buffered(url, resp, bytes(raw), user_id, new_user)
        finally:
            resp.close()

    def _stream_through(self, resp: httpx.Response, head: bytes, iterator,
                        set_cookie: Optional[str]) -> None:
        """Over-limit body: pass through unannotated, chunk by chunk."""
        self.send_response(resp.status_code)
        total_known = resp.headers.get("content-length")
        for name, value in self._response_headers(resp):
            self.send_header(name, value)
        if total_known is not None:
            self.send_header("Content-Length", total_known)
        else:
            self.send_header("Connection", "close")
            self.close_connection = True
        self.send_header(DIAGNOSTIC_HEADER, "body-over-size-limit")
        if set_cookie:
            self.send_header(
                "Set-Cookie", f"{UID_COOKIE}={set_cookie}; Path=/; HttpOnly; SameSite=Lax")
        self.end_headers()
        self.wfile.write(head)
        for chunk in iterator:
            self.wfile.write(chunk)

    def _finish_buffered(self, url: str, resp: httpx.Response, raw: bytes,
                         user_id: str, new_user: bool) -> None:
        cookie = user_id if new_user else None
        content_type = resp.headers.get("content-type", "")
        base_type = content_type.split(";")[0].strip().lower()
        encoding = resp.headers.get("content-encoding", "").strip().lower()
        eligible = (
            resp.status_code == 200
            and base_type in self.proxy.config.eligible_content_types
            and encoding in ("", "identity", "gzip", "deflate")
            and len(raw) > 0
        )
        if not eligible:
            headers = self._response_headers(resp)
            if encoding not in ("", "identity", "gzip", "deflate") \
                    and base_type in self.proxy.config.eligible_content_types:
                headers.append((DIAGNOSTIC_HEADER, "unsupported-content-encoding"))
            self._respond(resp.status_code, headers, raw, set_cookie=cookie)
            return

        body = raw
        if encoding in ("gzip", "deflate"):
            try:
                body = gzip.decompress(raw) if encoding == "gzip" else zlib.decompress(raw)
            except (OSError, zlib.error):
                headers = self._response_headers(resp)
                headers.append((DIAGNOSTIC_HEADER, "undecodable-content-encoding"))
                self._respond(resp.status_code, headers, raw, set_cookie=cookie)
                return
            if len(body) > self.proxy.config.max_body_bytes:
                headers = self._response_headers(resp)
                headers.append((DIAGNOSTIC_HEADER, "body-over-size-limit"))
                self._respond(resp.status_code, headers, raw, set_cookie=cookie)
                return

        charset = None
        m = re.search(r"charset=([^\s;]+)", content_type, re.IGNORECASE)
        if m:
            charset = m.group(1).strip('"')

        candidates, diagnostics = self.proxy.candidates_for(user_id)
        try:
            cached = self.proxy.cached_tree(url, body, charset)
            report, tree = run_pipeline(
                url, body, candidates,
                declared_encoding=charset,
                strict_decoding=self.proxy.config.strict_decoding,
                checker_allowlist=self.proxy.config.checker_allowlist,
                template_fetcher=self.proxy.fetch_template,
                extra_diagnostics=diagnostics,
                tree=cached,
            )
        except Exception:
            report, tree = None, None

        if tree is None:
            # pipeline failure: lightness over annotation, serve the
            # original bytes untouched
            headers = self._response_headers(resp)
            headers.append((FINDINGS_HEADER, "-1"))
            self._respond(resp.status_code, headers, raw, set_cookie=cookie)
            return

        overlay = self.proxy.config.overlay_enabled
        if report.stats.get("rules_fired", 0) == 0 and not overlay:
            headers = self._response_headers(resp)
            headers.append((FINDINGS_HEADER, "0"))
            self._respond(resp.status_code, headers, raw, set_cookie=cookie)
            return

        merged = merge(tree, report, overlay_enabled=overlay)
        headers = self._response_headers(resp, drop_encoding=True)
        headers.append((FINDINGS_HEADER, str(len(report.annotations))))
        self._respond(resp.status_code, headers, merged, set_cookie=cookie)

    # -- strict save

    def _check_save(self, url: str) -> None:
        user_id, new_user = self._user_id()
        cookie = user_id if new_user else None
        body = self._read_request_body()
        config = self.proxy.config
        content_type = (self.headers.get("Content-Type") or "").split(";")[0].strip().lower()

        content: Optional[str] = None
        if content_type in ("application/x-www-form-urlencoded", ""):
            fields = parse_qs(body.decode("utf-8", errors="replace"), keep_blank_values=True)
            values = fields.get(config.strict_save.content_field)
            if values:
                content = values[0]

        if content is not None:
            try:
                scaffold = (
                    "<html><head><title>save check</title></head><body><pre>"
                    + escape_text(content) + "</pre></body></html>"
                ).encode("utf-8")
                candidates, diagnostics = self.proxy.candidates_for(user_id)
                report, tree = run_pipeline(
                    url, scaffold, candidates,
                    checker_allowlist=config.checker_allowlist,
                    template_fetcher=self.proxy.fetch_template,
                    extra_diagnostics=diagnostics,
                )
                if tree is not None and report.error_count > 0:
                    self._respond(422, [("Content-Type", "text/html; charset=utf-8")],
                                  self._blocked_page(report, tree), set_cookie=cookie)
                    return
            except Exception:
                # fail open: enforcement never beats delivery
                pass

        self._forward_save(url, body, cookie)

    def _blocked_page(self, report: Report, tree) -> bytes:
        items = []
        for a in report.annotations:
            if a.severity.value == "error":
                items.append(
                    f"<li><code>{escape_text(a.ruleset_id)}:{escape_text(a.rule_id)}</code> "
                    f"— {escape_text(a.message)}</li>")
        preview = merge(tree, report, overlay_enabled=False).decode("utf-8", errors="replace")
        # lift the annotated <pre> out of the scaffold for display
        m = re.search(r"<pre>.*</pre>", preview, re.DOTALL)
        preview_html = m.group() if m else ""
        page = (
            "<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
            "<title>Save blocked</title></head><body>"
            "<h1>Save blocked</h1>"
            "<p>The submitted content produced error-severity findings; "
            "it was not forwarded. Fix the items below and save again.</p>"
            f"<ul>{''.join(items)}</ul>"
            f"{preview_html}"
            f"<script type=\"application/json\" id=\"manners-save-report\">"
            f"{json.dumps(report.to_dict(), ensure_ascii=False).replace('<', chr(92) + 'u003c')}"
            "</script>"
            "</body></html>"
        )
        return page.encode("utf-8")

    def _forward_save(self, url: str, body: bytes, cookie: Optional[str]) -> None:
        try:
            upstream_req = self.proxy.origin.build_request(
                "POST", url, headers=self._upstream_headers(), content=body)
            resp = self.proxy.origin.send(upstream_req)
        except httpx.HTTPError as exc:
            self._respond(502, [("Content-Type", "text/plain; charset=utf-8")],
                          f"manners proxy: origin unreachable: {exc}\n".encode(),
                          set_cookie=cookie)
            return
        headers = self._response_headers(resp)
        self._respond(resp.status_code, headers, resp.content, set_cookie=cookie)

    # -- management API and overlay assets

    def _management(self, path: str) -> None:
        user_id, new_user = self._user_id()
        cookie = user_id if new_user else None

        if path == "/_manners/api/subscriptions":
            if self.command == "GET":
                self._respond_json(200, self.proxy.subscriptions.get(user_id).to_dict(),
                                   set_cookie=cookie)
            elif self.command == "PUT":
                try:
                    payload = json.loads(self._read_request_body().decode("utf-8"))
                    sub = Subscription.from_dict(payload, user_id=user_id)
                    self.proxy.subscriptions.set(user_id, sub)
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    self._respond_json(400, {"error": f"invalid JSON: {exc}"}, set_cookie=cookie)
                    return
                except MannersError as exc:
                    self._respond_json(400, {"error": str(exc)}, set_cookie=cookie)
                    return
                self._respond_json(200, self.proxy.subscriptions.get(user_id).to_dict(),
                                   set_cookie=cookie)
            else:
                self._respond_json(405, {"error": "method not allowed"}, set_cookie=cookie)
            return

        if path == "/_manners/api/rulesets":
            if self.command != "GET":
                self._respond_json(405, {"error": "method not allowed"}, set_cookie=cookie)
                return
            repos: dict[str, dict] = {}
            for repo_url in self.proxy.config.repos:
                manifest = self.proxy.repo_client.current_manifest(repo_url)
                repos[repo_url] = {
                    "repo_url": repo_url,
                    "repo_id": manifest.repo_id if manifest else None,
                    "rulesets": [],
                }
            for (repo_url, ruleset_id), ruleset in sorted(self.proxy.loaded.items()):
                entry = repos.setdefault(repo_url, {
                    "repo_url": repo_url, "repo_id": None, "rulesets": []})
                entry["rulesets"].append({
                    "ruleset_id": ruleset_id,
                    "version": ruleset.version,
                    "title": ruleset.title,
                    "rule_count": len(ruleset.rules),
                    "rules": [
                        {"id": r.id, "title": r.title, "severity": r.severity.value,
                         "tags": list(r.tags)}
                        for r in ruleset.rules
                    ],
                })
            self._respond_json(200, {
                "repos": [repos[u] for u in sorted(repos)],
                "diagnostics": self.proxy.load_diagnostics,
            }, set_cookie=cookie)
            return

        if path == "/_manners/ui" or path == "/_manners/ui/":
            self._static("index.html", cookie)
            return
        if path.startswith("/_manners/ui/"):
            self._static(path[len("/_manners/ui/"):], cookie)
            return

        self._respond_json(404, {"error": f"unknown api path {path!r}"}, set_cookie=cookie)

    def _static(self, name: str, cookie: Optional[str]) -> None:
        if self.command != "GET":
            self._respond_json(405, {"error": "method not allowed"}, set_cookie=cookie)
            return
        if "/" in name or name.startswith(".") or not name:
            self._respond_json(404, {"error": "not found"}, set_cookie=cookie)
            return
        target = STATIC_DIR / name
        if not target.is_file():
            self._respond_json(404, {"error": f"no asset named {name!r}"}, set_cookie=cookie)
            return
        ctype = mimetypes.guess_type(name)[0] or "application/octet-stream"
        if ctype.startswith("text/") or ctype in ("application/javascript", "application/json"):
            ctype += "; charset=utf-8"
        self._respond(200, [("Content-Type", ctype)], target.read_bytes(), set_cookie=cookie)

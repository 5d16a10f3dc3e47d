"""Read-only rule repository client and the local subscription store.

A repository is any web server exposing ``<repo_url>/index.json`` (the
manifest) and the ruleset files it points at::

    {
      "schema_version": 1,
      "repo_id": "community-rules",
      "rulesets": [
        {"ruleset_id": "wiki-basics", "version": "1.2.0",
         "sha256": "<64 hex chars>", "href": "wiki-basics.json",
         "title": "Wiki basics"}
      ]
    }

Ruleset bytes are digest-verified against the manifest before they are
ever parsed or activated; a mismatch quarantines the entry.  Manifests
are fetched conditionally (ETag) and served stale, with a diagnostic,
when the repository is unreachable — repository trouble never blocks
page delivery.

Cache layout (under ``cache_dir``)::

    repos/<key>/manifest.json        verified manifest bytes
    repos/<key>/manifest.meta.json   {"etag": ..., "fetched_at": ...}
    repos/<key>/rulesets/<id>.json   verified ruleset bytes
    repos/<key>/rulesets/<id>.meta.json  {"version": ..., "sha256": ...}

where ``<key>`` is a digest prefix of the repository URL.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional
from urllib.parse import urljoin

import httpx

from .errors import IntegrityError, MannersError, NetworkError, SchemaError, StoreError
from .rules import RuleSet, Subscription, parse_ruleset

_SHA256_HEX = 64


@dataclass(frozen=True)
class ManifestEntry:
    ruleset_id: str
    version: str
    sha256: str
    href: str
    title: str


@dataclass
class Manifest:
    schema_version: int
    repo_id: str
    rulesets: list[ManifestEntry]

    def entry(self, ruleset_id: str) -> Optional[ManifestEntry]:
        for e in self.rulesets:
            if e.ruleset_id == ruleset_id:
                return e
        return None


def parse_manifest(data: bytes | str | dict) -> Manifest:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("manifest must be a JSON object")
    if data.get("schema_version") != 1:
        raise SchemaError(f"manifest: unsupported schema_version {data.get('schema_version')!r}")
    if "repo_id" not in data or "rulesets" not in data:
        raise SchemaError("manifest: repo_id and rulesets are required")
    if not isinstance(data["rulesets"], list):
        raise SchemaError("manifest: rulesets must be a list")
    entries = []
    seen = set()
    for i, raw in enumerate(data["rulesets"]):
        if not isinstance(raw, dict):
            raise SchemaError(f"manifest entry #{i}: must be an object")
        for key in ("ruleset_id", "version", "sha256", "href", "title"):
            if key not in raw:
                raise SchemaError(f"manifest entry #{i}: missing {key!r}")
        sha = str(raw["sha256"]).lower()
        if len(sha) != _SHA256_HEX or any(c not in "0123456789abcdef" for c in sha):
            raise SchemaError(f"manifest entry {raw['ruleset_id']!r}: sha256 must be 64 hex chars")
        entry = ManifestEntry(
            ruleset_id=str(raw["ruleset_id"]),
            version=str(raw["version"]),
            sha256=sha,
            href=str(raw["href"]),
            title=str(raw["title"]),
        )
        if entry.ruleset_id in seen:
            raise SchemaError(f"manifest: duplicate ruleset_id {entry.ruleset_id!r}")
        seen.add(entry.ruleset_id)
        entries.append(entry)
    return Manifest(schema_version=1, repo_id=str(data["repo_id"]), rulesets=entries)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class RepositoryClient:
    """Fetches and caches manifests and digest-verified rulesets."""

    def __init__(self, cache_dir: str | Path, *,
                 http_client: Optional[httpx.Client] = None,
                 timeout_s: float = 10.0) -> None:
        self.cache_dir = Path(cache_dir).expanduser()
        self._http = http_client or httpx.Client(timeout=timeout_s, follow_redirects=True)
        self._manifests: dict[str, Manifest] = {}
        self._lock = threading.Lock()

    def close(self) -> None:
        self._http.close()

    def _repo_dir(self, repo_url: str) -> Path:
        key = hashlib.sha256(repo_url.encode("utf-8")).hexdigest()[:16]
        return self.cache_dir / "repos" / key

    @staticmethod
    def manifest_url(repo_url: str) -> str:
        return repo_url.rstrip("/") + "/index.json"

    # -- manifests

    def fetch_manifest(self, repo_url: str) -> tuple[Manifest, list[dict]]:
        """Fetch (conditionally) and validate the repository manifest.

        Falls back to the cached copy, with a staleness diagnostic, when
        the repository is unreachable; raises NetworkError only with a
        cold cache.
        """
        diagnostics: list[dict] = []
        repo_dir = self._repo_dir(repo_url)
        cache_path = repo_dir / "manifest.json"
        meta_path = repo_dir / "manifest.meta.json"
        etag = None
        if meta_path.exists():
            try:
                etag = json.loads(meta_path.read_text()).get("etag")
            except (OSError, json.JSONDecodeError):
                etag = None

        headers = {}
        if etag and cache_path.exists():
            headers["If-None-Match"] = etag
        try:
            resp = self._http.get(self.manifest_url(repo_url), headers=headers)
        except httpx.HTTPError as exc:
            if cache_path.exists():
                manifest = parse_manifest(cache_path.read_bytes())
                diagnostics.append({
                    "kind": "stale-manifest",
                    "repo_url": repo_url,
                    "message": f"repository unreachable ({exc}); serving cached manifest",
                })
                with self._lock:
                    self._manifests[repo_url] = manifest
                return manifest, diagnostics
            raise NetworkError(f"cannot fetch manifest from {repo_url}: {exc}") from None

        if resp.status_code == 304 and cache_path.exists():
            manifest = parse_manifest(cache_path.read_bytes())
        elif resp.status_code == 200:
            manifest = parse_manifest(resp.content)
            _atomic_write(cache_path, resp.content)
            meta = {"etag": resp.headers.get("etag"), "fetched_at": time.time()}
            _atomic_write(meta_path, json.dumps(meta).encode())
        else:
            raise NetworkError(
                f"manifest fetch from {repo_url} returned HTTP {resp.status_code}")
        with self._lock:
            self._manifests[repo_url] = manifest
        return manifest, diagnostics

    def current_manifest(self, repo_url: str) -> Optional[Manifest]:
        with self._lock:
            return self._manifests.get(repo_url)

    # -- rulesets

    def fetch_ruleset(self, repo_url: str, ruleset_id: str, *,
                      checker_allowlist: Optional[Mapping[str, list[str]]] = None) -> RuleSet:
        """Fetch one ruleset, verifying its digest against the manifest
        before parsing.  A digest mismatch raises IntegrityError and the
        bytes are never cached or activated."""
        manifest = self.current_manifest(repo_url)
        if manifest is None:
            manifest, _ = self.fetch_manifest(repo_url)
        entry = manifest.entry(ruleset_id)
        if entry is None:
            raise SchemaError(f"ruleset {ruleset_id!r} is not in the manifest of {repo_url}")

        repo_dir = self._repo_dir(repo_url)
        cache_path = repo_dir / "rulesets" / f"{entry.ruleset_id}.json"
        meta_path = repo_dir / "rulesets" / f"{entry.ruleset_id}.meta.json"
        data: Optional[bytes] = None
        if cache_path.exists() and meta_path.exists():
            try:
                meta = json.loads(meta_path.read_text())
            except (OSError, json.JSONDecodeError):
                meta = {}
            if meta.get("version") == entry.version and meta.get("sha256") == entry.sha256:
                cached = cache_path.read_bytes()
                if hashlib.sha256(cached).hexdigest() == entry.sha256:
                    data = cached

        if data is None:
            url = urljoin(self.manifest_url(repo_url), entry.href)
            try:
                resp = self._http.get(url)
            except httpx.HTTPError as exc:
                raise NetworkError(f"cannot fetch ruleset {ruleset_id!r}: {exc}") from None
            if resp.status_code != 200:
                raise NetworkError(
                    f"ruleset fetch {url} returned HTTP {resp.status_code}")
            digest = hashlib.sha256(resp.content).hexdigest()
            if digest != entry.sha256:
                raise IntegrityError(
                    f"ruleset {ruleset_id!r} from {repo_url}: digest mismatch "
                    f"(manifest {entry.sha256}, fetched {digest}); entry quarantined")
            data = resp.content
            _atomic_write(cache_path, data)
            _atomic_write(meta_path, json.dumps(
                {"version": entry.version, "sha256": entry.sha256,
                 "fetched_at": time.time()}).encode())

        return parse_ruleset(data, checker_allowlist=checker_allowlist)

    def load_all(self, repo_urls: list[str], *,
                 checker_allowlist: Optional[Mapping[str, list[str]]] = None,
                 ) -> tuple[dict[tuple[str, str], RuleSet], list[dict]]:
        """Load every ruleset of every repository, degrading per entry."""
        loaded: dict[tuple[str, str], RuleSet] = {}
        diagnostics: list[dict] = []
        for repo_url in repo_urls:
            try:
                manifest, diags = self.fetch_manifest(repo_url)
                diagnostics.extend(diags)
            except (NetworkError, SchemaError) as exc:
                diagnostics.append({
                    "kind": "repo-unavailable", "repo_url": repo_url, "message": str(exc)})
                continue
            for entry in manifest.rulesets:
                try:
                    loaded[(repo_url, entry.ruleset_id)] = self.fetch_ruleset(
                        repo_url, entry.ruleset_id, checker_allowlist=checker_allowlist)
                except MannersError as exc:
                    diagnostics.append({
                        "kind": "ruleset-unavailable",
                        "repo_url": repo_url,
                        "ruleset_id": entry.ruleset_id,
                        "message": str(exc),
                    })
        return loaded, diagnostics


class SubscriptionStore:
    """Per-user subscriptions in one JSON file, written atomically.

    Reads serve the last published snapshot; writes are serialized by a
    lock and land via rename so readers never see a partial file.
    """

    def __init__(self, path: str | Path, default_subscription: Optional[Subscription] = None):
        self.path = Path(path).expanduser()
        self.default_subscription = default_subscription or Subscription(user_id="")
        self._lock = threading.Lock()
        self._users: dict[str, dict] = {}
        if self.path.exists():
            try:
                raw = json.loads(self.path.read_text())
                self._users = dict(raw.get("users", {}))
            except (OSError, json.JSONDecodeError) as exc:
                raise StoreError(f"cannot read subscription store {self.path}: {exc}") from None

    def get(self, user_id: str) -> Subscription:
        with self._lock:
            raw = self._users.get(user_id)
        if raw is None:
            return Subscription(user_id=user_id,
                                entries=list(self.default_subscription.entries))
        return Subscription.from_dict(raw, user_id=user_id)

    def set(self, user_id: str, sub: Subscription) -> None:
        payload = sub.to_dict()
        payload.pop("user_id", None)
        with self._lock:
            self._users[user_id] = payload
            try:
                _atomic_write(self.path, json.dumps(
                    {"users": self._users}, indent=2).encode())
            except OSError as exc:
                raise StoreError(f"cannot write subscription store {self.path}: {exc}") from None

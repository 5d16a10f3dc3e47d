"""Repository client: fetch, digest verification, cache, subscriptions."""

import json
import threading

import pytest

from manners.errors import IntegrityError, NetworkError, StoreError
from manners.repository import RepositoryClient, SubscriptionStore, parse_manifest
from manners.rules import Subscription, SubscriptionEntry


def ruleset_doc(rsid="rs", version="1.0", pattern="badword"):
    return {
        "schema_version": 1, "id": rsid, "version": version, "title": rsid,
        "rules": [{
            "id": "r1", "title": "t", "description": "d", "severity": "warning",
            "firing": {"url_pattern": "."},
            "active": {"kind": "regex-filter",
                       "params": {"pattern": pattern, "message": "m"}},
        }],
    }


class TestManifestParsing:
    def test_two_entries(self):
        doc = {"schema_version": 1, "repo_id": "repo", "rulesets": [
            {"ruleset_id": "a", "version": "1", "sha256": "0" * 64,
             "href": "a.json", "title": "A"},
            {"ruleset_id": "b", "version": "2", "sha256": "f" * 64,
             "href": "b.json", "title": "B"},
        ]}
        manifest = parse_manifest(json.dumps(doc).encode())
        assert [e.ruleset_id for e in manifest.rulesets] == ["a", "b"]

    def test_bad_digest_length_rejected(self):
        from manners.errors import SchemaError

        doc = {"schema_version": 1, "repo_id": "repo", "rulesets": [
            {"ruleset_id": "a", "version": "1", "sha256": "abc",
             "href": "a.json", "title": "A"}]}
        with pytest.raises(SchemaError, match="sha256"):
            parse_manifest(doc)

    def test_duplicate_ruleset_id_rejected(self):
        from manners.errors import SchemaError

        entry = {"ruleset_id": "a", "version": "1", "sha256": "0" * 64,
                 "href": "a.json", "title": "A"}
        doc = {"schema_version": 1, "repo_id": "repo", "rulesets": [entry, entry]}
        with pytest.raises(SchemaError, match="duplicate"):
            parse_manifest(doc)


class TestFetchManifest:
    def test_fresh_fetch(self, mock_server, tmp_path):
        mock_server.add_repo("/repo", "community", {
            "rs-a": ruleset_doc("rs-a"), "rs-b": ruleset_doc("rs-b")})
        client = RepositoryClient(tmp_path / "cache")
        manifest, diags = client.fetch_manifest(mock_server.url + "/repo")
        assert len(manifest.rulesets) == 2
        assert diags == []
        client.close()

    def test_not_modified_served_from_cache(self, mock_server, tmp_path):
        mock_server.add_repo("/repo", "community", {"rs": ruleset_doc()},
                             etag='"v1"')
        client = RepositoryClient(tmp_path / "cache")
        repo_url = mock_server.url + "/repo"
        client.fetch_manifest(repo_url)
        manifest, _ = client.fetch_manifest(repo_url)
        assert manifest.repo_id == "community"
        requests = [r for r in mock_server.requests if r.path == "/repo/index.json"]
        assert requests[1].headers.get("If-None-Match") == '"v1"'
        client.close()

    def test_unreachable_with_warm_cache_serves_stale(self, tmp_path):
        from conftest import MockServer

        server = MockServer()
        server.start()
        server.add_repo("/repo", "community", {"rs": ruleset_doc()})
        repo_url = server.url + "/repo"
        client = RepositoryClient(tmp_path / "cache", timeout_s=1.0)
        client.fetch_manifest(repo_url)
        client.close()
        server.stop()

        # fresh client, warm disk cache, dead repository
        client = RepositoryClient(tmp_path / "cache", timeout_s=1.0)
        manifest, diags = client.fetch_manifest(repo_url)
        assert manifest.repo_id == "community"
        assert diags[0]["kind"] == "stale-manifest"
        client.close()

    def test_unreachable_cold_cache_raises(self, tmp_path):
        client = RepositoryClient(tmp_path / "cache", timeout_s=0.5)
        with pytest.raises(NetworkError):
            client.fetch_manifest("http://127.0.0.1:1/repo")
        client.close()


class TestFetchRuleset:
    def test_verified_fetch(self, mock_server, tmp_path):
        mock_server.add_repo("/repo", "community", {"rs": ruleset_doc()})
        client = RepositoryClient(tmp_path / "cache")
        ruleset = client.fetch_ruleset(mock_server.url + "/repo", "rs")
        assert ruleset.id == "rs" and len(ruleset.rules) == 1
        client.close()

    def test_flipped_byte_never_activates(self, mock_server, tmp_path):
        doc = ruleset_doc()
        raw = json.dumps(doc).encode()
        tampered = bytearray(raw)
        tampered[7] ^= 0x01
        mock_server.add_repo("/repo", "community", {"rs": doc},
                             tamper={"rs": bytes(tampered)})
        client = RepositoryClient(tmp_path / "cache")
        with pytest.raises(IntegrityError, match="quarantined"):
            client.fetch_ruleset(mock_server.url + "/repo", "rs")
        # nothing cached for the quarantined entry
        assert not list((tmp_path / "cache").rglob("rs.json"))
        client.close()

    def test_version_bump_refetches_exactly_once(self, mock_server, tmp_path):
        repo_url = mock_server.url + "/repo"
        client = RepositoryClient(tmp_path / "cache")

        mock_server.add_repo("/repo", "community", {"rs": ruleset_doc(version="1.0")})
        client.fetch_manifest(repo_url)
        client.fetch_ruleset(repo_url, "rs")
        client.fetch_ruleset(repo_url, "rs")
        assert mock_server.hit_counts.get("/repo/rs.json") == 1

        mock_server.add_repo("/repo", "community",
                             {"rs": ruleset_doc(version="2.0", pattern="other")})
        client.fetch_manifest(repo_url)
        ruleset = client.fetch_ruleset(repo_url, "rs")
        client.fetch_ruleset(repo_url, "rs")
        assert mock_server.hit_counts.get("/repo/rs.json") == 2
        assert ruleset.version == "2.0"
        client.close()

    def test_load_all_degrades_per_entry(self, mock_server, tmp_path):
        good = ruleset_doc("good")
        bad = ruleset_doc("bad")
        raw_bad = json.dumps(bad).encode()
        flipped = bytearray(raw_bad)
        flipped[5] ^= 0xFF
        mock_server.add_repo("/repo", "community", {"good": good, "bad": bad},
                             tamper={"bad": bytes(flipped)})
        client = RepositoryClient(tmp_path / "cache")
        loaded, diags = client.load_all([mock_server.url + "/repo"])
        assert (mock_server.url + "/repo", "good") in loaded
        assert len(loaded) == 1
        assert any(d["kind"] == "ruleset-unavailable" and d["ruleset_id"] == "bad"
                   for d in diags)
        client.close()


class TestSubscriptionStore:
    def test_unknown_user_gets_default(self, tmp_path):
        default = Subscription("", [SubscriptionEntry("http://r", "rs")])
        store = SubscriptionStore(tmp_path / "subs.json", default_subscription=default)
        sub = store.get("nobody")
        assert sub.user_id == "nobody"
        assert sub.entries == default.entries

    def test_write_then_read_round_trips(self, tmp_path):
        store = SubscriptionStore(tmp_path / "subs.json")
        sub = Subscription("u1", [SubscriptionEntry(
            "http://r", "rs", disabled_rule_ids=frozenset({"r9"}))])
        store.set("u1", sub)
        assert store.get("u1").entries == sub.entries

    def test_persistence_across_instances(self, tmp_path):
        path = tmp_path / "subs.json"
        store = SubscriptionStore(path)
        store.set("u1", Subscription("u1", [SubscriptionEntry("http://r", "rs")]))
        again = SubscriptionStore(path)
        assert again.get("u1").entries == (
            [SubscriptionEntry("http://r", "rs")])

    def test_interleaved_writers_both_retained(self, tmp_path):
        store = SubscriptionStore(tmp_path / "subs.json")
        subs = {
            f"user-{i}": Subscription(
                f"user-{i}", [SubscriptionEntry("http://r", f"rs-{i}")])
            for i in range(8)
        }
        threads = [threading.Thread(target=store.set, args=(uid, sub))
                   for uid, sub in subs.items()]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        fresh = SubscriptionStore(tmp_path / "subs.json")
        for uid, sub in subs.items():
            assert fresh.get(uid).entries == sub.entries

    def test_corrupt_store_raises_store_error(self, tmp_path):
        path = tmp_path / "subs.json"
        path.write_text("{nope")
        with pytest.raises(StoreError):
            SubscriptionStore(path)

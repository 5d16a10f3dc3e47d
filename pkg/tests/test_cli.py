"""CLI surface: exit codes, stream discipline, cache sync."""

import json
import subprocess
import sys

from manners.cli import run

from conftest import MockServer


def write_ruleset(tmp_path, severity="error", pattern="badword", name="rules.json"):
    doc = {
        "schema_version": 1, "id": "rs", "version": "1.0", "title": "t",
        "rules": [{
            "id": "r1", "title": "t", "description": "d", "severity": severity,
            "firing": {"url_pattern": "."},
            "active": {"kind": "regex-filter",
                       "params": {"pattern": pattern, "message": "flagged"}},
        }],
    }
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def write_page(tmp_path, body=b"<html><body><p>clean text</p></body></html>"):
    page = tmp_path / "page.html"
    page.write_bytes(body)
    return page


class TestCheck:
    def test_clean_page_exits_zero_with_report(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path)
        page = write_page(tmp_path)
        code = run(["check", "--rules", str(rules), str(page)])
        out, err = capsys.readouterr()
        assert code == 0
        report = json.loads(out)
        assert report["annotations"] == []
        assert report["url"].startswith("file://")

    def test_error_finding_exits_one(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path)
        page = write_page(tmp_path, b"<p>a badword</p>")
        code = run(["check", "--rules", str(rules), str(page)])
        out, _ = capsys.readouterr()
        assert code == 1
        report = json.loads(out)
        assert len(report["annotations"]) == 1
        assert report["annotations"][0]["severity"] == "error"

    def test_warning_finding_exits_zero(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path, severity="warning")
        page = write_page(tmp_path, b"<p>a badword</p>")
        assert run(["check", "--rules", str(rules), str(page)]) == 0

    def test_malformed_ruleset_exits_two_with_empty_stdout(self, tmp_path, capsys):
        bad = tmp_path / "malformed.json"
        bad.write_text('{"schema_version": 7}')
        page = write_page(tmp_path)
        code = run(["check", "--rules", str(bad), str(page)])
        out, err = capsys.readouterr()
        assert code == 2
        assert out == ""
        assert "schema_version" in err

    def test_url_flag_drives_firing(self, tmp_path, capsys):
        doc = {
            "schema_version": 1, "id": "rs", "version": "1.0", "title": "t",
            "rules": [{
                "id": "r1", "title": "t", "description": "d", "severity": "error",
                "firing": {"url_pattern": "^https://wiki\\.example\\.org/"},
                "active": {"kind": "regex-filter",
                           "params": {"pattern": "badword", "message": "m"}},
            }],
        }
        rules = tmp_path / "rules.json"
        rules.write_text(json.dumps(doc))
        page = write_page(tmp_path, b"<p>badword</p>")

        assert run(["check", "--rules", str(rules), str(page)]) == 0  # file:// url
        capsys.readouterr()
        code = run(["check", "--rules", str(rules),
                    "--url", "https://wiki.example.org/Page", str(page)])
        out, _ = capsys.readouterr()
        assert code == 1
        assert json.loads(out)["stats"]["rules_fired"] == 1

    def test_stdin_page(self, tmp_path, capsys, monkeypatch):
        import io

        rules = write_ruleset(tmp_path)
        monkeypatch.setattr(
            sys, "stdin",
            type("S", (), {"buffer": io.BytesIO(b"<p>badword</p>")})())
        code = run(["check", "--rules", str(rules), "-"])
        out, _ = capsys.readouterr()
        assert code == 1
        assert len(json.loads(out)["annotations"]) == 1

    def test_ruleset_from_url(self, tmp_path, capsys):
        server = MockServer()
        server.start()
        try:
            doc = json.loads(write_ruleset(tmp_path).read_text())
            server.routes["/rules.json"] = {
                "body": json.dumps(doc).encode(),
                "headers": [("Content-Type", "application/json")]}
            page = write_page(tmp_path, b"<p>badword</p>")
            code = run(["check", "--rules", server.url + "/rules.json", str(page)])
            out, _ = capsys.readouterr()
            assert code == 1
        finally:
            server.stop()


class TestAnnotate:
    def test_html_on_stdout_report_on_stderr(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path)
        page = write_page(tmp_path, b"<p>a badword</p>")
        code = run(["annotate", "--rules", str(rules), "--report", str(page)])
        out, err = capsys.readouterr()
        assert code == 1
        assert out.startswith("<html>")
        assert "data-manners-rule" in out
        assert json.loads(err)["stats"]["rules_fired"] == 1

    def test_overlay_flag_embeds_report(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path)
        page = write_page(tmp_path, b"<p>a badword</p>")
        run(["annotate", "--rules", str(rules), "--overlay", str(page)])
        out, _ = capsys.readouterr()
        assert 'id="manners-report"' in out

    def test_clean_page_html_unchanged(self, tmp_path, capsys):
        rules = write_ruleset(tmp_path)
        body = b"<html><head></head><body><p>ok</p></body></html>"
        page = write_page(tmp_path, body)
        code = run(["annotate", "--rules", str(rules), str(page)])
        out, _ = capsys.readouterr()
        assert code == 0
        assert out.encode() == body


class TestRepoSync:
    def test_sync_populates_cache(self, tmp_path, capsys):
        server = MockServer()
        server.start()
        try:
            doc = json.loads(write_ruleset(tmp_path).read_text())
            server.add_repo("/repo", "community", {"rs": doc})
            cache = tmp_path / "cache"
            code = run(["repo", "sync", server.url + "/repo",
                        "--cache-dir", str(cache)])
            _, err = capsys.readouterr()
            assert code == 0
            assert "1 ruleset(s)" in err
            assert list(cache.rglob("rs.json"))
        finally:
            server.stop()

    def test_sync_unreachable_exits_two(self, tmp_path, capsys):
        code = run(["repo", "sync", "http://127.0.0.1:1/repo",
                    "--cache-dir", str(tmp_path / "cache")])
        _, err = capsys.readouterr()
        assert code == 2
        assert "error" in err


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        rules = write_ruleset(tmp_path)
        page = write_page(tmp_path, b"<p>a badword</p>")
        proc = subprocess.run(
            [sys.executable, "-m", "manners", "check",
             "--rules", str(rules), str(page)],
            capture_output=True, text=True)
        assert proc.returncode == 1
        assert json.loads(proc.stdout)["annotations"]

    def test_usage_error_exits_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "manners", "check"],
            capture_output=True, text=True)
        assert proc.returncode == 2
        assert proc.stdout == ""

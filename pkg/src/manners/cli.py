"""Command-line entry point.

Subcommands::

    manners check    --rules <file|url> [--url U] [--config C] <page.html|->
    manners annotate --rules <file|url> [--url U] [--config C] [--overlay]
                     [--report] <page.html|->
    manners repo sync <repo_url> [--cache-dir DIR]
    manners serve    [--config FILE]

Exit codes: 0 = no error-severity findings, 1 = at least one, 2 = usage,
configuration, or parse failure.  Machine output (the JSON report from
``check``, the annotated HTML from ``annotate``) goes to stdout only;
every diagnostic goes to stderr.  ``check`` and the proxy run the same
pipeline, so their reports agree for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import httpx

from .annotator import merge, run_pipeline
from .errors import MannersError, NetworkError, TemplateFetchError
from .proxy import ProxyConfig, ProxyServer
from .repository import RepositoryClient
from .rules import RuleSet, parse_ruleset

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


def _load_config(path: Optional[str]) -> Optional[ProxyConfig]:
    if path is None:
        return None
    return ProxyConfig.from_file(path)


def _load_ruleset(source: str, allowlist: dict) -> RuleSet:
    if source.startswith("http://") or source.startswith("https://"):
        resp = httpx.get(source, timeout=10.0, follow_redirects=True)
        resp.raise_for_status()
        data = resp.content
    else:
        data = Path(source).read_bytes()
    return parse_ruleset(data, checker_allowlist=allowlist)


def _read_page(source: str) -> tuple[bytes, str]:
    """Page bytes plus the default URL used for rule firing."""
    if source == "-":
        return sys.stdin.buffer.read(), "file:///dev/stdin"
    path = Path(source)
    return path.read_bytes(), path.resolve().as_uri()


def _make_template_fetcher():
    client = httpx.Client(timeout=10.0, follow_redirects=True)

    def fetch(url: str) -> str:
        try:
            resp = client.get(url)
        except httpx.HTTPError as exc:
            raise TemplateFetchError(f"cannot fetch template {url}: {exc}") from None
        if resp.status_code != 200:
            raise TemplateFetchError(f"template fetch {url} returned HTTP {resp.status_code}")
        return resp.text

    return fetch


def _run_check(args: argparse.Namespace, annotate_mode: bool) -> int:
    config = _load_config(args.config)
    allowlist = config.checker_allowlist if config else {}
    try:
        ruleset = _load_ruleset(args.rules, allowlist)
    except (MannersError, OSError, httpx.HTTPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        body, default_url = _read_page(args.page)
    except OSError as exc:
        print(f"error: cannot read page: {exc}", file=sys.stderr)
        return EXIT_USAGE
    url = args.url or default_url

    candidates = [(ruleset, rule) for rule in ruleset.rules]
    report, tree = run_pipeline(
        url, body, candidates,
        checker_allowlist=allowlist,
        template_fetcher=_make_template_fetcher(),
    )
    if tree is None:
        for diag in report.diagnostics:
            print(f"error: {diag.get('kind')}: {diag.get('message')}", file=sys.stderr)
        return EXIT_USAGE

    if annotate_mode:
        sys.stdout.buffer.write(merge(tree, report, overlay_enabled=args.overlay))
        sys.stdout.buffer.flush()
        if args.report:
            print(report.to_json(), file=sys.stderr)
    else:
        print(report.to_json())

    return EXIT_FINDINGS if report.error_count > 0 else EXIT_OK


def _run_repo_sync(args: argparse.Namespace) -> int:
    client = RepositoryClient(args.cache_dir)
    failed = False
    try:
        manifest, diags = client.fetch_manifest(args.repo_url)
    except MannersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for diag in diags:
        print(f"warning: {diag['kind']}: {diag['message']}", file=sys.stderr)
    print(f"manifest {manifest.repo_id}: {len(manifest.rulesets)} ruleset(s)",
          file=sys.stderr)
    for entry in manifest.rulesets:
        try:
            ruleset = client.fetch_ruleset(args.repo_url, entry.ruleset_id)
            print(f"  {entry.ruleset_id} {ruleset.version}: "
                  f"{len(ruleset.rules)} rule(s) cached", file=sys.stderr)
        except MannersError as exc:
            failed = True
            print(f"  {entry.ruleset_id}: FAILED: {exc}", file=sys.stderr)
    client.close()
    return EXIT_USAGE if failed else EXIT_OK


def _run_serve(args: argparse.Namespace) -> int:
    path = args.config or os.environ.get("MANNERS_CONFIG")
    if not path:
        print("error: serve requires --config or MANNERS_CONFIG", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = ProxyConfig.from_file(path)
    except (MannersError, OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    server = ProxyServer(config)
    for diag in server.load_diagnostics:
        print(f"warning: {diag.get('kind')}: {diag.get('message')}", file=sys.stderr)
    host, port = server.bind()
    print(f"manners proxy listening on {host}:{port} "
          f"({config.mode} mode)", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manners",
        description="Check pages against shared best-practice rulesets, "
                    "annotate them, or run the annotating proxy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_page_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--rules", required=True,
                       help="ruleset JSON file or URL")
        p.add_argument("--url", default=None,
                       help="URL the page should be treated as (default: file:// path)")
        p.add_argument("--config", default=None,
                       help="proxy config file (for the checker allow-list)")
        p.add_argument("page", help="HTML file, or - for stdin")

    p_check = sub.add_parser("check", help="print the JSON report for a page")
    add_page_args(p_check)

    p_annotate = sub.add_parser("annotate", help="print annotated HTML for a page")
    add_page_args(p_annotate)
    p_annotate.add_argument("--overlay", action="store_true",
                            help="inject the overlay script/report as the proxy would")
    p_annotate.add_argument("--report", action="store_true",
                            help="also print the JSON report to stderr")

    p_repo = sub.add_parser("repo", help="repository cache operations")
    repo_sub = p_repo.add_subparsers(dest="repo_command", required=True)
    p_sync = repo_sub.add_parser("sync", help="refresh the local cache of a repository")
    p_sync.add_argument("repo_url")
    p_sync.add_argument("--cache-dir", default="~/.manners/cache")

    p_serve = sub.add_parser("serve", help="run the annotating proxy")
    p_serve.add_argument("--config", default=None,
                         help="config file (default: $MANNERS_CONFIG)")

    return parser


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    try:
        if args.command == "check":
            return _run_check(args, annotate_mode=False)
        if args.command == "annotate":
            return _run_check(args, annotate_mode=True)
        if args.command == "repo":
            return _run_repo_sync(args)
        if args.command == "serve":
            return _run_serve(args)
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

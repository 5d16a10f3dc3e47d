"""External checker subprocess contract.

The snippet goes to the checker on standard input; findings come back on
standard output, one per line, as ``LINE:COL:SEVERITY:MESSAGE`` (1-based
line and column).  Exit 0 means the checker ran (findings or not).  A
nonzero exit with no parseable output, a timeout, or a spawn failure all
degrade to a warning annotation — the page is always served.

Checkers are identified by ``command_id`` and resolved through the proxy
operator's allow-list config, never from the rule file itself.  Runs are
bounded in concurrency and hard-timeouted.
"""

from __future__ import annotations

import subprocess
import threading
from typing import Mapping, Optional

from ..doctree import Node
from ..errors import CheckerNotAllowed, SchemaError
from .base import (
    Annotation,
    Severity,
    TextMap,
    ValidationContext,
    ValidatorKind,
    check_params,
    register,
)

KIND_ID = "external-checker"

MAX_CONCURRENT_CHECKERS = 4
_checker_slots = threading.BoundedSemaphore(MAX_CONCURRENT_CHECKERS)

_SEVERITIES = {"info": Severity.INFO, "warning": Severity.WARNING, "error": Severity.ERROR}


def validate_checker_params(kind_id: str, params: dict,
                            allowlist: Mapping[str, list[str]]) -> None:
    command_id = params.get("command_id")
    if not isinstance(command_id, str) or not command_id:
        raise SchemaError(f"{kind_id}: command_id must be a non-empty string")
    if command_id not in allowlist:
        raise CheckerNotAllowed(
            f"{kind_id}: checker {command_id!r} is not in the operator allow-list"
        )
    timeout = params.get("timeout_ms")
    if not isinstance(timeout, int) or isinstance(timeout, bool) or timeout < 1:
        raise SchemaError(f"{kind_id}: timeout_ms must be a positive integer")


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(
        KIND_ID,
        params,
        required={"command_id": str, "timeout_ms": int},
        optional={},
    )
    validate_checker_params(KIND_ID, params, allowlist)
    return params


def parse_checker_output(stdout: str) -> list[tuple[int, int, Severity, str]]:
    """Parse LINE:COL:SEVERITY:MESSAGE lines; unparseable lines are skipped."""
    findings = []
    for line in stdout.splitlines():
        parts = line.split(":", 3)
        if len(parts) != 4:
            continue
        lineno, col, severity, message = parts
        if not lineno.strip().isdigit() or not col.strip().isdigit():
            continue
        sev = _SEVERITIES.get(severity.strip().lower())
        if sev is None:
            sev = Severity.WARNING
        findings.append((int(lineno), int(col), sev, message))
    return findings


def run_external_checker(ctx: ValidationContext, snippet: str,
                         textmap: Optional[TextMap], params: dict) -> list[Annotation]:
    """Run one allow-listed checker over one snippet.

    ``textmap`` maps snippet offsets back to text-node anchors; pass None
    for page-level-only results.
    """
    command_id = params["command_id"]
    argv = ctx.checker_allowlist.get(command_id)
    if argv is None:
        raise CheckerNotAllowed(f"checker {command_id!r} is not in the operator allow-list")
    if isinstance(argv, str):
        argv = [argv]
    timeout_s = params["timeout_ms"] / 1000.0

    try:
        with _checker_slots:
            proc = subprocess.run(
                list(argv),
                input=snippet.encode("utf-8"),
                capture_output=True,
                timeout=timeout_s,
            )
    except subprocess.TimeoutExpired:
        ctx.diagnostic("checker-timeout", f"checker {command_id!r} timed out "
                       f"after {params['timeout_ms']} ms", command_id=command_id)
        return [ctx.annotation("checker timed out", severity=Severity.WARNING)]
    except OSError as exc:
        ctx.diagnostic("checker-failed", f"checker {command_id!r} could not run: {exc}",
                       command_id=command_id)
        return [ctx.annotation(
            f"checker {command_id!r} could not run", severity=Severity.WARNING)]

    stdout = proc.stdout.decode("utf-8", errors="replace")
    findings = parse_checker_output(stdout)
    if not findings and proc.returncode != 0:
        ctx.diagnostic("checker-failed",
                       f"checker {command_id!r} exited {proc.returncode} with no findings",
                       command_id=command_id, exit_code=proc.returncode)
        return [ctx.annotation(
            f"checker {command_id!r} failed (exit {proc.returncode})",
            severity=Severity.WARNING)]

    line_starts = _line_starts(snippet)
    annotations = []
    for lineno, col, sev, message in findings:
        anchor = None
        if textmap is not None and 1 <= lineno <= len(line_starts):
            offset = line_starts[lineno - 1] + max(col - 1, 0)
            anchor = textmap.anchor(offset, offset + 1)
        annotations.append(ctx.annotation(message, anchor=anchor, severity=sev))
    return annotations


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    annotations: list[Annotation] = []
    for node in matched:
        textmap = TextMap(ctx.tree, node)
        annotations.extend(run_external_checker(ctx, textmap.text, textmap, params))
    return annotations


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset({"external"}),
    validate_params=validate_params,
    run=run,
))

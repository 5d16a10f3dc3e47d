"""Structural check: pages of the same class should share a common shape.

Each assertion counts selector matches inside the matched node's subtree
and flags counts outside [min, max] as a page-level finding.
"""

from __future__ import annotations

from typing import Mapping, Optional

from ..doctree import Node
from ..errors import SchemaError
from ..selector import evaluate, parse_selector
from .base import Annotation, ValidationContext, ValidatorKind, check_params, register

KIND_ID = "structure"


def validate_params(params: dict, allowlist: Mapping[str, list[str]]) -> dict:
    params = check_params(KIND_ID, params, required={"assertions": list}, optional={})
    if not params["assertions"]:
        raise SchemaError(f"{KIND_ID}: assertions must not be empty")
    for i, assertion in enumerate(params["assertions"]):
        where = f"{KIND_ID}: assertion #{i}"
        if not isinstance(assertion, dict):
            raise SchemaError(f"{where}: must be an object")
        unknown = set(assertion) - {"selector", "min", "max", "message"}
        if unknown:
            raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")
        if "selector" not in assertion or "message" not in assertion:
            raise SchemaError(f"{where}: selector and message are required")
        parse_selector(str(assertion["selector"]))
        lo, hi = assertion.get("min"), assertion.get("max")
        if lo is None and hi is None:
            raise SchemaError(f"{where}: at least one of min/max is required")
        for name, bound in (("min", lo), ("max", hi)):
            if bound is not None and (not isinstance(bound, int) or isinstance(bound, bool) or bound < 0):
                raise SchemaError(f"{where}: {name} must be a non-negative integer")
        if lo is not None and hi is not None and lo > hi:
            raise SchemaError(f"{where}: min must not exceed max")
    params["_assertions"] = [
        (parse_selector(str(a["selector"])), a.get("min"), a.get("max"), a["message"])
        for a in params["assertions"]
    ]
    return params


def _describe_bounds(lo: Optional[int], hi: Optional[int]) -> str:
    if lo is not None and hi is not None:
        return f"exactly {lo}" if lo == hi else f"between {lo} and {hi}"
    if lo is not None:
        return f"at least {lo}"
    return f"at most {hi}"


def run(ctx: ValidationContext, matched: list[Node], params: dict) -> list[Annotation]:
    compiled = params.get("_assertions") or [
        (parse_selector(str(a["selector"])), a.get("min"), a.get("max"), a["message"])
        for a in params["assertions"]
    ]
    annotations: list[Annotation] = []
    for scope in matched:
        for sel, lo, hi, message in compiled:
            count = len(evaluate(ctx.tree, sel, context=scope))
            if (lo is not None and count < lo) or (hi is not None and count > hi):
                annotations.append(ctx.annotation(
                    f"{message}: expected {_describe_bounds(lo, hi)}, "
                    f"found {count}",
                ))
    return annotations


register(ValidatorKind(
    kind_id=KIND_ID,
    capabilities=frozenset(),
    validate_params=validate_params,
    run=run,
))

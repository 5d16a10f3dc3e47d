"""Exception types shared across the package."""

from __future__ import annotations


class MannersError(Exception):
    """Base class for all errors raised by this package."""


class EncodingError(MannersError):
    """Page bytes could not be decoded under the declared or sniffed encoding."""


class PathNotFound(MannersError):
    """A node path does not resolve in the given document tree."""


class SelectorError(MannersError):
    """A selector expression is outside the supported grammar."""

    def __init__(self, message: str, expression: str, position: int) -> None:
        super().__init__(f"{message} at position {position} in {expression!r}")
        self.expression = expression
        self.position = position


class SchemaError(MannersError):
    """A ruleset, manifest, or subscription document violates its schema."""


class RuleSyntaxError(MannersError):
    """A regex or selector inside a rule failed to compile or parse."""


class CheckerNotAllowed(SchemaError):
    """A rule names an external checker that is not in the operator allow-list."""


class TemplateParseError(MannersError):
    """Template hole delimiters are unbalanced."""


class TemplateFetchError(MannersError):
    """A template referenced by URL could not be fetched."""


class NetworkError(MannersError):
    """A repository could not be reached and no usable cache exists."""


class IntegrityError(MannersError):
    """Fetched ruleset bytes do not match the digest in the repository manifest."""


class StoreError(MannersError):
    """The subscription store could not be read or written."""

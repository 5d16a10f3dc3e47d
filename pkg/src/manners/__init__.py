"""Rule-checking annotation layer for web content.

Rules subscribed by each user fire against pages fetched from unmodified
origin servers; validators produce localized, dismissible findings that
are merged into the delivered view as an annotation layer.  Works as an
annotating proxy (``manners serve``) or offline (``manners check``).
"""

from .annotator import Report, merge, run_pipeline
from .doctree import DocTree, NodePath, TextRange, extract_text, parse_html, text_of
from .rules import Rule, RuleSet, Subscription, fires, parse_ruleset, resolve_active_rules
from .selector import Selector, parse_selector, select
from .validators import Annotation, Severity

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "DocTree",
    "NodePath",
    "Report",
    "Rule",
    "RuleSet",
    "Selector",
    "Severity",
    "Subscription",
    "TextRange",
    "extract_text",
    "fires",
    "merge",
    "parse_html",
    "parse_ruleset",
    "parse_selector",
    "resolve_active_rules",
    "run_pipeline",
    "select",
    "text_of",
]

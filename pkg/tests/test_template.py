"""Template conformance against the escaped-regex oracle.

Generators keep literal segments and hole fillers over disjoint alphabets
so the mutation properties are decidable by construction: an edit confined
to a hole can never break a literal match, and an edit inside a literal
run can never be re-absorbed by a hole.
"""

import random

import pytest

from manners.doctree import parse_html
from manners.errors import SchemaError, TemplateFetchError, TemplateParseError
from manners.selector import evaluate, parse_selector
from manners.validators import Severity, ValidationContext, get_kind
from manners.validators.template import Template, match_template, parse_template

from conftest import oracle_template_conforms

LITERAL_ALPHABET = "abcd .:"
FILLER_ALPHABET = "UVWXYZ123"


def run_template(html, params, selector="//pre", fetcher=None):
    tree = parse_html(html, url="http://x/")
    kind = get_kind("template-conformance")
    params = kind.validate_params(params, {})
    matched = evaluate(tree, parse_selector(selector))
    ctx = ValidationContext(tree=tree, ruleset_id="rs", rule_id="r",
                            severity=Severity.ERROR, template_fetcher=fetcher)
    return ctx, kind.run(ctx, matched, params)


class TestTemplateParsing:
    def test_alternation(self):
        t = parse_template("Name: {{{name}}}\nAge: {{{age}}}")
        assert t.literals == ("Name: ", "\nAge: ", "")
        assert t.holes == ("name", "age")

    def test_zero_holes(self):
        t = parse_template("static text")
        assert t.literals == ("static text",) and t.holes == ()

    def test_unclosed_hole_rejected(self):
        with pytest.raises(TemplateParseError, match="unclosed"):
            parse_template("a {{{name")

    def test_stray_closer_rejected(self):
        with pytest.raises(TemplateParseError, match="stray"):
            parse_template("a }}} b")

    def test_nested_opener_rejected(self):
        with pytest.raises(TemplateParseError, match="nested"):
            parse_template("a {{{x{{{y}}} b")

    def test_custom_delimiters(self):
        t = parse_template("a <%x%> b", hole_open="<%", hole_close="%>")
        assert t.literals == ("a ", " b") and t.holes == ("x",)


class TestMatchTemplate:
    def check(self, template_text, subject):
        template = parse_template(template_text)
        got = match_template(template, subject)
        expected = oracle_template_conforms(template_text, subject)
        assert (got is None) == expected, (template_text, subject)
        return got

    def test_holes_absorb_content(self):
        assert self.check("Name: {{{name}}}\nAge: {{{age}}}",
                          "Name: Alice\nAge: 42") is None

    def test_first_literal_failure_at_offset_zero(self):
        mismatch = self.check("Name: {{{name}}}\nAge: {{{age}}}",
                              "Nome: Alice\nAge: 42")
        assert mismatch.offset == 0
        assert mismatch.expected == "Name: "

    def test_zero_holes_identity(self):
        assert self.check("exact", "exact") is None
        assert self.check("exact", "exactly not").offset == 0

    def test_trailing_garbage_fails(self):
        assert self.check("a {{{h}}} b", "a XX b JUNK") is not None

    def test_suffix_anchoring_finds_late_occurrence(self):
        # leftmost scan of the final literal must not give up early
        assert self.check("{{{h}}}b", "bb") is None

    def test_empty_holes_allowed(self):
        assert self.check("a{{{h}}}b", "ab") is None


class TestValidatorSurface:
    def test_conforming_subject_is_silent(self):
        _, anns = run_template(
            b"<pre>Name: Alice\nAge: 42</pre>",
            {"template_source": "Name: {{{name}}}\nAge: {{{age}}}"})
        assert anns == []

    def test_failure_anchored_at_divergence(self):
        _, anns = run_template(
            b"<pre>Nome: Alice\nAge: 42</pre>",
            {"template_source": "Name: {{{name}}}\nAge: {{{age}}}"})
        assert len(anns) == 1
        assert anns[0].anchor.start == 0
        assert "Name: " in anns[0].message

    def test_scope_selector_overrides_matched(self):
        _, anns = run_template(
            b"<div><pre>ignored</pre><code>Name: X</code></div>",
            {"template_source": "Name: {{{n}}}", "scope_selector": "//code"},
            selector="//div")
        assert anns == []

    def test_unbalanced_inline_template_rejected_at_load(self):
        with pytest.raises(SchemaError, match="unclosed"):
            get_kind("template-conformance").validate_params(
                {"template_source": "a {{{x"}, {})

    def test_url_template_fetched(self):
        def fetcher(url):
            assert url == "http://templates/x"
            return "Name: {{{n}}}"

        _, anns = run_template(
            b"<pre>Name: Bob</pre>",
            {"template_source": "http://templates/x"}, fetcher=fetcher)
        assert anns == []

    def test_fetch_failure_degrades_to_warning(self):
        def fetcher(url):
            raise TemplateFetchError("unreachable")

        ctx, anns = run_template(
            b"<pre>anything</pre>",
            {"template_source": "http://templates/gone"}, fetcher=fetcher)
        assert len(anns) == 1
        assert anns[0].severity == Severity.WARNING
        assert anns[0].anchor is None
        assert ctx.diagnostics[0]["kind"] == "template-fetch-failed"


def random_template_and_subject(rng: random.Random):
    n_holes = rng.randint(0, 4)
    literals = []
    fillers = []
    for i in range(n_holes + 1):
        lit_len = rng.randint(1, 8)
        literals.append("".join(rng.choice(LITERAL_ALPHABET) for _ in range(lit_len)))
    for _ in range(n_holes):
        fill_len = rng.randint(1, 6)
        fillers.append("".join(rng.choice(FILLER_ALPHABET) for _ in range(fill_len)))
    template_parts = [literals[0]]
    for i, filler in enumerate(fillers):
        template_parts.append("{{{h%d}}}" % i)
        template_parts.append(literals[i + 1])
    template_text = "".join(template_parts)
    subject_parts = [literals[0]]
    for i, filler in enumerate(fillers):
        subject_parts.append(filler)
        subject_parts.append(literals[i + 1])
    subject = "".join(subject_parts)
    # spans of the subject occupied by literal segments vs hole fillers
    literal_spans = []
    filler_spans = []
    pos = 0
    for i, part in enumerate(subject_parts):
        span = (pos, pos + len(part))
        (literal_spans if i % 2 == 0 else filler_spans).append(span)
        pos += len(part)
    return template_text, subject, literal_spans, filler_spans


class TestRandomizedOracleAgreement:
    def test_agreement_and_mutations(self):
        rng = random.Random(99)
        for case in range(400):
            template_text, subject, literal_spans, filler_spans = \
                random_template_and_subject(rng)
            template = parse_template(template_text)

            # clean subject conforms, and both routes agree
            assert match_template(template, subject) is None
            assert oracle_template_conforms(template_text, subject)

            # edit confined to a hole: still conforming
            if filler_spans:
                lo, hi = rng.choice(filler_spans)
                at = rng.randrange(lo, hi)
                mutated = subject[:at] + rng.choice(FILLER_ALPHABET) + subject[at + 1:]
                assert match_template(template, mutated) is None, (
                    f"case {case}: hole edit flagged")
                assert oracle_template_conforms(template_text, mutated)

            # edit inside a literal segment: always a finding
            lo, hi = rng.choice(literal_spans)
            at = rng.randrange(lo, hi)
            mutated = subject[:at] + rng.choice(FILLER_ALPHABET) + subject[at + 1:]
            got = match_template(template, mutated)
            assert got is not None, f"case {case}: literal edit missed"
            assert not oracle_template_conforms(template_text, mutated)

    def test_arbitrary_subjects_agree_with_oracle(self):
        rng = random.Random(123)
        alphabet = LITERAL_ALPHABET + FILLER_ALPHABET
        for _ in range(400):
            template_text, _, _, _ = random_template_and_subject(rng)
            template = parse_template(template_text)
            subject = "".join(rng.choice(alphabet)
                              for _ in range(rng.randint(0, 30)))
            assert (match_template(template, subject) is None) == \
                oracle_template_conforms(template_text, subject)

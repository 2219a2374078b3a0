"""Tests for comment analysis and evidence bucketing."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from issuetraj.analysis import (
    CommentAnalysis,
    Excerpt,
    accumulate_buckets,
    analyze_comment,
    bucket_excerpts,
    comment_urls,
)
from issuetraj.artifacts.cache import CacheEntry, LinkCache
from issuetraj.artifacts.model import FetchStatus
from issuetraj.errors import ForeignFieldKey, GatewayFailure
from issuetraj.gateway import LlmGateway, Role
from issuetraj.labels import LabelType, schema_for
from issuetraj.thread_model import reaction_score

from conftest import make_comment

BUG = schema_for(LabelType.BUG)


def ok_entry(summary: str) -> CacheEntry:
    return CacheEntry(summary, FetchStatus.OK, datetime(2024, 1, 1, tzinfo=timezone.utc))


class EchoGateway(LlmGateway):
    """Analyst stub that echoes the prompt back, for content inspection."""

    def __init__(self):
        super().__init__(mode="stub")

    def complete(self, role, messages):
        self.calls_by_role[str(getattr(role, "value", role))] += 1
        return messages[0]["content"]


class TestAnalyzeComment:
    def test_cached_summary_lands_in_prompt(self):
        comment = make_comment(
            "c3", "caused by https://github.com/o/r/commit/abc123 I think"
        )
        cache = LinkCache()
        cache.put("https://github.com/o/r/commit/abc123", ok_entry("fixes pager off-by-one"))
        gateway = EchoGateway()
        analysis = analyze_comment(comment, BUG, cache, gateway)
        assert "fixes pager off-by-one" in analysis.analysis_text
        assert analysis.referenced_urls == ("https://github.com/o/r/commit/abc123",)

    def test_no_urls_no_snippets_single_call(self, stub_gateway):
        stub_gateway.script(Role.COMMENT_ANALYST, "plain analysis")
        comment = make_comment("c1", "just words, no links")
        analysis = analyze_comment(comment, BUG, LinkCache(), stub_gateway)
        assert analysis.referenced_urls == ()
        assert analysis.snippets_considered == 0
        assert analysis.analysis_text == "plain analysis"
        assert stub_gateway.calls_by_role.total() == 1

    def test_gateway_failure_yields_empty_with_marker(self, stub_gateway):
        stub_gateway.script(Role.COMMENT_ANALYST, GatewayFailure("down"))
        comment = make_comment("c1", "body")
        analysis = analyze_comment(comment, BUG, LinkCache(), stub_gateway)
        assert analysis.failed is True
        assert analysis.analysis_text == ""

    def test_failed_cache_entry_rendered_unavailable(self):
        comment = make_comment("c2", "see https://dead.example/page")
        cache = LinkCache()
        cache.put(
            "https://dead.example/page",
            CacheEntry("", FetchStatus.FAILED, datetime(2024, 1, 1, tzinfo=timezone.utc)),
        )
        gateway = EchoGateway()
        analysis = analyze_comment(comment, BUG, cache, gateway)
        assert "unavailable" in analysis.analysis_text

    def test_snippets_counted_and_in_prompt(self):
        comment = make_comment("c4", "run `make` then:\n```sh\nmake test\n```")
        gateway = EchoGateway()
        analysis = analyze_comment(comment, BUG, LinkCache(), gateway)
        assert analysis.snippets_considered == 2
        assert "make test" in analysis.analysis_text


def analysis_for(comment, text="analysis text") -> CommentAnalysis:
    return CommentAnalysis(
        comment_id=comment.comment_id,
        analysis_text=text,
        referenced_urls=(),
        snippets_considered=0,
    )


class TestBucketExcerpts:
    def test_scripted_pair_with_attribution(self, stub_gateway):
        stub_gateway.script(
            Role.FIELD_BUCKET_CLASSIFIER,
            json.dumps(
                [{"field": "root_cause_analysis", "excerpt": "the pager drops the final byte"}]
            ),
        )
        comment = make_comment(
            "c5",
            "the pager drops the final byte when flushing",
            author="maintainer-jane",
            association="MEMBER",
            reactions={"+1": 7},
        )
        [excerpt] = bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway)
        assert excerpt.field_key == "root_cause_analysis"
        assert excerpt.text == "the pager drops the final byte"
        assert excerpt.comment_id == "c5"
        assert excerpt.author_login == "maintainer-jane"
        assert excerpt.association == "MEMBER"
        assert excerpt.reaction_score == 7

    def test_foreign_field_dropped_with_warning(self, stub_gateway, caplog):
        stub_gateway.script(
            Role.FIELD_BUCKET_CLASSIFIER,
            json.dumps([{"field": "nonexistent_field", "excerpt": "x"}]),
        )
        comment = make_comment("c1", "body")
        with caplog.at_level("WARNING"):
            result = bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway)
        assert result == []
        assert any("nonexistent_field" in r.message for r in caplog.records)

    def test_no_signal_comment_yields_empty(self, stub_gateway):
        stub_gateway.script(Role.FIELD_BUCKET_CLASSIFIER, "[]")
        comment = make_comment("c1", "+1 same here")
        assert bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway) == []

    def test_unparseable_retried_once_then_empty(self, stub_gateway, caplog):
        stub_gateway.script(Role.FIELD_BUCKET_CLASSIFIER, "not json at all", "still not json")
        comment = make_comment("c1", "body")
        with caplog.at_level("WARNING"):
            result = bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway)
        assert result == []
        assert stub_gateway.pending(Role.FIELD_BUCKET_CLASSIFIER) == 0

    def test_unparseable_then_valid(self, stub_gateway):
        stub_gateway.script(
            Role.FIELD_BUCKET_CLASSIFIER,
            "garbage",
            json.dumps([{"field": "workaround", "excerpt": "pin to 2.0.1"}]),
        )
        comment = make_comment("c1", "pin to 2.0.1 for now")
        [excerpt] = bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway)
        assert excerpt.field_key == "workaround"

    def test_json_wrapped_in_prose_recovered(self, stub_gateway):
        stub_gateway.script(
            Role.FIELD_BUCKET_CLASSIFIER,
            'Here you go:\n[{"field": "workaround", "excerpt": "use --no-pager"}]\nHope that helps!',
        )
        comment = make_comment("c1", "use --no-pager")
        [excerpt] = bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway)
        assert excerpt.text == "use --no-pager"

    def test_gateway_failure_yields_empty(self, stub_gateway):
        stub_gateway.script(Role.FIELD_BUCKET_CLASSIFIER, GatewayFailure("down"))
        comment = make_comment("c1", "body")
        assert bucket_excerpts(comment, analysis_for(comment), BUG, stub_gateway) == []

    def test_unfaithful_excerpt_logged_but_kept(self, stub_gateway, caplog):
        stub_gateway.script(
            Role.FIELD_BUCKET_CLASSIFIER,
            json.dumps([{"field": "workaround", "excerpt": "completely invented sentence"}]),
        )
        comment = make_comment("c1", "short body")
        with caplog.at_level("WARNING"):
            [excerpt] = bucket_excerpts(comment, analysis_for(comment, "unrelated"), BUG, stub_gateway)
        assert excerpt.text == "completely invented sentence"
        assert any("overlap" in r.message for r in caplog.records)


def excerpt_for(key: str, comment_id: str = "c1", text: str = "t") -> Excerpt:
    return Excerpt(
        field_key=key,
        text=text,
        comment_id=comment_id,
        author_login="a",
        association="NONE",
        reaction_score=0,
    )


class TestAccumulateBuckets:
    def test_two_comments_two_fields(self):
        per_comment = [
            [excerpt_for("root_cause_analysis", "c1")],
            [excerpt_for("solution_plan", "c2")],
        ]
        buckets = accumulate_buckets(per_comment, BUG)
        sizes = {k: len(v) for k, v in buckets.buckets.items()}
        assert sizes["root_cause_analysis"] == 1
        assert sizes["solution_plan"] == 1
        assert sum(sizes.values()) == 2

    def test_empty_input_all_buckets_empty(self):
        buckets = accumulate_buckets([], BUG)
        assert set(buckets.buckets) == set(BUG.field_keys)
        assert buckets.total_excerpts() == 0

    def test_three_excerpts_same_field_keep_thread_order(self):
        per_comment = [
            [excerpt_for("problem_description", "c1", "first")],
            [excerpt_for("problem_description", "c2", "second")],
            [excerpt_for("problem_description", "c3", "third")],
        ]
        buckets = accumulate_buckets(per_comment, BUG)
        texts = [e.text for e in buckets.buckets["problem_description"]]
        assert texts == ["first", "second", "third"]

    def test_foreign_key_is_programming_error(self):
        with pytest.raises(ForeignFieldKey):
            accumulate_buckets([[excerpt_for("not_a_field")]], BUG)


# -- conservation property ----------------------------------------------------

_field_keys = st.sampled_from(BUG.field_keys)


@settings(max_examples=100)
@given(
    st.lists(
        st.lists(
            st.tuples(_field_keys, st.text(min_size=1, max_size=20)), max_size=4
        ),
        max_size=6,
    )
)
def test_accumulate_conserves_every_excerpt(per_comment_specs):
    per_comment = [
        [excerpt_for(key, f"c{i}", text) for key, text in specs]
        for i, specs in enumerate(per_comment_specs)
    ]
    emitted = sum(len(x) for x in per_comment)
    buckets = accumulate_buckets(per_comment, BUG)
    assert buckets.total_excerpts() == emitted
    assert set(buckets.buckets) == set(BUG.field_keys)

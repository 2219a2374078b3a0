"""Tests for thread parsing, the header invariant, and reaction scoring."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from issuetraj.errors import MalformedInput, NoHeader, NotFound, RateLimited
from issuetraj.github_api import GitHubClient
from issuetraj.thread_model import (
    fetch_issue_thread,
    header_comment,
    parse_thread,
    reaction_score,
    serialize_thread,
)

from conftest import FakeResponse, FakeSession, make_comment, make_thread, simple_thread, thread_json


class TestParseThread:
    def test_three_comment_export_parses(self):
        thread = simple_thread(3)
        parsed = parse_thread(thread_json(thread))
        assert parsed.comment_count == 3
        assert parsed.issue_number == 42
        assert [c.comment_id for c in parsed.comments] == ["c0", "c1", "c2"]

    def test_zero_comments_is_no_header(self):
        doc = json.loads(thread_json(simple_thread(1)))
        doc["comments"] = []
        doc["comment_count"] = 0
        with pytest.raises(NoHeader):
            parse_thread(json.dumps(doc))

    def test_duplicate_header_flag_is_no_header(self):
        # 5-comment fixture with the header flag duplicated onto comment 3
        doc = json.loads(thread_json(simple_thread(5)))
        doc["comments"][3]["is_header"] = True
        flags = [c["is_header"] for c in doc["comments"]]
        assert flags.count(True) == 2  # oracle: manual flag count
        with pytest.raises(NoHeader):
            parse_thread(json.dumps(doc))

    def test_not_json_raises_malformed(self):
        with pytest.raises(MalformedInput):
            parse_thread("{not json")

    def test_missing_required_key_raises(self):
        doc = json.loads(thread_json(simple_thread(2)))
        del doc["issue_number"]
        with pytest.raises(MalformedInput):
            parse_thread(json.dumps(doc))

    def test_unknown_keys_ignored(self):
        thread = simple_thread(2)
        parsed = parse_thread(thread_json(thread, repo_labels=["bug"], exported_by="tool-x"))
        assert parsed.comment_count == 2

    def test_missing_reactions_defaults_empty(self):
        doc = json.loads(thread_json(simple_thread(1)))
        del doc["comments"][0]["reactions"]
        parsed = parse_thread(json.dumps(doc))
        assert parsed.comments[0].reactions == {}

    def test_comment_count_mismatch_rejected(self):
        doc = json.loads(thread_json(simple_thread(3)))
        doc["comment_count"] = 5
        with pytest.raises(MalformedInput):
            parse_thread(json.dumps(doc))

    def test_invalid_utf8_bytes_replaced(self):
        raw = thread_json(simple_thread(1)).encode("utf-8")
        raw = raw.replace(b"comment body", b"comment \xff body", 1)
        parsed = parse_thread(raw)
        assert parsed.comment_count == 1

    def test_unsorted_comments_sorted_stably(self):
        thread = simple_thread(3)
        doc = json.loads(thread_json(thread))
        doc["comments"].reverse()
        parsed = parse_thread(json.dumps(doc))
        assert [c.comment_id for c in parsed.comments] == ["c0", "c1", "c2"]


class TestHeaderComment:
    def test_three_comment_thread(self):
        thread = simple_thread(3)
        assert header_comment(thread).comment_id == "c0"

    def test_singleton_thread(self):
        thread = simple_thread(1)
        assert header_comment(thread).comment_id == "c0"

    def test_shuffled_ten_comment_thread_header_at_position_7(self):
        comments = [make_comment(f"c{i}", minute=i, is_header=(i == 7)) for i in range(10)]
        thread = make_thread(comments)
        # oracle: linear scan for the flag
        expected = next(c for c in comments if c.is_header)
        assert header_comment(thread) is comments[7]
        assert header_comment(thread) == expected


class TestReactionScore:
    def test_sum_of_counts(self):
        assert reaction_score(make_comment(reactions={"+1": 3, "heart": 2})) == 5

    def test_empty_map(self):
        assert reaction_score(make_comment()) == 0

    def test_negative_reaction_counts_positively(self):
        assert reaction_score(make_comment(reactions={"-1": 4})) == 4


# -- properties --------------------------------------------------------------

_reactions = st.dictionaries(
    st.sampled_from(["+1", "-1", "laugh", "heart", "rocket", "eyes"]),
    st.integers(min_value=0, max_value=50),
    max_size=4,
)

_bodies = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80
)


@st.composite
def threads(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    header_at = draw(st.integers(min_value=0, max_value=n - 1))
    comments = []
    for i in range(n):
        comments.append(
            make_comment(
                comment_id=f"c{i}",
                body=draw(_bodies),
                author=draw(st.sampled_from(["alice", "bob", "carol"])),
                association=draw(st.sampled_from(["NONE", "MEMBER", "OWNER"])),
                is_bot=draw(st.booleans()),
                minute=i,
                reactions=draw(_reactions),
                is_header=(i == header_at),
            )
        )
    return make_thread(comments, issue_number=draw(st.integers(min_value=1, max_value=9999)))


@given(threads())
def test_serialize_parse_round_trip(thread):
    assert parse_thread(serialize_thread(thread)) == thread


@given(threads())
def test_header_is_member_of_comments(thread):
    assert header_comment(thread) in thread.comments


@given(_reactions, st.sampled_from(["+1", "wow"]), st.integers(min_value=0, max_value=10))
def test_reaction_score_monotone(reactions, name, extra):
    base = make_comment(reactions=reactions)
    bumped_reactions = dict(reactions)
    bumped_reactions[name] = bumped_reactions.get(name, 0) + extra
    bumped = make_comment(reactions=bumped_reactions)
    assert reaction_score(bumped) >= reaction_score(base)


# -- live fetch over recorded fixtures ---------------------------------------


def _issue_payload(number=7, comments=2):
    return {
        "id": 1000 + number,
        "number": number,
        "title": "Widget breaks",
        "body": "It broke.",
        "html_url": f"https://github.com/acme/widget/issues/{number}",
        "user": {"login": "reporter", "type": "User"},
        "author_association": "NONE",
        "created_at": "2024-03-01T10:00:00Z",
        "updated_at": "2024-03-01T10:00:00Z",
        "comments": comments,
        "reactions": {"url": "x", "total_count": 1, "+1": 1},
    }


def _comment_payload(cid, minute):
    return {
        "id": cid,
        "body": f"reply {cid}",
        "user": {"login": "bob", "type": "User"},
        "author_association": "MEMBER",
        "created_at": f"2024-03-01T10:{minute:02d}:00Z",
        "updated_at": f"2024-03-01T10:{minute:02d}:00Z",
        "reactions": {"url": "x", "total_count": 0},
    }


class TestFetchIssueThread:
    def test_two_comment_issue_yields_three_comments(self):
        session = FakeSession(
            {
                "/issues/7/comments": FakeResponse(
                    [_comment_payload(11, 5), _comment_payload(12, 9)]
                ),
                "/issues/7": FakeResponse(_issue_payload()),
            }
        )
        client = GitHubClient(token="t", session=session)
        thread = fetch_issue_thread("acme", "widget", 7, client)
        assert thread.comment_count == 3
        assert header_comment(thread).body.startswith("Widget breaks")
        assert header_comment(thread).reactions == {"+1": 1}
        assert [c.comment_id for c in thread.comments[1:]] == ["11", "12"]

    def test_nonexistent_issue_maps_404_to_not_found(self):
        session = FakeSession({"/issues/999": FakeResponse({}, status_code=404)})
        client = GitHubClient(token="t", session=session)
        with pytest.raises(NotFound):
            fetch_issue_thread("acme", "widget", 999, client)

    def test_rate_limit_response_maps_to_rate_limited(self):
        session = FakeSession(
            {
                "/issues/7": FakeResponse(
                    {},
                    status_code=403,
                    headers={"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "0"},
                )
            }
        )
        client = GitHubClient(token="t", session=session)
        with pytest.raises(RateLimited) as exc_info:
            fetch_issue_thread("acme", "widget", 7, client)
        assert exc_info.value.retry_after >= 0.0

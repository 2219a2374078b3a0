"""Shared test fixtures: thread builders and offline HTTP doubles."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest

from issuetraj.gateway import LlmGateway
from issuetraj.thread_model import Comment, IssueThread


def ts(minute: int = 0, hour: int = 12) -> datetime:
    return datetime(2024, 3, 1, hour, minute, 0, tzinfo=timezone.utc)


def make_comment(
    comment_id: str = "c1",
    body: str = "hello",
    *,
    author: str = "alice",
    association: str = "NONE",
    comment_type: str = "issue_comment",
    is_bot: bool = False,
    minute: int = 0,
    reactions: dict | None = None,
    is_header: bool = False,
) -> Comment:
    return Comment(
        comment_id=comment_id,
        author_login=author,
        comment_type=comment_type,
        association=association,
        is_bot=is_bot,
        created_at=ts(minute),
        updated_at=ts(minute),
        body=body,
        reactions=dict(reactions or {}),
        is_header=is_header,
    )


def make_thread(comments: list[Comment], issue_number: int = 42) -> IssueThread:
    return IssueThread(
        source_url=f"https://github.com/acme/widget/issues/{issue_number}",
        repo_owner="acme",
        repo_name="widget",
        issue_number=issue_number,
        comment_count=len(comments),
        comments=tuple(comments),
    )


def simple_thread(n_comments: int = 3, issue_number: int = 42, header_body: str | None = None) -> IssueThread:
    header = make_comment(
        "c0",
        header_body or "Crash when parsing empty config\n\nSteps: run with an empty file.",
        author="reporter",
        comment_type="issue",
        minute=0,
        is_header=True,
    )
    rest = [
        make_comment(f"c{i}", f"comment body {i}", minute=i) for i in range(1, n_comments)
    ]
    return make_thread([header] + rest, issue_number=issue_number)


def thread_json(thread: IssueThread, repo_labels: list[str] | None = None, **extra) -> str:
    doc = {
        "source_url": thread.source_url,
        "repo_owner": thread.repo_owner,
        "repo_name": thread.repo_name,
        "issue_number": thread.issue_number,
        "comment_count": thread.comment_count,
        "comments": [
            {
                "comment_id": c.comment_id,
                "author_login": c.author_login,
                "comment_type": c.comment_type,
                "association": c.association,
                "is_bot": c.is_bot,
                "created_at": c.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "updated_at": c.updated_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "body": c.body,
                "reactions": dict(c.reactions),
                "is_header": c.is_header,
            }
            for c in thread.comments
        ],
    }
    if repo_labels is not None:
        doc["labels"] = repo_labels
    doc.update(extra)
    return json.dumps(doc, indent=2)


class FakeResponse:
    def __init__(self, payload=None, status_code=200, headers=None, body: bytes = b""):
        self._payload = payload
        self.status_code = status_code
        self.headers = headers or {}
        if payload is not None and not body:
            body = json.dumps(payload).encode("utf-8")
        self.content = body

    @property
    def text(self):
        return self.content.decode("utf-8", errors="replace")

    def json(self):
        if self._payload is not None:
            return self._payload
        return json.loads(self.text)


class FakeSession:
    """requests.Session stand-in serving canned responses by URL.

    Routes map a URL substring to a FakeResponse (or a callable returning
    one). Unrouted URLs raise to catch unexpected network activity.
    """

    def __init__(self, routes: dict | None = None):
        self.routes = dict(routes or {})
        self.requests: list[str] = []

    def add(self, fragment: str, response) -> None:
        self.routes[fragment] = response

    def get(self, url, headers=None, params=None, timeout=None):
        if params:
            query = "&".join(f"{k}={v}" for k, v in sorted(params.items()))
            full = f"{url}?{query}"
        else:
            full = url
        self.requests.append(full)
        for fragment, response in self.routes.items():
            if fragment in full:
                if callable(response):
                    return response(full)
                return response
        raise AssertionError(f"unexpected request: {full}")

    @property
    def fetch_count(self) -> int:
        return len(self.requests)


@pytest.fixture
def stub_gateway() -> LlmGateway:
    return LlmGateway(mode="stub")

"""Typed in-memory model of a GitHub issue discussion thread.

The input unit is a JSON export of one issue thread
(``issue#{N}_comments_pr#{M}.json``): issue metadata plus the full comment
list, with exactly one comment flagged ``is_header`` marking the original
post. Both objects are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import MalformedInput, NoHeader
from .github_api import GitHubClient

_COMMENT_REQUIRED = (
    "comment_id",
    "author_login",
    "comment_type",
    "association",
    "is_bot",
    "created_at",
    "updated_at",
    "body",
    "is_header",
)
_THREAD_REQUIRED = (
    "source_url",
    "repo_owner",
    "repo_name",
    "issue_number",
    "comment_count",
    "comments",
)


@dataclass(frozen=True)
class Comment:
    """One comment in an issue thread, header post included."""

    comment_id: str
    author_login: str
    comment_type: str  # free string; GitHub exports are not enum-constrained
    association: str
    is_bot: bool
    created_at: datetime
    updated_at: datetime
    body: str
    reactions: dict[str, int] = field(default_factory=dict)
    is_header: bool = False

    def __post_init__(self):
        if not self.comment_id:
            raise MalformedInput("comment_id must be non-empty")
        if self.updated_at < self.created_at:
            raise MalformedInput(
                f"comment {self.comment_id}: updated_at precedes created_at"
            )
        for name, count in self.reactions.items():
            if not isinstance(count, int) or isinstance(count, bool) or count < 0:
                raise MalformedInput(
                    f"comment {self.comment_id}: reaction {name!r} has invalid count {count!r}"
                )


@dataclass(frozen=True)
class IssueThread:
    """A parsed issue thread: metadata plus time-ordered comments."""

    source_url: str
    repo_owner: str
    repo_name: str
    issue_number: int
    comment_count: int
    comments: tuple[Comment, ...]

    def __post_init__(self):
        if not isinstance(self.issue_number, int) or self.issue_number <= 0:
            raise MalformedInput(f"issue_number must be positive, got {self.issue_number!r}")
        if self.comment_count != len(self.comments):
            raise MalformedInput(
                f"comment_count {self.comment_count} != {len(self.comments)} comments"
            )
        seen: set[str] = set()
        for c in self.comments:
            if c.comment_id in seen:
                raise MalformedInput(f"duplicate comment_id {c.comment_id!r}")
            seen.add(c.comment_id)
        for earlier, later in zip(self.comments, self.comments[1:]):
            if later.created_at < earlier.created_at:
                raise MalformedInput("comments not ordered by creation time")
        headers = [c for c in self.comments if c.is_header]
        if len(headers) != 1:
            raise NoHeader(f"expected exactly one header comment, found {len(headers)}")


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp to a UTC datetime at second resolution."""
    if not isinstance(value, str):
        raise MalformedInput(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise MalformedInput(f"bad timestamp {value!r}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(value: datetime) -> str:
    """Render a UTC datetime in the export format (``...Z``)."""
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_comment(obj: dict, index: int) -> Comment:
    if not isinstance(obj, dict):
        raise MalformedInput(f"comment #{index} is not an object")
    missing = [k for k in _COMMENT_REQUIRED if k not in obj]
    if missing:
        raise MalformedInput(f"comment #{index} missing keys: {', '.join(missing)}")
    reactions = obj.get("reactions") or {}
    if not isinstance(reactions, dict):
        raise MalformedInput(f"comment #{index}: reactions must be a map")
    return Comment(
        comment_id=str(obj["comment_id"]),
        author_login=str(obj["author_login"]),
        comment_type=str(obj["comment_type"]),
        association=str(obj["association"]),
        is_bot=bool(obj["is_bot"]),
        created_at=parse_timestamp(obj["created_at"]),
        updated_at=parse_timestamp(obj["updated_at"]),
        body=str(obj["body"]),
        reactions={str(k): v for k, v in reactions.items()},
        is_header=bool(obj["is_header"]),
    )


def parse_thread(raw_text: str | bytes) -> IssueThread:
    """Parse a thread export into an IssueThread.

    Unknown JSON keys are ignored; a missing reactions map defaults to empty.
    Invalid UTF-8 byte sequences are replaced rather than rejected (pasted
    logs in real exports carry mixed encodings). Comments are sorted stably
    by creation time, so equal timestamps keep input order.

    Raises MalformedInput for structural problems and NoHeader when the
    header flag is not set on exactly one comment.
    """
    if isinstance(raw_text, bytes):
        raw_text = raw_text.decode("utf-8", errors="replace")
    try:
        doc = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedInput("top-level JSON value must be an object")
    missing = [k for k in _THREAD_REQUIRED if k not in doc]
    if missing:
        raise MalformedInput(f"missing keys: {', '.join(missing)}")
    if not isinstance(doc["comments"], list):
        raise MalformedInput("comments must be an array")
    comments = [_parse_comment(c, i) for i, c in enumerate(doc["comments"])]
    comments.sort(key=lambda c: c.created_at)  # stable: ties keep input order
    try:
        issue_number = int(doc["issue_number"])
        comment_count = int(doc["comment_count"])
    except (TypeError, ValueError) as exc:
        raise MalformedInput("issue_number and comment_count must be integers") from exc
    return IssueThread(
        source_url=str(doc["source_url"]),
        repo_owner=str(doc["repo_owner"]),
        repo_name=str(doc["repo_name"]),
        issue_number=issue_number,
        comment_count=comment_count,
        comments=tuple(comments),
    )


def serialize_thread(thread: IssueThread) -> str:
    """Render a thread back to the export format; inverse of parse_thread."""
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
                "created_at": format_timestamp(c.created_at),
                "updated_at": format_timestamp(c.updated_at),
                "body": c.body,
                "reactions": dict(c.reactions),
                "is_header": c.is_header,
            }
            for c in thread.comments
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def header_comment(thread: IssueThread) -> Comment:
    """Return the unique header comment (existence guaranteed by invariant)."""
    for c in thread.comments:
        if c.is_header:
            return c
    raise NoHeader("thread has no header comment")  # unreachable for valid threads


def issue_title(thread: IssueThread) -> str:
    """Title of the issue: the first line of the header comment body."""
    body = header_comment(thread).body
    return body.split("\n", 1)[0].strip()


def reaction_score(comment: Comment) -> int:
    """Community reaction score: unweighted sum of all reaction counts."""
    return sum(comment.reactions.values())


def fetch_issue_thread(
    owner: str, repo: str, issue_number: int, client: GitHubClient | None = None
) -> IssueThread:
    """Fetch a live issue and shape it like the export format.

    Paginates through all comments and synthesizes the header comment from
    the issue body itself. Raises NotFound, RateLimited or NetworkFailure.
    """
    client = client or GitHubClient()
    issue = client.get_json(f"/repos/{owner}/{repo}/issues/{issue_number}")
    header = Comment(
        comment_id=str(issue["id"]),
        author_login=(issue.get("user") or {}).get("login", ""),
        comment_type="issue",
        association=issue.get("author_association", "NONE"),
        is_bot=(issue.get("user") or {}).get("type") == "Bot",
        created_at=parse_timestamp(issue["created_at"]),
        updated_at=parse_timestamp(issue["updated_at"]),
        body=_issue_body_with_title(issue),
        reactions=_clean_reactions(issue.get("reactions")),
        is_header=True,
    )
    comments = [header]
    for item in client.paginate(f"/repos/{owner}/{repo}/issues/{issue_number}/comments"):
        comments.append(
            Comment(
                comment_id=str(item["id"]),
                author_login=(item.get("user") or {}).get("login", ""),
                comment_type="issue_comment",
                association=item.get("author_association", "NONE"),
                is_bot=(item.get("user") or {}).get("type") == "Bot",
                created_at=parse_timestamp(item["created_at"]),
                updated_at=parse_timestamp(item["updated_at"]),
                body=item.get("body") or "",
                reactions=_clean_reactions(item.get("reactions")),
                is_header=False,
            )
        )
    comments.sort(key=lambda c: c.created_at)
    return IssueThread(
        source_url=issue.get("html_url", f"https://github.com/{owner}/{repo}/issues/{issue_number}"),
        repo_owner=owner,
        repo_name=repo,
        issue_number=issue_number,
        comment_count=len(comments),
        comments=tuple(comments),
    )


def repo_labels_of(issue: dict) -> list[str]:
    """Pull plain label names out of a GitHub API issue object."""
    return [lb.get("name", "") for lb in (issue.get("labels") or []) if isinstance(lb, dict)]


def _issue_body_with_title(issue: dict) -> str:
    title = (issue.get("title") or "").strip()
    body = issue.get("body") or ""
    if title and not body.startswith(title):
        return f"{title}\n\n{body}" if body else title
    return body


def _clean_reactions(raw: dict | None) -> dict[str, int]:
    if not raw:
        return {}
    out = {}
    for key, value in raw.items():
        if key in ("url", "total_count"):
            continue
        if isinstance(value, int) and not isinstance(value, bool) and value > 0:
            out[key] = value
    return out

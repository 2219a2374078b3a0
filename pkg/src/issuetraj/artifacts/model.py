"""Types for the artifact layer: classified links and their fetched content."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ArtifactKind(str, Enum):
    COMMIT = "commit"
    BLOB = "blob"
    PULL_REQUEST = "pull_request"
    ISSUE = "issue"
    ISSUE_COMMENT = "issue_comment"
    REVIEW_COMMENT = "review_comment"
    PR_REVIEW = "pr_review"
    REDDIT_POST = "reddit_post"
    GDRIVE_DOC = "gdrive_doc"
    GDRIVE_SHEET = "gdrive_sheet"
    GDRIVE_SLIDES = "gdrive_slides"
    IMAGE = "image"
    PDF = "pdf"
    DOCX = "docx"
    LEGACY_DOC = "legacy_doc"
    SPREADSHEET = "spreadsheet"
    ARCHIVE = "archive"
    GENERIC_WEB = "generic_web"


# kinds whose URLs can carry a structured anchor
ANCHORED_KINDS = frozenset(
    {
        ArtifactKind.BLOB,
        ArtifactKind.ISSUE_COMMENT,
        ArtifactKind.REVIEW_COMMENT,
        ArtifactKind.PR_REVIEW,
    }
)


class FetchStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class LineAnchor:
    """Line range anchor on a blob URL (#L10 or #L10-L20); end == start for one line."""

    start: int
    end: int


@dataclass(frozen=True)
class RefAnchor:
    """Numeric id anchor: issue comment, review comment, or PR review node."""

    ref_id: int


@dataclass(frozen=True)
class ArtifactRef:
    """A classified hyperlink found in a comment body."""

    raw_url: str
    normalized_url: str
    kind: ArtifactKind
    anchor: LineAnchor | RefAnchor | None
    source_comment_id: str

    def __post_init__(self):
        if self.anchor is not None and self.kind not in ANCHORED_KINDS:
            raise ValueError(f"kind {self.kind.value} does not support anchors")


@dataclass(frozen=True)
class ArtifactContent:
    """Unified textual representation of one fetched artifact.

    Fetch failures never abort the pipeline; they materialize here as a
    ``failed`` status with a reason. Archives are never downloaded and show
    up as ``skipped``.
    """

    ref: ArtifactRef
    text: str
    truncated: bool = False
    fetch_status: FetchStatus = FetchStatus.OK
    failure_reason: str | None = None

    def __post_init__(self):
        if self.fetch_status is FetchStatus.OK and not self.text:
            raise ValueError("ok content must have non-empty text")
        if self.fetch_status is FetchStatus.FAILED and not self.failure_reason:
            raise ValueError("failed content must carry a failure_reason")
        if self.ref.kind is ArtifactKind.ARCHIVE and self.fetch_status is not FetchStatus.SKIPPED:
            raise ValueError("archives are never fetched")


@dataclass(frozen=True)
class CodeSnippet:
    """A fenced or inline code fragment lifted from a comment body."""

    snippet_kind: str  # "fenced" | "inline"
    language_hint: str | None
    text: str
    source_comment_id: str = ""

    def __post_init__(self):
        if self.snippet_kind not in ("fenced", "inline"):
            raise ValueError(f"bad snippet kind {self.snippet_kind!r}")
        if self.snippet_kind == "inline" and self.language_hint is not None:
            raise ValueError("inline snippets carry no language hint")

"""URL detection, normalization, and classification for comment bodies.

Detection is pattern-based and covers bare URLs, markdown link targets, and
angle-bracketed URLs; anything inside a fenced code block is code, not a
reference, and is skipped. Normalization makes equal references hit the same
cache key; classification routes each link to its format-specific handler.
"""

from __future__ import annotations

import re
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from ..errors import InvalidUrl
from .model import ArtifactKind, ArtifactRef, LineAnchor, RefAnchor
from .snippets import fenced_blocks, mask_spans

_URL_RE = re.compile(r"https?://[^\s<>]+", re.IGNORECASE)
_TRAILING = ".,;:)]"

# GitHub fragment anchors that carry meaning and survive normalization
_LINE_FRAGMENT_RE = re.compile(r"^L(\d+)(?:-L(\d+))?$")
_KEPT_FRAGMENT_RE = re.compile(
    r"^(?:L\d+(?:-L\d+)?|issuecomment-\d+|discussion_r\d+|pullrequestreview-\d+)$"
)

_TRACKING_PARAMS = ("ref",)
_IMAGE_EXTENSIONS = ("png", "jpg", "jpeg", "gif", "webp", "bmp")
_ARCHIVE_EXTENSIONS = ("zip", "tar", "gz", "tgz", "7z", "rar")
_IMAGE_HOSTS = (
    "i.imgur.com",
    "imgur.com",
    "user-images.githubusercontent.com",
    "private-user-images.githubusercontent.com",
    "camo.githubusercontent.com",
    "avatars.githubusercontent.com",
)


def extract_urls(body: str) -> list[tuple[str, tuple[int, int]]]:
    """Find every http(s) URL in a body, with its character span.

    Returns URLs in order of appearance. Trailing punctuation is stripped
    unless it closes a balanced bracket pair inside the URL (Wikipedia-style
    paths survive). Fenced code regions are masked out first.
    """
    if not body:
        return []
    masked = mask_spans(body, [(s, e) for s, e, _, _ in fenced_blocks(body)])
    out: list[tuple[str, tuple[int, int]]] = []
    for match in _URL_RE.finditer(masked):
        url = _strip_trailing(match.group(0))
        if url:
            out.append((url, (match.start(), match.start() + len(url))))
    return out


def _strip_trailing(url: str) -> str:
    while url and url[-1] in _TRAILING:
        if url[-1] == ")" and url.count("(") >= url.count(")"):
            break
        if url[-1] == "]" and url.count("[") >= url.count("]"):
            break
        url = url[:-1]
    return url


def normalize_url(raw: str) -> str:
    """Canonicalize a URL for cache keying.

    Lowercases scheme and host, drops default ports and tracking query
    parameters (utm_*, ref), keeps path case, keeps GitHub fragment anchors
    (line ranges, comment/review ids) while stripping decorative fragments,
    and trims the trailing slash when there is no query string.
    """
    parts = urlsplit(raw.strip())
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https") or not parts.netloc:
        raise InvalidUrl(f"not an http(s) URL: {raw!r}")
    try:
        port = parts.port
    except ValueError as exc:
        raise InvalidUrl(f"bad port in {raw!r}") from exc
    host = (parts.hostname or "").lower()
    if port is not None and not _is_default_port(scheme, port):
        host = f"{host}:{port}"
    if "@" in parts.netloc:
        userinfo = parts.netloc.rsplit("@", 1)[0]
        host = f"{userinfo}@{host}"

    pairs = [
        (k, v)
        for k, v in parse_qsl(parts.query, keep_blank_values=True)
        if not k.lower().startswith("utm_") and k.lower() not in _TRACKING_PARAMS
    ]
    query = urlencode(pairs)

    path = parts.path
    if not query and path.endswith("/") and path != "/":
        path = path.rstrip("/")

    fragment = parts.fragment if _KEPT_FRAGMENT_RE.match(parts.fragment or "") else ""
    return urlunsplit((scheme, host, path, query, fragment))


def _is_default_port(scheme: str, port: int) -> bool:
    return (scheme == "http" and port == 80) or (scheme == "https" and port == 443)


def classify_url(normalized: str) -> ArtifactKind:
    """Map a normalized URL to its artifact kind; total over http(s) URLs."""
    parts = urlsplit(normalized)
    host = (parts.hostname or "").lower()
    fragment = parts.fragment or ""
    segments = [s for s in parts.path.split("/") if s]

    if host == "github.com":
        kind = _classify_github(segments, fragment)
        if kind is not None:
            return kind
    if host == "redd.it" or host == "reddit.com" or host.endswith(".reddit.com"):
        return ArtifactKind.REDDIT_POST
    gdrive = _classify_gdrive(host, segments)
    if gdrive is not None:
        return gdrive
    if host in _IMAGE_HOSTS:
        return ArtifactKind.IMAGE

    extension = _extension(segments)
    if extension in _IMAGE_EXTENSIONS:
        return ArtifactKind.IMAGE
    if extension == "pdf":
        return ArtifactKind.PDF
    if extension == "docx":
        return ArtifactKind.DOCX
    if extension == "doc":
        return ArtifactKind.LEGACY_DOC
    if extension in ("xlsx", "xls"):
        return ArtifactKind.SPREADSHEET
    if extension in _ARCHIVE_EXTENSIONS:
        return ArtifactKind.ARCHIVE
    return ArtifactKind.GENERIC_WEB


def _classify_github(segments: list[str], fragment: str) -> ArtifactKind | None:
    if segments and segments[0] == "user-attachments":
        return ArtifactKind.IMAGE
    if len(segments) < 4:
        return None
    section = segments[2]
    if section == "commit":
        return ArtifactKind.COMMIT
    if section == "blob":
        return ArtifactKind.BLOB
    if section == "pull":
        if fragment.startswith("pullrequestreview-"):
            return ArtifactKind.PR_REVIEW
        if fragment.startswith("discussion_r"):
            return ArtifactKind.REVIEW_COMMENT
        if fragment.startswith("issuecomment-"):
            return ArtifactKind.ISSUE_COMMENT
        return ArtifactKind.PULL_REQUEST
    if section == "issues":
        if fragment.startswith("issuecomment-"):
            return ArtifactKind.ISSUE_COMMENT
        return ArtifactKind.ISSUE
    return None


def _classify_gdrive(host: str, segments: list[str]) -> ArtifactKind | None:
    if host == "docs.google.com":
        if segments and segments[0] == "spreadsheets":
            return ArtifactKind.GDRIVE_SHEET
        if segments and segments[0] == "presentation":
            return ArtifactKind.GDRIVE_SLIDES
        return ArtifactKind.GDRIVE_DOC
    if host == "sheets.google.com":
        return ArtifactKind.GDRIVE_SHEET
    if host == "slides.google.com":
        return ArtifactKind.GDRIVE_SLIDES
    if host == "drive.google.com":
        return ArtifactKind.GDRIVE_DOC
    return None


def _extension(segments: list[str]) -> str:
    if not segments:
        return ""
    last = segments[-1]
    if "." not in last:
        return ""
    return last.rsplit(".", 1)[1].lower()


def parse_anchor(kind: ArtifactKind, fragment: str) -> LineAnchor | RefAnchor | None:
    """Turn a kept URL fragment into a structured anchor for its kind."""
    if not fragment:
        return None
    if kind is ArtifactKind.BLOB:
        match = _LINE_FRAGMENT_RE.match(fragment)
        if match:
            start = int(match.group(1))
            end = int(match.group(2)) if match.group(2) else start
            return LineAnchor(start=min(start, end), end=max(start, end))
        return None
    if kind is ArtifactKind.ISSUE_COMMENT and fragment.startswith("issuecomment-"):
        return RefAnchor(int(fragment.split("-", 1)[1]))
    if kind is ArtifactKind.REVIEW_COMMENT and fragment.startswith("discussion_r"):
        return RefAnchor(int(fragment[len("discussion_r"):]))
    if kind is ArtifactKind.PR_REVIEW and fragment.startswith("pullrequestreview-"):
        return RefAnchor(int(fragment.split("-", 1)[1]))
    return None


def build_ref(raw_url: str, source_comment_id: str = "") -> ArtifactRef:
    """Normalize, classify, and anchor-parse one detected URL."""
    normalized = normalize_url(raw_url)
    kind = classify_url(normalized)
    fragment = urlsplit(normalized).fragment
    return ArtifactRef(
        raw_url=raw_url,
        normalized_url=normalized,
        kind=kind,
        anchor=parse_anchor(kind, fragment),
        source_comment_id=source_comment_id,
    )

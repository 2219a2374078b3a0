"""Format-specific artifact handlers.

Each resolver turns one classified URL into a unified textual
representation. Handlers never let an exception escape: every failure
materializes as an ArtifactContent with ``failed`` status and a reason, so
one dead link can never abort a pipeline run.
"""

from __future__ import annotations

import base64
import io
import re
import shutil
import subprocess
import tempfile
import zipfile
import zlib
from html.parser import HTMLParser
from urllib.parse import urlsplit
from xml.etree import ElementTree

from ..config import DEFAULT_LIMITS, Limits
from ..errors import ParseFailure, PipelineError
from ..gateway import Role
from ..github_api import GitHubClient
from ..prompts_loader import render
from .model import (
    ArtifactContent,
    ArtifactKind,
    ArtifactRef,
    FetchStatus,
    LineAnchor,
    RefAnchor,
)

GITHUB_KINDS = frozenset(
    {
        ArtifactKind.COMMIT,
        ArtifactKind.BLOB,
        ArtifactKind.PULL_REQUEST,
        ArtifactKind.ISSUE,
        ArtifactKind.ISSUE_COMMENT,
        ArtifactKind.REVIEW_COMMENT,
        ArtifactKind.PR_REVIEW,
    }
)
WEB_KINDS = frozenset(
    {
        ArtifactKind.REDDIT_POST,
        ArtifactKind.GDRIVE_DOC,
        ArtifactKind.GDRIVE_SHEET,
        ArtifactKind.GDRIVE_SLIDES,
        ArtifactKind.GENERIC_WEB,
    }
)
BINARY_KINDS = frozenset(
    {
        ArtifactKind.PDF,
        ArtifactKind.DOCX,
        ArtifactKind.LEGACY_DOC,
        ArtifactKind.SPREADSHEET,
        ArtifactKind.ARCHIVE,
    }
)


def _ok(ref: ArtifactRef, text: str, limits: Limits) -> ArtifactContent:
    text = text.strip()
    if not text:
        return _failed(ref, "empty content")
    truncated = len(text) > limits.max_artifact_chars
    if truncated:
        text = text[: limits.max_artifact_chars]
    return ArtifactContent(ref=ref, text=text, truncated=truncated)


def _failed(ref: ArtifactRef, reason: str) -> ArtifactContent:
    return ArtifactContent(
        ref=ref, text="", fetch_status=FetchStatus.FAILED, failure_reason=reason
    )


def _skipped(ref: ArtifactRef) -> ArtifactContent:
    return ArtifactContent(ref=ref, text="", fetch_status=FetchStatus.SKIPPED)


# ---------------------------------------------------------------------------
# GitHub-native artifacts
# ---------------------------------------------------------------------------


def resolve_github_artifact(
    ref: ArtifactRef, api_client: GitHubClient, limits: Limits = DEFAULT_LIMITS
) -> ArtifactContent:
    """Resolve commit/blob/PR/issue/comment references through the API."""
    if ref.kind not in GITHUB_KINDS:
        raise ValueError(f"not a GitHub artifact kind: {ref.kind.value}")
    try:
        text = _github_text(ref, api_client, limits)
        return _ok(ref, text, limits)
    except PipelineError as exc:
        return _failed(ref, str(exc))
    except Exception as exc:  # noqa: BLE001 - resolver must not leak exceptions
        return _failed(ref, f"unexpected error: {exc}")


def _github_text(ref: ArtifactRef, client: GitHubClient, limits: Limits) -> str:
    segments = [s for s in urlsplit(ref.normalized_url).path.split("/") if s]
    owner, repo = segments[0], segments[1]

    if ref.kind is ArtifactKind.COMMIT:
        sha = segments[3]
        data = client.get_json(f"/repos/{owner}/{repo}/commits/{sha}")
        parts = [f"commit {sha}", "", data.get("commit", {}).get("message", "")]
        files = data.get("files") or []
        if files:
            parts += ["", "files changed:"]
            for entry in files:
                parts.append(f"- {entry.get('filename', '?')}")
                patch = entry.get("patch")
                if patch:
                    parts.append(patch)
        return "\n".join(parts)

    if ref.kind is ArtifactKind.BLOB:
        branch = segments[3]
        path = "/".join(segments[4:])
        data = client.get_json(f"/repos/{owner}/{repo}/contents/{path}", params={"ref": branch})
        raw = base64.b64decode(data.get("content", "") or "")
        content = raw.decode("utf-8", errors="replace")
        if isinstance(ref.anchor, LineAnchor):
            lines = content.split("\n")
            start = max(1, ref.anchor.start - limits.context_lines)
            end = min(len(lines), ref.anchor.end + limits.context_lines)
            window = "\n".join(lines[start - 1 : end])
            return f"{path} (lines {start}-{end}):\n{window}"
        return f"{path}:\n{content}"

    if ref.kind is ArtifactKind.PULL_REQUEST:
        number = segments[3]
        data = client.get_json(f"/repos/{owner}/{repo}/pulls/{number}")
        return _thread_text(client, owner, repo, number, data, "pull request", limits)

    if ref.kind is ArtifactKind.ISSUE:
        number = segments[3]
        data = client.get_json(f"/repos/{owner}/{repo}/issues/{number}")
        return _thread_text(client, owner, repo, number, data, "issue", limits)

    if not isinstance(ref.anchor, RefAnchor):
        raise ParseFailure(f"{ref.kind.value} reference lacks a comment anchor")
    anchor_id = ref.anchor.ref_id
    if ref.kind is ArtifactKind.ISSUE_COMMENT:
        data = client.get_json(f"/repos/{owner}/{repo}/issues/comments/{anchor_id}")
    elif ref.kind is ArtifactKind.REVIEW_COMMENT:
        data = client.get_json(f"/repos/{owner}/{repo}/pulls/comments/{anchor_id}")
    else:  # PR_REVIEW
        number = segments[3]
        data = client.get_json(f"/repos/{owner}/{repo}/pulls/{number}/reviews/{anchor_id}")
    return data.get("body") or ""


def _thread_text(
    client: GitHubClient,
    owner: str,
    repo: str,
    number: str,
    data: dict,
    label: str,
    limits: Limits,
) -> str:
    parts = [f"{label} #{number}: {data.get('title', '')}", "", data.get("body") or ""]
    length = sum(len(p) for p in parts)
    for comment in client.paginate(f"/repos/{owner}/{repo}/issues/{number}/comments"):
        author = (comment.get("user") or {}).get("login", "?")
        body = comment.get("body") or ""
        parts.append(f"\n[{author}] {body}")
        length += len(parts[-1])
        if length > limits.max_artifact_chars:
            break
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# External web resources
# ---------------------------------------------------------------------------


def resolve_web_resource(
    ref: ArtifactRef, http_client, limits: Limits = DEFAULT_LIMITS
) -> ArtifactContent:
    """Resolve reddit posts, Google Drive documents, and generic pages."""
    if ref.kind not in WEB_KINDS:
        raise ValueError(f"not a web resource kind: {ref.kind.value}")
    try:
        if ref.kind is ArtifactKind.REDDIT_POST:
            text = _reddit_text(ref, http_client, limits)
        elif ref.kind is ArtifactKind.GENERIC_WEB:
            text = _generic_page_text(ref, http_client, limits)
        else:
            text = _gdrive_text(ref, http_client, limits)
        return _ok(ref, text, limits)
    except PipelineError as exc:
        return _failed(ref, str(exc))
    except Exception as exc:  # noqa: BLE001
        return _failed(ref, f"unexpected error: {exc}")


def _http_get(ref_url: str, http_client, limits: Limits, headers: dict | None = None):
    base = {"User-Agent": limits.user_agent}
    if headers:
        base.update(headers)
    resp = http_client.get(ref_url, headers=base, timeout=limits.http_timeout)
    status = getattr(resp, "status_code", 0)
    if status >= 400:
        raise ParseFailure(f"HTTP {status} for {ref_url}")
    return resp


def _reddit_text(ref: ArtifactRef, http_client, limits: Limits) -> str:
    resp = _http_get(ref.normalized_url + ".json", http_client, limits, {"Accept": "application/json"})
    listing = resp.json()
    post = listing[0]["data"]["children"][0]["data"]
    parts = [
        f"reddit post: {post.get('title', '')}",
        f"subreddit: r/{post.get('subreddit', '?')}  author: u/{post.get('author', '?')}"
        f"  score: {post.get('score', 0)}",
    ]
    selftext = post.get("selftext") or ""
    if selftext:
        parts += ["", selftext]
    comments = []
    if len(listing) > 1:
        for child in listing[1]["data"]["children"]:
            if child.get("kind") != "t1":
                continue
            body = child.get("data", {}).get("body") or ""
            if body:
                comments.append(body)
            if len(comments) >= limits.reddit_top_comments:
                break
    if comments:
        parts += ["", "top comments:"]
        parts += [f"- {c}" for c in comments]
    return "\n".join(parts)


_GDRIVE_ID_RE = re.compile(r"/d/([A-Za-z0-9_-]+)")


def _gdrive_text(ref: ArtifactRef, http_client, limits: Limits) -> str:
    match = _GDRIVE_ID_RE.search(urlsplit(ref.normalized_url).path)
    if not match:
        raise ParseFailure("no document id in Drive URL")
    doc_id = match.group(1)
    if ref.kind is ArtifactKind.GDRIVE_SHEET:
        export = f"https://docs.google.com/spreadsheets/d/{doc_id}/export?format=csv"
    elif ref.kind is ArtifactKind.GDRIVE_SLIDES:
        export = f"https://docs.google.com/presentation/d/{doc_id}/export/txt"
    elif "drive.google.com" in ref.normalized_url:
        export = f"https://drive.google.com/uc?export=download&id={doc_id}"
    else:
        export = f"https://docs.google.com/document/d/{doc_id}/export?format=txt"
    resp = _http_get(export, http_client, limits)
    return resp.text


class _MainTextExtractor(HTMLParser):
    """Collect readable text, preferring article/main regions.

    Navigation, scripts, form chrome, and other boilerplate containers are
    skipped wholesale; block-level tags become line breaks.
    """

    SKIP_TAGS = {
        "script",
        "style",
        "head",
        "nav",
        "header",
        "footer",
        "aside",
        "noscript",
        "template",
        "form",
        "button",
        "select",
        "option",
        "svg",
        "iframe",
    }
    MAIN_TAGS = {"article", "main"}
    BLOCK_TAGS = {
        "p",
        "div",
        "br",
        "li",
        "tr",
        "section",
        "pre",
        "blockquote",
        "h1",
        "h2",
        "h3",
        "h4",
        "h5",
        "h6",
    }

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self._skip_depth = 0
        self._main_depth = 0
        self._all: list[str] = []
        self._main: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in self.SKIP_TAGS:
            self._skip_depth += 1
        if tag in self.MAIN_TAGS:
            self._main_depth += 1
        if tag in self.BLOCK_TAGS:
            self._emit("\n")

    def handle_endtag(self, tag):
        if tag in self.SKIP_TAGS and self._skip_depth:
            self._skip_depth -= 1
        if tag in self.MAIN_TAGS and self._main_depth:
            self._main_depth -= 1
        if tag in self.BLOCK_TAGS:
            self._emit("\n")

    def handle_data(self, data):
        self._emit(data)

    def _emit(self, chunk: str) -> None:
        if self._skip_depth:
            return
        self._all.append(chunk)
        if self._main_depth:
            self._main.append(chunk)

    def text(self) -> str:
        source = self._main if "".join(self._main).strip() else self._all
        lines = [ln.strip() for ln in "".join(source).split("\n")]
        return "\n".join(ln for ln in lines if ln)


def extract_main_text(html: str) -> str:
    """DOM-parse an HTML page down to its primary textual content."""
    parser = _MainTextExtractor()
    parser.feed(html)
    parser.close()
    return parser.text()


def _generic_page_text(ref: ArtifactRef, http_client, limits: Limits) -> str:
    resp = _http_get(ref.normalized_url, http_client, limits)
    content_type = (getattr(resp, "headers", {}) or {}).get("Content-Type", "text/html")
    body = resp.text
    if "html" in content_type.lower() or "<html" in body[:2000].lower():
        return extract_main_text(body)
    return body


# ---------------------------------------------------------------------------
# Structured binary documents
# ---------------------------------------------------------------------------


def resolve_binary_document(
    ref: ArtifactRef, http_client, limits: Limits = DEFAULT_LIMITS
) -> ArtifactContent:
    """Parse PDFs, Word documents, and spreadsheets; archives are skipped."""
    if ref.kind not in BINARY_KINDS:
        raise ValueError(f"not a binary document kind: {ref.kind.value}")
    if ref.kind is ArtifactKind.ARCHIVE:
        return _skipped(ref)  # intentionally not unpacked, never downloaded
    try:
        resp = _http_get(ref.normalized_url, http_client, limits)
        data = resp.content
        if ref.kind is ArtifactKind.PDF:
            text = extract_pdf_text(data)
        elif ref.kind is ArtifactKind.DOCX:
            text = extract_docx_text(data)
        elif ref.kind is ArtifactKind.LEGACY_DOC:
            text = _convert_legacy_doc(data)
        else:
            text = _spreadsheet_text(ref, data)
        return _ok(ref, text, limits)
    except PipelineError as exc:
        return _failed(ref, str(exc))
    except Exception as exc:  # noqa: BLE001
        return _failed(ref, f"unexpected error: {exc}")


def _spreadsheet_text(ref: ArtifactRef, data: bytes) -> str:
    if urlsplit(ref.normalized_url).path.lower().endswith(".xls"):
        raise ParseFailure("legacy .xls parsing is unavailable in this build")
    return extract_xlsx_text(data)


_PDF_STREAM_RE = re.compile(rb"stream\r?\n(.*?)endstream", re.DOTALL)
_PDF_TEXT_SHOW_RE = re.compile(rb"\((?:[^()\\]|\\.)*\)\s*Tj|\[(?:[^\[\]\\]|\\.)*?\]\s*TJ")
_PDF_LITERAL_RE = re.compile(rb"\((?:[^()\\]|\\.)*\)", re.DOTALL)
_PDF_ESCAPES = {
    b"n": b"\n",
    b"r": b"\r",
    b"t": b"\t",
    b"b": b"\b",
    b"f": b"\f",
    b"(": b"(",
    b")": b")",
    b"\\": b"\\",
}


def _decode_pdf_stream(stream: bytes) -> bytes:
    try:
        return zlib.decompress(stream)
    except zlib.error:
        pass
    try:  # ASCII85-wrapped Flate, the other common text-stream encoding
        compact = stream.strip()
        if compact.endswith(b"~>"):
            compact = compact[:-2]
        return zlib.decompress(base64.a85decode(compact, adobe=False))
    except (ValueError, zlib.error):
        return stream  # treat as an uncompressed stream


def extract_pdf_text(data: bytes) -> str:
    """Page-level text extraction, aggregated across all pages.

    Covers literal-string Tj/TJ operators in plain, Flate-compressed, or
    ASCII85+Flate content streams, which is what ordinary text-layer PDFs
    use. Anything more exotic raises ParseFailure and surfaces as a failed
    fetch.
    """
    if not data.startswith(b"%PDF"):
        raise ParseFailure("not a PDF document")
    chunks: list[str] = []
    for match in _PDF_STREAM_RE.finditer(data):
        stream = _decode_pdf_stream(match.group(1))
        for op in _PDF_TEXT_SHOW_RE.finditer(stream):
            piece = b"".join(
                _pdf_unescape(lit[1:-1]) for lit in _PDF_LITERAL_RE.findall(op.group(0))
            )
            if piece.strip():
                chunks.append(piece.decode("latin-1", errors="replace"))
    if not chunks:
        raise ParseFailure("no extractable text layer")
    return "\n".join(chunks)


def _pdf_unescape(raw: bytes) -> bytes:
    out = bytearray()
    i = 0
    while i < len(raw):
        byte = raw[i : i + 1]
        if byte != b"\\":
            out += byte
            i += 1
            continue
        j = i + 1
        digits = b""
        while j < len(raw) and len(digits) < 3 and raw[j : j + 1] in b"01234567":
            digits += raw[j : j + 1]
            j += 1
        if digits:
            out.append(int(digits, 8) & 0xFF)
            i = j
            continue
        nxt = raw[i + 1 : i + 2]
        out += _PDF_ESCAPES.get(nxt, nxt)
        i += 2
    return bytes(out)


_DOCX_NS = "{http://schemas.openxmlformats.org/wordprocessingml/2006/main}"


def extract_docx_text(data: bytes) -> str:
    """Structure-aware .docx extraction: paragraph text and table cell contents."""
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            xml = archive.read("word/document.xml")
    except (zipfile.BadZipFile, KeyError) as exc:
        raise ParseFailure(f"not a .docx document: {exc}") from exc
    root = ElementTree.fromstring(xml)
    lines = []
    for paragraph in root.iter(f"{_DOCX_NS}p"):
        text = "".join(node.text or "" for node in paragraph.iter(f"{_DOCX_NS}t"))
        if text.strip():
            lines.append(text)
    return "\n".join(lines)


_XLSX_MAIN_NS = "{http://schemas.openxmlformats.org/spreadsheetml/2006/main}"


def extract_xlsx_text(data: bytes) -> str:
    """Sheet-by-sheet cell text, row-major, tab-separated."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise ParseFailure(f"not an .xlsx workbook: {exc}") from exc
    with archive:
        names = archive.namelist()
        shared = _xlsx_shared_strings(archive, names)
        sheet_names = _xlsx_sheet_names(archive, names)
        sheet_files = sorted(
            n for n in names if re.fullmatch(r"xl/worksheets/sheet\d+\.xml", n)
        )
        out = []
        for index, sheet_file in enumerate(sheet_files):
            title = sheet_names[index] if index < len(sheet_names) else f"Sheet{index + 1}"
            out.append(f"sheet: {title}")
            root = ElementTree.fromstring(archive.read(sheet_file))
            for row in root.iter(f"{_XLSX_MAIN_NS}row"):
                values = [_xlsx_cell_value(cell, shared) for cell in row.iter(f"{_XLSX_MAIN_NS}c")]
                values = [v for v in values if v != ""]
                if values:
                    out.append("\t".join(values))
        return "\n".join(out)


def _xlsx_shared_strings(archive: zipfile.ZipFile, names: list[str]) -> list[str]:
    if "xl/sharedStrings.xml" not in names:
        return []
    root = ElementTree.fromstring(archive.read("xl/sharedStrings.xml"))
    return [
        "".join(node.text or "" for node in item.iter(f"{_XLSX_MAIN_NS}t"))
        for item in root.iter(f"{_XLSX_MAIN_NS}si")
    ]


def _xlsx_sheet_names(archive: zipfile.ZipFile, names: list[str]) -> list[str]:
    if "xl/workbook.xml" not in names:
        return []
    root = ElementTree.fromstring(archive.read("xl/workbook.xml"))
    return [sheet.get("name", "") for sheet in root.iter(f"{_XLSX_MAIN_NS}sheet")]


def _xlsx_cell_value(cell, shared: list[str]) -> str:
    cell_type = cell.get("t", "n")
    if cell_type == "inlineStr":
        return "".join(node.text or "" for node in cell.iter(f"{_XLSX_MAIN_NS}t"))
    value = cell.find(f"{_XLSX_MAIN_NS}v")
    if value is None or value.text is None:
        return ""
    if cell_type == "s":
        try:
            return shared[int(value.text)]
        except (ValueError, IndexError):
            return ""
    return value.text


def _convert_legacy_doc(data: bytes) -> str:
    converter = shutil.which("antiword") or shutil.which("catdoc")
    if converter is None:
        raise ParseFailure("no external .doc converter available")
    with tempfile.NamedTemporaryFile(suffix=".doc") as tmp:
        tmp.write(data)
        tmp.flush()
        proc = subprocess.run(
            [converter, tmp.name], capture_output=True, text=True, timeout=60
        )
    if proc.returncode != 0:
        raise ParseFailure(f"doc converter failed: {proc.stderr.strip()[:200]}")
    return proc.stdout


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def describe_image(
    ref: ArtifactRef,
    http_client,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
    issue_title: str = "",
) -> ArtifactContent:
    """Download an image (size-capped) and describe it via the vision role."""
    if ref.kind is not ArtifactKind.IMAGE:
        raise ValueError(f"not an image kind: {ref.kind.value}")
    try:
        resp = _http_get(ref.normalized_url, http_client, limits)
        declared = (getattr(resp, "headers", {}) or {}).get("Content-Length")
        if declared and int(declared) > limits.max_image_bytes:
            return _failed(ref, f"image exceeds {limits.max_image_bytes} bytes")
        data = resp.content
        if len(data) > limits.max_image_bytes:
            return _failed(ref, f"image exceeds {limits.max_image_bytes} bytes")
        if not data:
            return _failed(ref, "empty image download")
        prompt = render("vision_describer", issue_title=issue_title)
        description = gateway.complete_vision(Role.VISION_DESCRIBER, data, prompt)
        return _ok(ref, description, limits)
    except PipelineError as exc:
        return _failed(ref, str(exc))
    except Exception as exc:  # noqa: BLE001
        return _failed(ref, f"unexpected error: {exc}")

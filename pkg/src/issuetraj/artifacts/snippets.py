"""Extraction of fenced and inline code snippets from markdown comment bodies."""

from __future__ import annotations

import re

from .model import CodeSnippet

_FENCE_RE = re.compile(r"^ {0,3}(`{3,})(.*)$")
_INLINE_RE = re.compile(r"`([^`\n]+)`")


def fenced_blocks(body: str) -> list[tuple[int, int, str, str]]:
    """Locate fenced code blocks: ``(outer_start, outer_end, info, content)``.

    The outer span covers the fence delimiters (used to mask code regions
    before URL scanning); content excludes them. An unterminated fence runs
    to end of body.
    """
    blocks: list[tuple[int, int, str, str]] = []
    offset = 0
    opened: tuple[int, str, int] | None = None  # (outer_start, info, content_start)
    fence_len = 0
    for line in body.split("\n"):
        line_start = offset
        offset += len(line) + 1
        match = _FENCE_RE.match(line)
        if opened is None:
            if match:
                opened = (line_start, match.group(2).strip(), min(offset, len(body)))
                fence_len = len(match.group(1))
        elif match and not match.group(2).strip() and len(match.group(1)) >= fence_len:
            outer_start, info, content_start = opened
            content = body[content_start:line_start]
            blocks.append((outer_start, min(offset, len(body)), info, content))
            opened = None
    if opened is not None:
        outer_start, info, content_start = opened
        blocks.append((outer_start, len(body), info, body[content_start:]))
    return blocks


def mask_spans(body: str, spans: list[tuple[int, int]]) -> str:
    """Blank out span contents (newlines kept) so offsets stay aligned."""
    chars = list(body)
    for start, end in spans:
        for i in range(start, min(end, len(chars))):
            if chars[i] != "\n":
                chars[i] = " "
    return "".join(chars)


def extract_code_snippets(body: str, source_comment_id: str = "") -> list[CodeSnippet]:
    """Extract fenced and inline code snippets in order of appearance.

    Fenced blocks keep the declared language from the fence info string;
    backticks inside a fence are never treated as inline spans.
    """
    if not body:
        return []
    blocks = fenced_blocks(body)
    found: list[tuple[int, CodeSnippet]] = []
    for outer_start, _, info, content in blocks:
        hint = info.split()[0] if info else None
        found.append(
            (
                outer_start,
                CodeSnippet("fenced", hint, content.rstrip("\n"), source_comment_id),
            )
        )
    masked = mask_spans(body, [(s, e) for s, e, _, _ in blocks])
    for match in _INLINE_RE.finditer(masked):
        found.append(
            (match.start(), CodeSnippet("inline", None, match.group(1), source_comment_id))
        )
    found.sort(key=lambda pair: pair[0])
    return [snippet for _, snippet in found]

"""Comment-by-comment analysis and evidence bucketing (Phase 2B).

Each comment is analyzed against the active field schema with its linked
artifacts already resolved into the cache; extracted reasoning excerpts are
routed into per-field buckets carrying full attribution. Gateway failures
degrade to empty results and never abort the run.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .artifacts.cache import LinkCache
from .artifacts.model import FetchStatus
from .artifacts.snippets import extract_code_snippets
from .artifacts.urls import extract_urls, normalize_url
from .errors import ForeignFieldKey, GatewayFailure, InvalidUrl
from .gateway import Role
from .labels import FieldSchema
from .prompts_loader import render
from .thread_model import Comment, reaction_score

logger = logging.getLogger(__name__)

FAITHFULNESS_OVERLAP_CHARS = 10


@dataclass(frozen=True)
class CommentAnalysis:
    """Free-form analysis of one comment, with the URLs it referenced."""

    comment_id: str
    analysis_text: str
    referenced_urls: tuple[str, ...]
    snippets_considered: int
    failed: bool = False  # gateway failure marker; analysis_text is empty then


@dataclass(frozen=True)
class Excerpt:
    """An attributed evidence fragment routed to one schema field."""

    field_key: str
    text: str
    comment_id: str
    author_login: str
    association: str
    reaction_score: int


@dataclass(frozen=True)
class FieldBuckets:
    """Evidence excerpts grouped per schema field, in thread order."""

    buckets: dict[str, list[Excerpt]]

    def total_excerpts(self) -> int:
        return sum(len(items) for items in self.buckets.values())


def comment_urls(comment: Comment) -> list[str]:
    """Normalized URLs referenced by a comment, deduplicated in order."""
    seen = []
    for raw, _ in extract_urls(comment.body):
        try:
            normalized = normalize_url(raw)
        except InvalidUrl:
            continue
        if normalized not in seen:
            seen.append(normalized)
    return seen


def analyze_comment(
    comment: Comment,
    schema: FieldSchema,
    cache: LinkCache,
    gateway,
    issue_title: str = "",
) -> CommentAnalysis:
    """Run the comment analyst over one comment with its artifact context.

    The prompt carries the comment body, its code snippets, and the cached
    summaries of every URL it references (failed or skipped entries appear
    as explicit unavailability notes). Requires the cache to be populated
    for this comment's URLs beforehand.
    """
    urls = comment_urls(comment)
    snippets = extract_code_snippets(comment.body, comment.comment_id)
    prompt = render(
        "comment_analyst",
        issue_title=issue_title,
        label=schema.label.value,
        field_keys=", ".join(schema.field_keys),
        comment_author=comment.author_login,
        association=comment.association or "none",
        comment_body=comment.body,
        snippets=_render_snippets(snippets),
        link_summaries=_render_link_summaries(urls, cache),
    )
    try:
        text = gateway.complete(Role.COMMENT_ANALYST, [{"role": "user", "content": prompt}])
    except GatewayFailure as exc:
        logger.warning("comment analyst failed for %s: %s", comment.comment_id, exc)
        return CommentAnalysis(
            comment_id=comment.comment_id,
            analysis_text="",
            referenced_urls=tuple(urls),
            snippets_considered=len(snippets),
            failed=True,
        )
    return CommentAnalysis(
        comment_id=comment.comment_id,
        analysis_text=text.strip(),
        referenced_urls=tuple(urls),
        snippets_considered=len(snippets),
    )


def _render_snippets(snippets) -> str:
    if not snippets:
        return "(none)"
    lines = []
    for snippet in snippets:
        tag = snippet.snippet_kind
        if snippet.language_hint:
            tag += f" {snippet.language_hint}"
        lines.append(f"[{tag}] {snippet.text}")
    return "\n".join(lines)


def _render_link_summaries(urls: list[str], cache: LinkCache) -> str:
    if not urls:
        return "(none)"
    lines = []
    for url in urls:
        entry = cache.get(url)
        if entry is None:
            lines.append(f"- {url}: [unavailable: not fetched]")
        elif entry.fetch_status is FetchStatus.OK:
            lines.append(f"- {url}: {entry.summary}")
        else:
            lines.append(f"- {url}: [unavailable: fetch {entry.fetch_status.value}]")
    return "\n".join(lines)


def bucket_excerpts(
    comment: Comment, analysis: CommentAnalysis, schema: FieldSchema, gateway
) -> list[Excerpt]:
    """Extract (field_key, excerpt) pairs for one comment via the bucket classifier.

    The structured response is parsed strictly; an unparseable reply is
    retried once and then dropped with a warning. Pairs naming a field
    outside the schema are discarded (logged), never propagated.
    """
    guidance = "\n".join(
        f"- {key}: {schema.field_descriptions[key]}" for key in schema.field_keys
    )
    prompt = render(
        "field_bucket_classifier",
        field_guidance=guidance,
        comment_body=comment.body,
        analysis=analysis.analysis_text or "(no analysis available)",
    )
    messages = [{"role": "user", "content": prompt}]
    pairs = None
    for attempt in range(2):
        try:
            response = gateway.complete(Role.FIELD_BUCKET_CLASSIFIER, messages)
        except GatewayFailure as exc:
            logger.warning("bucket classifier failed for %s: %s", comment.comment_id, exc)
            return []
        pairs = _parse_pairs(response)
        if pairs is not None:
            break
        if attempt == 0:
            logger.warning(
                "unparseable bucket response for %s, retrying once", comment.comment_id
            )
    if pairs is None:
        logger.warning("bucket response unparseable after retry for %s", comment.comment_id)
        return []

    score = reaction_score(comment)
    excerpts = []
    for field_key, text in pairs:
        if field_key not in schema.field_keys:
            logger.warning(
                "dropping excerpt for unknown field %r (comment %s)",
                field_key,
                comment.comment_id,
            )
            continue
        if not text.strip():
            continue
        _audit_faithfulness(text, comment, analysis)
        excerpts.append(
            Excerpt(
                field_key=field_key,
                text=text.strip(),
                comment_id=comment.comment_id,
                author_login=comment.author_login,
                association=comment.association,
                reaction_score=score,
            )
        )
    return excerpts


def _parse_pairs(response: str) -> list[tuple[str, str]] | None:
    """Parse the classifier's JSON array of {field, excerpt} objects.

    Returns None when the response cannot be interpreted (triggers a retry);
    a well-formed empty array is a valid no-signal answer.
    """
    text = (response or "").strip()
    data = _try_json(text)
    if data is None:
        match = re.search(r"\[.*\]", text, re.DOTALL)
        if match:
            data = _try_json(match.group(0))
    if not isinstance(data, list):
        return None
    pairs = []
    for item in data:
        if isinstance(item, dict) and "field" in item and "excerpt" in item:
            pairs.append((str(item["field"]), str(item["excerpt"])))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            pairs.append((str(item[0]), str(item[1])))
        else:
            return None
    return pairs


def _try_json(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, ValueError):
        return None


def _audit_faithfulness(text: str, comment: Comment, analysis: CommentAnalysis) -> None:
    # Excerpts should be sourced from the comment or its analysis; log (but
    # keep) any excerpt lacking a 10-character overlap with either.
    if len(text) < FAITHFULNESS_OVERLAP_CHARS:
        return
    source = comment.body + "\n" + analysis.analysis_text
    for start in range(len(text) - FAITHFULNESS_OVERLAP_CHARS + 1):
        if text[start : start + FAITHFULNESS_OVERLAP_CHARS] in source:
            return
    logger.warning(
        "excerpt for comment %s has no %d-char overlap with its source",
        comment.comment_id,
        FAITHFULNESS_OVERLAP_CHARS,
    )


def accumulate_buckets(
    excerpts_per_comment: list[list[Excerpt]], schema: FieldSchema
) -> FieldBuckets:
    """Collect per-comment excerpts into one bucket per schema field.

    Every schema key gets a bucket (possibly empty); thread order and total
    excerpt count are preserved. A field key outside the schema here is a
    programming error upstream, not model noise.
    """
    buckets: dict[str, list[Excerpt]] = {key: [] for key in schema.field_keys}
    for excerpts in excerpts_per_comment:
        for excerpt in excerpts:
            if excerpt.field_key not in buckets:
                raise ForeignFieldKey(
                    f"excerpt field {excerpt.field_key!r} not in schema {schema.label.value}"
                )
            buckets[excerpt.field_key].append(excerpt)
    return FieldBuckets(buckets=buckets)

"""Artifact summarization and the cached resolve-or-reuse entry point."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import requests

from ..config import DEFAULT_LIMITS, Limits
from ..errors import GatewayFailure, SummaryFailure
from ..gateway import Role
from ..github_api import GitHubClient
from ..prompts_loader import render
from .cache import CacheEntry, LinkCache, utc_now
from .handlers import (
    BINARY_KINDS,
    GITHUB_KINDS,
    WEB_KINDS,
    describe_image,
    resolve_binary_document,
    resolve_github_artifact,
    resolve_web_resource,
)
from .model import ArtifactContent, ArtifactKind, ArtifactRef, FetchStatus

logger = logging.getLogger(__name__)

TRUNCATION_MARKER = " […truncated]"


@dataclass
class ResolverClients:
    """The pair of transport handles the artifact layer needs."""

    github: GitHubClient = field(default_factory=GitHubClient)
    http: object = field(default_factory=requests.Session)


def resolve_artifact(
    ref: ArtifactRef,
    clients: ResolverClients,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
    issue_title: str = "",
) -> ArtifactContent:
    """Dispatch one reference to its kind-appropriate handler."""
    if ref.kind in GITHUB_KINDS:
        return resolve_github_artifact(ref, clients.github, limits)
    if ref.kind in WEB_KINDS:
        return resolve_web_resource(ref, clients.http, limits)
    if ref.kind in BINARY_KINDS:
        return resolve_binary_document(ref, clients.http, limits)
    if ref.kind is ArtifactKind.IMAGE:
        return describe_image(ref, clients.http, gateway, limits, issue_title)
    raise ValueError(f"unhandled artifact kind {ref.kind!r}")


def summarize_artifact(
    content: ArtifactContent,
    issue_context: str,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
) -> str:
    """Turn fetched artifact text into a concise issue-oriented summary.

    Precondition: content was fetched successfully. The summary is capped at
    the configured length with an explicit truncation marker.
    """
    if content.fetch_status is not FetchStatus.OK:
        raise ValueError("summarize_artifact requires successfully fetched content")
    prompt = render(
        "link_summarizer",
        issue_context=issue_context,
        artifact_kind=content.ref.kind.value,
        artifact_text=content.text,
        max_chars=str(limits.max_summary_chars),
    )
    try:
        summary = gateway.complete(Role.LINK_SUMMARIZER, [{"role": "user", "content": prompt}])
    except GatewayFailure as exc:
        raise SummaryFailure(f"summarizer failed for {content.ref.normalized_url}: {exc}") from exc
    summary = summary.strip()
    if not summary:
        raise SummaryFailure(f"empty summary for {content.ref.normalized_url}")
    if len(summary) > limits.max_summary_chars:
        keep = limits.max_summary_chars - len(TRUNCATION_MARKER)
        summary = summary[:keep] + TRUNCATION_MARKER
    return summary


def get_or_summarize(
    cache: LinkCache,
    ref: ArtifactRef,
    clients: ResolverClients,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
    issue_context: str = "",
    now: Callable = utc_now,
) -> CacheEntry:
    """Resolve-and-summarize one reference, reusing the cache when possible.

    A cache hit performs zero fetches and zero gateway calls. On a miss the
    kind-appropriate resolver runs, successful content is summarized, and
    the entry — including failed and skipped markers — is stored, so two
    references to the same normalized URL always see the identical entry.
    """

    def factory() -> CacheEntry:
        issue_title = issue_context.split("\n", 1)[0] if issue_context else ""
        content = resolve_artifact(ref, clients, gateway, limits, issue_title)
        if content.fetch_status is FetchStatus.OK:
            try:
                summary = summarize_artifact(content, issue_context, gateway, limits)
            except SummaryFailure as exc:
                logger.warning("summary failure for %s: %s", ref.normalized_url, exc)
                return CacheEntry("", FetchStatus.FAILED, now())
            return CacheEntry(summary, FetchStatus.OK, now())
        if content.fetch_status is FetchStatus.FAILED:
            logger.info("fetch failed for %s: %s", ref.normalized_url, content.failure_reason)
        return CacheEntry("", content.fetch_status, now())

    return cache.get_or_create(ref.normalized_url, factory)

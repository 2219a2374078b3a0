"""Artifact grounding layer: link detection, retrieval, and caching."""

from .cache import CacheEntry, LinkCache, utc_now
from .model import (
    ArtifactContent,
    ArtifactKind,
    ArtifactRef,
    CodeSnippet,
    FetchStatus,
    LineAnchor,
    RefAnchor,
)
from .snippets import extract_code_snippets
from .summarize import ResolverClients, get_or_summarize, resolve_artifact, summarize_artifact
from .urls import build_ref, classify_url, extract_urls, normalize_url

__all__ = [
    "ArtifactContent",
    "ArtifactKind",
    "ArtifactRef",
    "CacheEntry",
    "CodeSnippet",
    "FetchStatus",
    "LineAnchor",
    "LinkCache",
    "RefAnchor",
    "ResolverClients",
    "build_ref",
    "classify_url",
    "extract_code_snippets",
    "extract_urls",
    "get_or_summarize",
    "normalize_url",
    "resolve_artifact",
    "summarize_artifact",
    "utc_now",
]

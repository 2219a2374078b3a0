"""Per-thread pipeline orchestration: label → augment → analyze → synthesize.

One thread flows through the phases strictly in order; distinct threads may
be processed in parallel. Every LLM or network fault inside a phase degrades
to documented markers — a failing stage is recorded per issue, and one bad
input never aborts a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from .analysis import (
    CommentAnalysis,
    FieldBuckets,
    accumulate_buckets,
    analyze_comment,
    bucket_excerpts,
)
from .artifacts.cache import LinkCache, utc_now
from .artifacts.summarize import ResolverClients, get_or_summarize
from .artifacts.urls import build_ref, extract_urls
from .config import DEFAULT_LIMITS, Limits
from .errors import InvalidUrl, PipelineError
from .labels import DEFAULT_TABLE, KeywordTable, detect_label, schema_for
from .synthesis import Trajectory, synthesize_trajectory
from .thread_model import IssueThread, header_comment, issue_title

HEADER_EXCERPT_CHARS = 500

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class StageFailure(PipelineError):
    """Wraps a phase error with the stage name for run reporting."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class IssueOutcome:
    input_path: str
    issue_number: int | None
    status: str  # "ok" | "failed"
    stage: str = ""
    reason: str = ""


@dataclass
class RunReport:
    """Batch-level diagnostics for one command invocation."""

    outcomes: list[IssueOutcome] = field(default_factory=list)
    gateway_calls: dict[str, int] = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0
    wall_time_s: float = 0.0
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def ok_count(self) -> int:
        return sum(1 for o in self.outcomes if o.status == "ok")

    @property
    def failed_count(self) -> int:
        return sum(1 for o in self.outcomes if o.status == "failed")

    def all_ok(self) -> bool:
        return self.failed_count == 0

    def to_dict(self) -> dict:
        return {
            "issues": [
                {
                    "input": o.input_path,
                    "issue_number": o.issue_number,
                    "status": o.status,
                    "stage": o.stage,
                    "reason": o.reason,
                }
                for o in self.outcomes
            ],
            "gateway_calls": dict(self.gateway_calls),
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "wall_time_s": self.wall_time_s,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class ThreadResult:
    trajectory: Trajectory
    analyses: list[CommentAnalysis]
    buckets: FieldBuckets
    cache_hits: int
    cache_misses: int
    diagnostics: list[dict]


def issue_context_of(thread: IssueThread) -> str:
    """Issue title plus a bounded excerpt of the header post (summarizer context)."""
    title = issue_title(thread)
    excerpt = header_comment(thread).body[:HEADER_EXCERPT_CHARS]
    return f"{title}\n{excerpt}"


def populate_cache(
    thread: IssueThread,
    cache: LinkCache,
    clients: ResolverClients,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
    now: Callable = utc_now,
) -> tuple[int, int]:
    """Phase 2A: resolve and summarize every link in the thread into the cache.

    Links are processed sequentially in thread order; repeated references
    resolve to the one cached entry. Returns (hits, misses).
    """
    context = issue_context_of(thread)
    hits = misses = 0
    for comment in thread.comments:
        for raw, _ in extract_urls(comment.body):
            try:
                ref = build_ref(raw, source_comment_id=comment.comment_id)
            except InvalidUrl:
                continue
            if ref.normalized_url in cache:
                hits += 1
            else:
                misses += 1
            get_or_summarize(
                cache, ref, clients, gateway, limits, issue_context=context, now=now
            )
    return hits, misses


def process_thread(
    thread: IssueThread,
    repo_labels: list[str],
    cache: LinkCache,
    clients: ResolverClients,
    gateway,
    limits: Limits = DEFAULT_LIMITS,
    keyword_table: KeywordTable = DEFAULT_TABLE,
    now: Callable = utc_now,
) -> ThreadResult:
    """Run phases 1 → 2A → 2B → 3 for one parsed thread."""
    diagnostics: list[dict] = []

    try:
        label_type, detection = detect_label(thread, repo_labels, gateway, keyword_table)
        schema = schema_for(label_type)
    except Exception as exc:
        raise StageFailure("label", exc) from exc

    try:
        hits, misses = populate_cache(thread, cache, clients, gateway, limits, now=now)
    except Exception as exc:
        raise StageFailure("augment", exc) from exc

    title = issue_title(thread)
    analyses: list[CommentAnalysis] = []
    excerpts_per_comment = []
    try:
        for comment in thread.comments:
            analysis = analyze_comment(comment, schema, cache, gateway, issue_title=title)
            if analysis.failed:
                diagnostics.append(
                    {"stage": "analyze", "comment_id": comment.comment_id, "error": "gateway failure"}
                )
            analyses.append(analysis)
            excerpts_per_comment.append(bucket_excerpts(comment, analysis, schema, gateway))
        buckets = accumulate_buckets(excerpts_per_comment, schema)
    except Exception as exc:
        raise StageFailure("analyze", exc) from exc

    try:
        trajectory = synthesize_trajectory(
            thread,
            repo_labels,
            label_type,
            detection,
            schema,
            cache,
            analyses,
            buckets,
            gateway,
            diagnostics=diagnostics,
        )
    except Exception as exc:
        raise StageFailure("synthesize", exc) from exc

    return ThreadResult(
        trajectory=trajectory,
        analyses=analyses,
        buckets=buckets,
        cache_hits=hits,
        cache_misses=misses,
        diagnostics=diagnostics,
    )

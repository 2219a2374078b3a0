"""issuetraj: GitHub issue threads → label-guided reasoning trajectories.

A multi-stage pipeline: label detection routes each issue to a
label-specific field schema; links and code artifacts in every comment are
resolved into a summarized cache; comments are analyzed against the schema
and their evidence bucketed per field; buckets are synthesized into a
structured trajectory file; a judge stage scores and filters the results.
"""

from .analysis import (
    CommentAnalysis,
    Excerpt,
    FieldBuckets,
    accumulate_buckets,
    analyze_comment,
    bucket_excerpts,
)
from .artifacts import (
    ArtifactContent,
    ArtifactKind,
    ArtifactRef,
    CacheEntry,
    CodeSnippet,
    FetchStatus,
    LinkCache,
    ResolverClients,
    build_ref,
    classify_url,
    extract_code_snippets,
    extract_urls,
    get_or_summarize,
    normalize_url,
    summarize_artifact,
)
from .config import DEFAULT_LIMITS, Limits, RunConfig
from .gateway import LlmGateway, ModelRoute, Role
from .judge import (
    SplitStats,
    Verdict,
    VerdictCategory,
    aggregate_verdicts,
    filter_approved,
    issue_type_stats,
    judge_trajectory,
)
from .labels import (
    DetectionMethod,
    FieldSchema,
    LabelType,
    classify_label_llm,
    detect_label,
    match_labels_by_keyword,
    schema_for,
)
from .pipeline import RunReport, process_thread
from .synthesis import (
    Trajectory,
    parse_trajectory,
    rank_evidence,
    serialize_trajectory,
    synthesize_field,
    synthesize_trajectory,
)
from .thread_model import (
    Comment,
    IssueThread,
    fetch_issue_thread,
    header_comment,
    issue_title,
    parse_thread,
    reaction_score,
    serialize_thread,
)

__version__ = "0.1.0"

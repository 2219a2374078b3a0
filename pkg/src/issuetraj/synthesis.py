"""Trajectory synthesis (Phase 3) and the canonical output file format.

Populated field buckets become per-field paragraph summaries, with evidence
ranked so maintainer-tier authors and highly reacted comments lead. Fields
without meaningful evidence stay null — never a fabricated summary. The
serialized file is canonical: fixed key order, 2-space indent, UTF-8,
trailing newline, so equal trajectories are byte-equal on disk.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .analysis import CommentAnalysis, Excerpt, FieldBuckets
from .artifacts.cache import LinkCache
from .errors import GatewayFailure, MalformedInput
from .gateway import Role
from .labels import DetectionMethod, FieldSchema, LabelType
from .prompts_loader import render
from .thread_model import IssueThread, issue_title

logger = logging.getLogger(__name__)

# associations treated as maintainer-tier during evidence ranking
MAINTAINER_ASSOCIATIONS = frozenset({"owner", "member", "collaborator"})

# exact token the synthesizer prompt asks for when evidence is not meaningful
NO_EVIDENCE_SENTINEL = "NO_MEANINGFUL_EVIDENCE"


@dataclass(frozen=True)
class Trajectory:
    """The synthesized narrative object, one per processed issue."""

    issue_title: str
    labels: tuple[str, ...]
    label_type: LabelType
    label_detection: DetectionMethod
    field_schema: tuple[str, ...]
    link_cache_snapshot: dict[str, dict]
    comment_analyses: tuple[CommentAnalysis, ...]
    field_buckets: FieldBuckets
    synthesized: dict[str, str | None]

    def __post_init__(self):
        if set(self.synthesized) != set(self.field_schema):
            raise ValueError("synthesized key set must equal the field schema")
        for key, paragraph in self.synthesized.items():
            if paragraph is not None and not paragraph.strip():
                raise ValueError(f"field {key}: non-null paragraph must be non-empty")


def is_maintainer(association: str) -> bool:
    return association.lower() in MAINTAINER_ASSOCIATIONS


def rank_evidence(bucket: list[Excerpt]) -> list[Excerpt]:
    """Order excerpts for synthesis; the input list is left unmodified.

    Stable sort: maintainer-tier associations first, then reaction score
    descending, then original thread order.
    """
    return sorted(
        bucket,
        key=lambda e: (0 if is_maintainer(e.association) else 1, -e.reaction_score),
    )


def synthesize_field(
    field_key: str,
    ranked: list[Excerpt],
    title: str,
    gateway,
    guidance: str = "",
    diagnostics: list | None = None,
) -> str | None:
    """Produce the paragraph for one field, or None.

    An empty bucket returns None without any gateway call. The model may
    answer with the no-evidence sentinel, which also yields None. A gateway
    failure yields None plus a marker in the run diagnostics.
    """
    if not ranked:
        return None
    lines = []
    for position, excerpt in enumerate(ranked, 1):
        lines.append(
            f"{position}. [{excerpt.author_login} ({excerpt.association or 'none'}), "
            f"reactions {excerpt.reaction_score}] {excerpt.text}"
        )
    prompt = render(
        "trajectory_synthesizer",
        issue_title=title,
        field_key=field_key,
        guidance=guidance,
        excerpts="\n".join(lines),
        sentinel=NO_EVIDENCE_SENTINEL,
    )
    try:
        response = gateway.complete(
            Role.TRAJECTORY_SYNTHESIZER, [{"role": "user", "content": prompt}]
        )
    except GatewayFailure as exc:
        logger.warning("synthesis failed for field %s: %s", field_key, exc)
        if diagnostics is not None:
            diagnostics.append({"stage": "synthesis", "field": field_key, "error": str(exc)})
        return None
    paragraph = response.strip()
    if not paragraph or paragraph == NO_EVIDENCE_SENTINEL:
        return None
    return paragraph


def synthesize_trajectory(
    thread: IssueThread,
    repo_labels: list[str],
    label_type: LabelType,
    detection: DetectionMethod,
    schema: FieldSchema,
    cache: LinkCache,
    analyses: list[CommentAnalysis],
    buckets: FieldBuckets,
    gateway,
    diagnostics: list | None = None,
) -> Trajectory:
    """Assemble the full trajectory for one processed thread.

    Fields are synthesized in schema order from ranked bucket evidence; the
    embedded cache snapshot is restricted to URLs this thread referenced.
    """
    title = issue_title(thread)
    synthesized = {
        key: synthesize_field(
            key,
            rank_evidence(buckets.buckets[key]),
            title,
            gateway,
            guidance=schema.field_descriptions[key],
            diagnostics=diagnostics,
        )
        for key in schema.field_keys
    }
    referenced = sorted({url for a in analyses for url in a.referenced_urls})
    snapshot = {}
    for url in referenced:
        entry = cache.get(url)
        if entry is not None:
            snapshot[url] = {"summary": entry.summary, "fetch_status": entry.fetch_status.value}
    return Trajectory(
        issue_title=title,
        labels=tuple(repo_labels),
        label_type=label_type,
        label_detection=detection,
        field_schema=tuple(schema.field_keys),
        link_cache_snapshot=snapshot,
        comment_analyses=tuple(analyses),
        field_buckets=buckets,
        synthesized=synthesized,
    )


def trajectory_filename(issue_number: int) -> str:
    return f"{issue_number}_issue_trajectory.json"


def serialize_trajectory(trajectory: Trajectory, issue_number: int) -> tuple[bytes, str]:
    """Render a trajectory to its canonical file bytes and filename.

    Canonical form: fixed top-level key order, synthesized fields in schema
    order, 2-space indentation, UTF-8, trailing newline. Serialization is a
    fixpoint: serialize(parse(serialize(t))) is byte-identical.
    """
    doc = {
        "title": trajectory.issue_title,
        "labels": list(trajectory.labels),
        "label_type": trajectory.label_type.value,
        "label_detection": trajectory.label_detection.value,
        "field_schema": list(trajectory.field_schema),
        "link_cache": {url: dict(rec) for url, rec in sorted(trajectory.link_cache_snapshot.items())},
        "comment_analyses": [
            {
                "comment_id": a.comment_id,
                "analysis": a.analysis_text,
                "referenced_urls": list(a.referenced_urls),
                "snippets_considered": a.snippets_considered,
                "failed": a.failed,
            }
            for a in trajectory.comment_analyses
        ],
        "field_buckets": {
            key: [
                {
                    "text": e.text,
                    "comment_id": e.comment_id,
                    "author_login": e.author_login,
                    "association": e.association,
                    "reaction_score": e.reaction_score,
                }
                for e in trajectory.field_buckets.buckets[key]
            ]
            for key in trajectory.field_schema
        },
        "trajectory": {key: trajectory.synthesized[key] for key in trajectory.field_schema},
    }
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    return text.encode("utf-8"), trajectory_filename(issue_number)


def parse_trajectory(data: bytes | str) -> Trajectory:
    """Read a trajectory file back into an equal Trajectory object."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"not a valid trajectory file: {exc}") from exc
    try:
        analyses = tuple(
            CommentAnalysis(
                comment_id=a["comment_id"],
                analysis_text=a["analysis"],
                referenced_urls=tuple(a["referenced_urls"]),
                snippets_considered=int(a["snippets_considered"]),
                failed=bool(a.get("failed", False)),
            )
            for a in doc["comment_analyses"]
        )
        buckets = FieldBuckets(
            buckets={
                key: [
                    Excerpt(
                        field_key=key,
                        text=e["text"],
                        comment_id=e["comment_id"],
                        author_login=e["author_login"],
                        association=e["association"],
                        reaction_score=int(e["reaction_score"]),
                    )
                    for e in items
                ]
                for key, items in doc["field_buckets"].items()
            }
        )
        return Trajectory(
            issue_title=doc["title"],
            labels=tuple(doc["labels"]),
            label_type=LabelType(doc["label_type"]),
            label_detection=DetectionMethod(doc["label_detection"]),
            field_schema=tuple(doc["field_schema"]),
            link_cache_snapshot={u: dict(r) for u, r in doc["link_cache"].items()},
            comment_analyses=analyses,
            field_buckets=buckets,
            synthesized=dict(doc["trajectory"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"trajectory file missing or bad field: {exc}") from exc

"""LLM-as-judge scoring, verdict aggregation, and dataset statistics.

Each trajectory is scored on five criteria (1-5) and mapped to a categorical
verdict; trajectories rated Excellent/Good/Acceptable count as approved.
Aggregation renders per-split statistics with 1-decimal half-up percentages;
the printed approval rate is the sum of the rounded approved-category
percentages, matching how the per-category rows visually add up in the
report tables.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction

from .errors import EmptyInput, GatewayFailure, JudgeFailure
from .gateway import Role
from .labels import LabelType
from .prompts_loader import render
from .synthesis import Trajectory, serialize_trajectory
from .thread_model import IssueThread, format_timestamp

logger = logging.getLogger(__name__)

CRITERIA = (
    "field_coverage",
    "factual_accuracy",
    "technical_depth",
    "structural_faithfulness",
    "conciseness_clarity",
)

MIN_SCORE = 1
MAX_SCORE = 5


class VerdictCategory(str, Enum):
    EXCELLENT = "Excellent"
    GOOD = "Good"
    ACCEPTABLE = "Acceptable"
    POOR = "Poor"
    INADEQUATE = "Inadequate"


APPROVED_CATEGORIES = frozenset(
    {VerdictCategory.EXCELLENT, VerdictCategory.GOOD, VerdictCategory.ACCEPTABLE}
)

# mean-score thresholds (inclusive lower bounds), checked top-down
DEFAULT_THRESHOLDS: tuple[tuple[str, VerdictCategory], ...] = (
    ("4.6", VerdictCategory.EXCELLENT),
    ("3.8", VerdictCategory.GOOD),
    ("3.0", VerdictCategory.ACCEPTABLE),
    ("2.0", VerdictCategory.POOR),
)


@dataclass(frozen=True)
class Verdict:
    """The judge's quality rating for one trajectory."""

    issue_id: str
    criterion_scores: dict[str, int]
    category: VerdictCategory
    rationale: str

    def __post_init__(self):
        if set(self.criterion_scores) != set(CRITERIA):
            raise ValueError("verdict must score all five criteria")
        for name, score in self.criterion_scores.items():
            if not MIN_SCORE <= score <= MAX_SCORE:
                raise ValueError(f"criterion {name}: score {score} outside 1..5")


@dataclass(frozen=True)
class SplitStats:
    """Aggregated statistics for one dataset split."""

    split_name: str
    total: int
    approved: int
    approval_rate: float
    category_counts: dict[str, int]
    category_percentages: dict[str, float]
    label_counts: dict[str, int]
    label_percentages: dict[str, float]


def category_from_scores(
    scores: dict[str, int],
    thresholds: tuple[tuple[str, VerdictCategory], ...] = DEFAULT_THRESHOLDS,
) -> VerdictCategory:
    """Map criterion scores to a category by mean-score thresholds (exact arithmetic)."""
    mean = Fraction(sum(scores.values()), len(scores))
    for bound, category in thresholds:
        if mean >= Fraction(bound):
            return category
    return VerdictCategory.INADEQUATE


def judge_trajectory(trajectory: Trajectory, thread: IssueThread, gateway) -> Verdict:
    """Score one trajectory against its source thread.

    The model's structured reply must carry all five criteria; unparseable
    replies are retried once, then raise JudgeFailure. The category is
    recomputed from the scores — when the model's stated category disagrees,
    the recomputed one wins (logged).
    """
    trajectory_bytes, _ = serialize_trajectory(trajectory, issue_number=thread.issue_number)
    prompt = render(
        "quality_judge",
        thread_text=render_thread_text(thread),
        trajectory_json=trajectory_bytes.decode("utf-8"),
    )
    messages = [{"role": "user", "content": prompt}]
    parsed = None
    for attempt in range(2):
        try:
            response = gateway.complete(Role.QUALITY_JUDGE, messages)
        except GatewayFailure as exc:
            raise JudgeFailure(f"judge gateway failed: {exc}") from exc
        parsed = _parse_judge_response(response)
        if parsed is not None:
            break
        if attempt == 0:
            logger.warning("unparseable judge response, retrying once")
    if parsed is None:
        raise JudgeFailure("judge response unparseable after retry")

    scores, stated_category, rationale = parsed
    computed = category_from_scores(scores)
    if stated_category is not None and stated_category is not computed:
        logger.warning(
            "judge stated %s but scores compute to %s; keeping computed",
            stated_category.value,
            computed.value,
        )
    return Verdict(
        issue_id=str(thread.issue_number),
        criterion_scores=scores,
        category=computed,
        rationale=rationale,
    )


def _parse_judge_response(
    response: str,
) -> tuple[dict[str, int], VerdictCategory | None, str] | None:
    text = (response or "").strip()
    data = _try_json_object(text)
    if data is None:
        start, end = text.find("{"), text.rfind("}")
        if start != -1 and end > start:
            data = _try_json_object(text[start : end + 1])
    if not isinstance(data, dict):
        return None
    scores = {}
    for name in CRITERIA:
        value = data.get(name)
        if not isinstance(value, int) or isinstance(value, bool):
            return None
        if not MIN_SCORE <= value <= MAX_SCORE:
            return None
        scores[name] = value
    stated = None
    raw_category = str(data.get("category", "")).strip().capitalize()
    try:
        stated = VerdictCategory(raw_category)
    except ValueError:
        stated = None
    return scores, stated, str(data.get("rationale", "")).strip()


def _try_json_object(text: str):
    try:
        value = json.loads(text)
    except (json.JSONDecodeError, ValueError):
        return None
    return value if isinstance(value, dict) else None


def render_thread_text(thread: IssueThread) -> str:
    """Flatten a thread for the judge prompt, header post first-labelled."""
    lines = [f"issue #{thread.issue_number} in {thread.repo_owner}/{thread.repo_name}"]
    for comment in thread.comments:
        marker = "header" if comment.is_header else "comment"
        lines.append(
            f"\n[{marker} by {comment.author_login} ({comment.association or 'none'}) "
            f"at {format_timestamp(comment.created_at)}]"
        )
        lines.append(comment.body)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _percent(count: int, total: int) -> Decimal:
    return (Decimal(count * 100) / Decimal(total)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP
    )


def aggregate_verdicts(verdicts: list[Verdict], split_name: str) -> SplitStats:
    """Per-category counts and percentages for one split of verdicts.

    Percentages are half-up to one decimal. The approval rate is the sum of
    the rounded Excellent/Good/Acceptable percentages, so it always equals
    what the rendered table's approved rows add up to.
    """
    if not verdicts:
        raise EmptyInput(f"no verdicts for split {split_name!r}")
    counts = {category.value: 0 for category in VerdictCategory}
    for verdict in verdicts:
        counts[verdict.category.value] += 1
    total = len(verdicts)
    percentages = {name: _percent(count, total) for name, count in counts.items()}
    approved = sum(counts[c.value] for c in APPROVED_CATEGORIES)
    approval_rate = sum(percentages[c.value] for c in APPROVED_CATEGORIES)
    return SplitStats(
        split_name=split_name,
        total=total,
        approved=approved,
        approval_rate=float(approval_rate),
        category_counts=counts,
        category_percentages={k: float(v) for k, v in percentages.items()},
        label_counts={},
        label_percentages={},
    )


def issue_type_stats(trajectories: list[Trajectory], split_name: str) -> SplitStats:
    """Per-label counts and percentages over approved trajectories."""
    if not trajectories:
        raise EmptyInput(f"no trajectories for split {split_name!r}")
    counts = {label.value: 0 for label in LabelType}
    for trajectory in trajectories:
        counts[trajectory.label_type.value] += 1
    total = len(trajectories)
    percentages = {name: float(_percent(count, total)) for name, count in counts.items()}
    return SplitStats(
        split_name=split_name,
        total=total,
        approved=total,
        approval_rate=100.0,
        category_counts={},
        category_percentages={},
        label_counts=counts,
        label_percentages=percentages,
    )


def filter_approved(pairs: list[tuple[Trajectory, Verdict]]) -> list[Trajectory]:
    """Keep trajectories whose verdict is Excellent, Good, or Acceptable."""
    return [trajectory for trajectory, verdict in pairs if verdict.category in APPROVED_CATEGORIES]


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def render_verdict_table(stats_list: list[SplitStats]) -> str:
    """Aligned-text verdict distribution table (count + % per split)."""
    header = ["Verdict"]
    for stats in stats_list:
        header += [f"{stats.split_name} C", "%"]
    rows = [header]
    for category in VerdictCategory:
        row = [category.value]
        for stats in stats_list:
            row += [
                str(stats.category_counts.get(category.value, 0)),
                f"{stats.category_percentages.get(category.value, 0.0):.1f}",
            ]
        rows.append(row)
    total_row = ["Total"]
    approved_row = ["Total Approved (E+G+A)"]
    for stats in stats_list:
        total_row += [str(stats.total), "100.0"]
        approved_row += [str(stats.approved), f"{stats.approval_rate:.1f}"]
    rows.append(total_row)
    rows.append(approved_row)
    return _align(rows)


def render_label_table(stats_list: list[SplitStats]) -> str:
    """Aligned-text issue-type distribution table over approved trajectories."""
    header = ["Category"]
    for stats in stats_list:
        header += [f"{stats.split_name} C", "%"]
    rows = [header]
    for label in LabelType:
        row = [label.value]
        for stats in stats_list:
            row += [
                str(stats.label_counts.get(label.value, 0)),
                f"{stats.label_percentages.get(label.value, 0.0):.1f}",
            ]
        rows.append(row)
    total_row = ["Total Approved"]
    for stats in stats_list:
        total_row += [str(stats.total), "100.0"]
    rows.append(total_row)
    return _align(rows)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def stats_to_dict(stats: SplitStats) -> dict:
    return {
        "split_name": stats.split_name,
        "total": stats.total,
        "approved": stats.approved,
        "approval_rate": stats.approval_rate,
        "category_counts": stats.category_counts,
        "category_percentages": stats.category_percentages,
        "label_counts": stats.label_counts,
        "label_percentages": stats.label_percentages,
    }


def verdict_to_dict(verdict: Verdict) -> dict:
    return {
        "issue_id": verdict.issue_id,
        "scores": dict(verdict.criterion_scores),
        "category": verdict.category.value,
        "rationale": verdict.rationale,
    }


def verdict_from_dict(doc: dict) -> Verdict:
    return Verdict(
        issue_id=str(doc["issue_id"]),
        criterion_scores={k: int(v) for k, v in doc["scores"].items()},
        category=VerdictCategory(doc["category"]),
        rationale=str(doc.get("rationale", "")),
    )


def review_worksheet_csv(verdicts: list[Verdict]) -> str:
    """CSV worksheet supporting an external manual review pass."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["issue_id", *CRITERIA, "category", "rationale", "reviewer_notes"])
    for verdict in verdicts:
        writer.writerow(
            [
                verdict.issue_id,
                *[verdict.criterion_scores[name] for name in CRITERIA],
                verdict.category.value,
                verdict.rationale,
                "",
            ]
        )
    return buffer.getvalue()

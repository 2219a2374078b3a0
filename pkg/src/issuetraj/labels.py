"""Issue label detection and the label-specific field schema registry.

Label detection is two-stage: pre-existing repository labels are matched
against a keyword table first; only unmatched issues are sent to the label
classifier model. The detected label selects the field schema that drives
every downstream phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import GatewayFailure
from .gateway import Role
from .prompts_loader import render
from .thread_model import IssueThread, header_comment, issue_title


class LabelType(str, Enum):
    BUG = "bug"
    ENHANCEMENT = "enhancement"
    QUESTION = "question"
    HELP_WANTED = "help_wanted"
    GOOD_FIRST_ISSUE = "good_first_issue"
    DOCUMENTATION = "documentation"
    GENERAL = "general"


class DetectionMethod(str, Enum):
    KEYWORD_MATCH = "keyword_match"
    LLM_CLASSIFIED = "llm_classified"


@dataclass(frozen=True)
class FieldSchema:
    """Ordered field keys for one label, with per-key prompt guidance."""

    label: LabelType
    field_keys: tuple[str, ...]
    field_descriptions: dict[str, str]

    def __post_init__(self):
        if not self.field_keys:
            raise ValueError(f"schema for {self.label} has no field keys")
        if set(self.field_keys) != set(self.field_descriptions):
            raise ValueError(f"schema for {self.label}: keys and descriptions disagree")


@dataclass(frozen=True)
class KeywordTable:
    """Keyword containment table plus the multi-match priority order.

    Defaults are compiled in; both parts can be overridden from a JSON
    config file so deployments can tune matching without a rebuild.
    """

    keywords: dict[LabelType, tuple[str, ...]]
    priority: tuple[LabelType, ...]


DEFAULT_KEYWORDS: dict[LabelType, tuple[str, ...]] = {
    LabelType.BUG: ("bug", "defect", "crash", "regression"),
    LabelType.ENHANCEMENT: ("enhancement", "feature", "feature request", "improvement"),
    LabelType.DOCUMENTATION: ("documentation", "docs"),
    LabelType.QUESTION: ("question", "support", "q&a"),
    LabelType.GOOD_FIRST_ISSUE: ("good first issue", "beginner", "easy", "starter"),
    LabelType.HELP_WANTED: ("help wanted", "help-wanted", "contributions welcome"),
}

# More schema-specific labels win on multi-match; ties must be deterministic.
DEFAULT_PRIORITY: tuple[LabelType, ...] = (
    LabelType.BUG,
    LabelType.ENHANCEMENT,
    LabelType.DOCUMENTATION,
    LabelType.QUESTION,
    LabelType.GOOD_FIRST_ISSUE,
    LabelType.HELP_WANTED,
)

DEFAULT_TABLE = KeywordTable(keywords=DEFAULT_KEYWORDS, priority=DEFAULT_PRIORITY)


def load_keyword_table(path: str) -> KeywordTable:
    """Load a keyword table override from a JSON file.

    Expected shape: ``{"keywords": {"bug": ["bug", ...], ...},
    "priority": ["bug", "enhancement", ...]}``. Missing parts fall back to
    the compiled-in defaults.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    keywords = dict(DEFAULT_KEYWORDS)
    for name, words in (doc.get("keywords") or {}).items():
        keywords[LabelType(name)] = tuple(str(w) for w in words)
    priority = tuple(LabelType(name) for name in doc.get("priority") or DEFAULT_PRIORITY)
    return KeywordTable(keywords=keywords, priority=priority)


def _normalize_label(text: str) -> str:
    out = text.lower()
    for ch in "-_":
        out = out.replace(ch, " ")
    return " ".join(out.split())


def match_labels_by_keyword(
    repo_labels: list[str], table: KeywordTable = DEFAULT_TABLE
) -> LabelType | None:
    """Match repository labels against the keyword table.

    Labels are lowercased with hyphen/underscore/space runs normalized to
    single spaces, then tested for keyword containment. The highest-priority
    matching label type wins; ``general`` is never returned here.
    """
    normalized = [_normalize_label(lb) for lb in repo_labels]
    for label_type in table.priority:
        keywords = [_normalize_label(kw) for kw in table.keywords.get(label_type, ())]
        for label in normalized:
            if any(kw and kw in label for kw in keywords):
                return label_type
    return None


def classify_label_llm(title: str, body: str, gateway) -> LabelType:
    """Ask the label classifier role to pick one of the seven label names.

    The answer is parsed by exact match after trimming and lowercasing; an
    unparseable response is retried once, then falls back to ``general``.
    Transport-level GatewayFailure propagates to the caller.
    """
    names = ", ".join(lt.value for lt in LabelType)
    prompt = render("label_classifier", title=title, body=body, label_names=names)
    messages = [{"role": "user", "content": prompt}]
    for _ in range(2):
        response = gateway.complete(Role.LABEL_CLASSIFIER, messages)
        answer = response.strip().lower()
        try:
            return LabelType(answer)
        except ValueError:
            continue
    return LabelType.GENERAL


def detect_label(
    thread: IssueThread,
    repo_labels: list[str],
    gateway,
    table: KeywordTable = DEFAULT_TABLE,
) -> tuple[LabelType, DetectionMethod]:
    """Detect the issue's label: keyword match first, LLM fallback second.

    A keyword hit never touches the gateway. If the classifier itself fails
    at the transport level the result degrades to ``general``.
    """
    matched = match_labels_by_keyword(repo_labels, table)
    if matched is not None:
        return matched, DetectionMethod.KEYWORD_MATCH
    title = issue_title(thread)
    body = header_comment(thread).body
    try:
        return classify_label_llm(title, body, gateway), DetectionMethod.LLM_CLASSIFIED
    except GatewayFailure:
        return LabelType.GENERAL, DetectionMethod.LLM_CLASSIFIED


_SCHEMA_SPECS: dict[LabelType, list[tuple[str, str]]] = {
    LabelType.BUG: [
        ("problem_description", "What is broken, observed symptoms, and error output."),
        ("reproduction_steps", "Concrete steps, environment or input needed to trigger the problem."),
        ("scope_and_impact", "Affected versions, platforms, components, and who is hit."),
        ("root_cause_analysis", "Diagnosis of the underlying defect, including rejected hypotheses."),
        ("workaround", "Temporary mitigations users can apply before a fix lands."),
        ("solution_plan", "The agreed approach for the fix and its key changes."),
        ("decision_consensus", "Maintainer decisions and points the discussion converged on."),
        ("testing_and_verification", "How the fix was or should be validated."),
    ],
    LabelType.ENHANCEMENT: [
        ("feature_description", "What new capability or behavior is being requested."),
        ("motivation_and_use_case", "Why it matters and the scenarios it unlocks."),
        ("solution_approaches", "Candidate designs or implementations that were discussed."),
        ("technical_challenges", "Obstacles, risks, and compatibility concerns raised."),
        ("design_decisions", "Choices settled during the discussion and their rationale."),
        ("implementation_progress", "Work already done: branches, PRs, partial implementations."),
    ],
    LabelType.QUESTION: [
        ("question_asked", "The actual question the author needs answered."),
        ("context_and_evidence", "Configuration, logs, or code the author supplied."),
        ("clarification_requests", "Follow-up questions asked to pin the problem down."),
        ("answers_and_explanations", "Answers given and how the behavior was explained."),
        ("root_cause_identified", "The underlying cause, if the discussion found one."),
        ("resolution_outcome", "How the question was resolved or left."),
    ],
    LabelType.HELP_WANTED: [
        ("task_description", "The work the maintainers want contributed."),
        ("proposed_solution", "The suggested direction for the implementation."),
        ("technical_context", "Relevant code areas, APIs, and constraints."),
        ("dependencies_and_scope", "What the task depends on and what is out of bounds."),
        ("contributor_engagement", "Who volunteered and how maintainers responded."),
        ("current_status", "Where the task stands now."),
    ],
    LabelType.GOOD_FIRST_ISSUE: [
        ("task_description", "The work a newcomer is invited to take on."),
        ("beginner_friendly_rationale", "Why this task suits a first-time contributor."),
        ("technical_requirements", "Skills, tooling, and setup needed to start."),
        ("implementation_guidance", "Step-by-step hints maintainers gave for the change."),
        ("reference_examples", "Prior PRs, files, or docs pointed to as models."),
        ("mentor_interaction", "Mentoring exchanges between maintainers and the contributor."),
        ("progress_tracking", "Claimed assignments, drafts, and progress updates."),
    ],
    LabelType.DOCUMENTATION: [
        ("documentation_issue_type", "Whether docs are missing, wrong, outdated, or unclear."),
        ("affected_components", "Pages, sections, or APIs whose docs are affected."),
        ("proposed_changes", "The concrete edits or additions suggested."),
        ("maintainer_response", "How maintainers triaged and responded."),
        ("dependencies_and_blockers", "What must happen before the docs can change."),
        ("current_status", "Where the documentation work stands now."),
    ],
    LabelType.GENERAL: [
        ("issue_description", "What the issue is about, in the author's terms."),
        ("context_and_background", "Surrounding context, history, and references given."),
        ("discussion_points", "The main threads of discussion and disagreements."),
        ("proposed_actions", "Actions suggested by participants."),
        ("decision_consensus", "Decisions and agreements the thread reached."),
    ],
}

SCHEMAS: dict[LabelType, FieldSchema] = {
    label: FieldSchema(
        label=label,
        field_keys=tuple(key for key, _ in spec),
        field_descriptions={key: desc for key, desc in spec},
    )
    for label, spec in _SCHEMA_SPECS.items()
}


def schema_for(label: LabelType) -> FieldSchema:
    """Return the field schema for a label; total and deterministic."""
    return SCHEMAS[LabelType(label)]

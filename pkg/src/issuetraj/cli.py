"""Command-line interface: extract, judge, stats, and cache maintenance.

Exit codes: 0 all ok, 1 partial failures (report written), 2 configuration
error. Config precedence: CLI flags > environment variables > config file >
compiled defaults.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import re
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

from .artifacts.cache import LinkCache
from .artifacts.summarize import ResolverClients
from .config import ENV_KEYS, RunConfig, build_limits, load_config_file
from .errors import ConfigError, EmptyInput, JudgeFailure, PipelineError
from .gateway import LlmGateway
from .judge import (
    APPROVED_CATEGORIES,
    aggregate_verdicts,
    filter_approved,
    issue_type_stats,
    judge_trajectory,
    render_label_table,
    render_verdict_table,
    review_worksheet_csv,
    stats_to_dict,
    verdict_from_dict,
    verdict_to_dict,
)
from .labels import DEFAULT_TABLE, load_keyword_table
from .pipeline import EPOCH, IssueOutcome, RunReport, StageFailure, process_thread
from .synthesis import parse_trajectory, serialize_trajectory
from .thread_model import parse_thread

TRAJECTORY_FILE_RE = re.compile(r"^(\d+)_issue_trajectory\.json$")


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_path, path)
    finally:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)


def _expand_inputs(patterns: list[str]) -> list[str]:
    paths: list[str] = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        if matches:
            paths.extend(matches)
        elif os.path.exists(pattern):
            paths.append(pattern)
    seen = []
    for path in paths:
        if path not in seen:
            seen.append(path)
    return seen


def build_gateway(config: RunConfig) -> LlmGateway:
    return LlmGateway(
        mode=config.gateway_mode,
        routes=config.routes,
        record_path=config.exchange_path if config.gateway_mode == "record" else None,
        replay_path=config.exchange_path if config.gateway_mode == "replay" else None,
    )


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def cmd_extract(
    config: RunConfig,
    gateway: LlmGateway | None = None,
    clients: ResolverClients | None = None,
) -> RunReport:
    """Run the full pipeline over every input thread file.

    Each input produces ``{N}_issue_trajectory.json`` in the output
    directory; the link cache file is updated after the batch. Per-issue
    failures are isolated and recorded in the report.
    """
    config.validate()
    files = _expand_inputs(config.inputs)
    if not files:
        raise ConfigError(f"no input files matched: {config.inputs}")
    gateway = gateway or build_gateway(config)
    clients = clients or ResolverClients()
    cache = LinkCache.load(config.cache_path)
    table = load_keyword_table(config.keyword_table_path) if config.keyword_table_path else DEFAULT_TABLE
    now = (lambda: EPOCH) if config.stable_output else None

    report = RunReport()
    started = time.monotonic()

    def run_one(path: str) -> IssueOutcome:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
            thread = parse_thread(raw)
            repo_labels = _repo_labels_from_raw(raw)
        except PipelineError as exc:
            return IssueOutcome(path, None, "failed", stage="parse", reason=str(exc))
        try:
            kwargs = {"now": now} if now else {}
            result = process_thread(
                thread, repo_labels, cache, clients, gateway,
                limits=config.limits, keyword_table=table, **kwargs,
            )
            data, filename = serialize_trajectory(result.trajectory, thread.issue_number)
            _atomic_write(os.path.join(config.output_dir, filename), data)
        except StageFailure as exc:
            return IssueOutcome(path, thread.issue_number, "failed", stage=exc.stage, reason=str(exc.cause))
        except Exception as exc:  # noqa: BLE001 - isolation: one bad issue never aborts the batch
            return IssueOutcome(path, thread.issue_number, "failed", stage="write", reason=str(exc))
        report.cache_hits += result.cache_hits
        report.cache_misses += result.cache_misses
        report.diagnostics.extend(result.diagnostics)
        return IssueOutcome(path, thread.issue_number, "ok")

    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(run_one, files))
    else:
        outcomes = [run_one(path) for path in files]
    report.outcomes.extend(outcomes)

    cache.save(config.cache_path)
    report.gateway_calls = dict(gateway.calls_by_role)
    report.wall_time_s = 0.0 if config.stable_output else time.monotonic() - started
    _atomic_write(
        os.path.join(config.output_dir, "run_report.json"),
        (json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
    )
    return report


def _repo_labels_from_raw(raw: bytes) -> list[str]:
    # The thread model ignores unknown keys; the optional top-level "labels"
    # list feeds label detection without widening the model.
    try:
        doc = json.loads(raw.decode("utf-8", errors="replace"))
        labels = doc.get("labels") or []
        return [str(lb) for lb in labels] if isinstance(labels, list) else []
    except (json.JSONDecodeError, AttributeError):
        return []


# ---------------------------------------------------------------------------
# judge
# ---------------------------------------------------------------------------


def cmd_judge(config: RunConfig, gateway: LlmGateway | None = None) -> RunReport:
    """Judge every (thread, trajectory) pair found in the input directories.

    Writes one ``{N}_verdict.json`` per pair, plus ``approved.json`` and a
    CSV review worksheet. Unjudgeable trajectories are reported and excluded
    from the approved list; the rest proceed.
    """
    config.validate()
    pairs = _find_pairs(config.inputs)
    if not pairs:
        raise EmptyInput(f"no (thread, trajectory) pairs found under {config.inputs}")
    gateway = gateway or build_gateway(config)

    report = RunReport()
    started = time.monotonic()
    judged = []
    for issue_number, thread_path, trajectory_path in pairs:
        try:
            with open(thread_path, "rb") as fh:
                thread = parse_thread(fh.read())
            with open(trajectory_path, "rb") as fh:
                trajectory = parse_trajectory(fh.read())
            verdict = judge_trajectory(trajectory, thread, gateway)
        except (PipelineError, JudgeFailure) as exc:
            report.outcomes.append(
                IssueOutcome(trajectory_path, issue_number, "failed", stage="judge", reason=str(exc))
            )
            continue
        _atomic_write(
            os.path.join(config.output_dir, f"{issue_number}_verdict.json"),
            (json.dumps(verdict_to_dict(verdict), indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
        )
        judged.append((trajectory, verdict))
        report.outcomes.append(IssueOutcome(trajectory_path, issue_number, "ok"))

    approved = filter_approved(judged)
    approved_ids = [v.issue_id for _, v in judged if v.category in APPROVED_CATEGORIES]
    assert len(approved) == len(approved_ids)
    _atomic_write(
        os.path.join(config.output_dir, "approved.json"),
        (json.dumps({"approved_issue_ids": approved_ids}, indent=2) + "\n").encode("utf-8"),
    )
    _atomic_write(
        os.path.join(config.output_dir, "review_worksheet.csv"),
        review_worksheet_csv([v for _, v in judged]).encode("utf-8"),
    )
    report.gateway_calls = dict(gateway.calls_by_role)
    report.wall_time_s = 0.0 if config.stable_output else time.monotonic() - started
    _atomic_write(
        os.path.join(config.output_dir, "run_report.json"),
        (json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
    )
    return report


def _find_pairs(inputs: list[str]) -> list[tuple[int, str, str]]:
    """Locate (issue_number, thread_file, trajectory_file) pairs.

    One directory: both file kinds live together. Two directories: threads
    in the first, trajectories in the second.
    """
    dirs = [path for path in inputs if os.path.isdir(path)]
    if not dirs:
        return []
    thread_dir = dirs[0]
    trajectory_dir = dirs[1] if len(dirs) > 1 else dirs[0]
    pairs = []
    for name in sorted(os.listdir(trajectory_dir)):
        match = TRAJECTORY_FILE_RE.match(name)
        if not match:
            continue
        number = int(match.group(1))
        thread_matches = sorted(
            glob.glob(os.path.join(glob.escape(thread_dir), f"issue#{number}_comments_pr#*.json"))
        )
        if not thread_matches:
            continue
        pairs.append((number, thread_matches[0], os.path.join(trajectory_dir, name)))
    return pairs


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def cmd_stats(config: RunConfig) -> dict:
    """Aggregate verdict directories into distribution reports.

    Each input is a split: ``name=dir`` or a bare directory (basename is the
    split name). Emits JSON and aligned-text tables; with several splits an
    ``All`` column aggregates across them.
    """
    splits = []
    for spec in config.inputs:
        name, _, directory = spec.rpartition("=")
        directory = directory or spec
        split_name = name or os.path.basename(os.path.normpath(directory))
        verdicts = []
        trajectories = []
        if not os.path.isdir(directory):
            raise ConfigError(f"not a directory: {directory}")
        for filename in sorted(os.listdir(directory)):
            path = os.path.join(directory, filename)
            if filename.endswith("_verdict.json"):
                with open(path, encoding="utf-8") as fh:
                    verdicts.append(verdict_from_dict(json.load(fh)))
            elif TRAJECTORY_FILE_RE.match(filename):
                with open(path, "rb") as fh:
                    trajectories.append((filename, parse_trajectory(fh.read())))
        splits.append((split_name, verdicts, trajectories))

    if not any(verdicts for _, verdicts, _ in splits):
        raise EmptyInput("no verdict files found in any split")

    verdict_stats = []
    label_stats = []
    for split_name, verdicts, trajectories in splits:
        if not verdicts:
            continue
        stats = aggregate_verdicts(verdicts, split_name)
        verdict_stats.append(stats)
        approved = _approved_trajectories(verdicts, trajectories)
        if approved:
            label_stats.append(issue_type_stats(approved, split_name))
    if len(splits) > 1:
        all_verdicts = [v for _, vs, _ in splits for v in vs]
        verdict_stats.append(aggregate_verdicts(all_verdicts, "All"))
        all_approved = [
            t
            for _, verdicts, trajectories in splits
            for t in _approved_trajectories(verdicts, trajectories)
        ]
        if all_approved:
            label_stats.append(issue_type_stats(all_approved, "All"))

    verdict_table = render_verdict_table(verdict_stats)
    label_table = render_label_table(label_stats) if label_stats else ""
    payload = {
        "verdicts": [stats_to_dict(s) for s in verdict_stats],
        "issue_types": [stats_to_dict(s) for s in label_stats],
    }
    os.makedirs(config.output_dir, exist_ok=True)
    _atomic_write(
        os.path.join(config.output_dir, "stats_report.json"),
        (json.dumps(payload, indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
    )
    _atomic_write(os.path.join(config.output_dir, "verdict_table.txt"), verdict_table.encode("utf-8"))
    if label_table:
        _atomic_write(os.path.join(config.output_dir, "label_table.txt"), label_table.encode("utf-8"))
    print(verdict_table)
    if label_table:
        print(label_table)
    return payload


def _approved_trajectories(verdicts, named_trajectories):
    approved_ids = {
        v.issue_id for v in verdicts if v.category.value in ("Excellent", "Good", "Acceptable")
    }
    approved = []
    for filename, trajectory in named_trajectories:
        number = TRAJECTORY_FILE_RE.match(filename).group(1)
        if number in approved_ids:
            approved.append(trajectory)
    return approved


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------


def cmd_cache(config: RunConfig, subcommand: str) -> str:
    """Cache inspection and maintenance; returns the printed text."""
    if subcommand == "stats":
        cache = LinkCache.load(config.cache_path)
        stats = cache.stats()
        text = (
            f"cache file: {config.cache_path}\n"
            f"entries: {stats['total']}  ok: {stats['ok']}  "
            f"failed: {stats['failed']}  skipped: {stats['skipped']}\n"
        )
    elif subcommand == "purge-failed":
        cache = LinkCache.load(config.cache_path)
        removed = cache.purge_failed()
        cache.save(config.cache_path)
        text = f"purged {removed} failed entries; {len(cache)} entries kept\n"
    else:
        raise ConfigError(f"unknown cache subcommand {subcommand!r}")
    print(text, end="")
    return text


# ---------------------------------------------------------------------------
# argument parsing and config assembly
# ---------------------------------------------------------------------------


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--output-dir", help="directory for outputs")
    parser.add_argument("--cache", dest="cache_path", help="link cache file path")
    parser.add_argument(
        "--gateway-mode", choices=("live", "record", "replay", "stub"), help="LLM gateway mode"
    )
    parser.add_argument("--exchange-file", dest="exchange_path", help="record/replay exchange file")
    parser.add_argument("--parallelism", type=int, help="max issues processed concurrently")
    parser.add_argument(
        "--stable-output", action="store_true", default=None,
        help="zero all timestamps in outputs for diff-based testing",
    )
    parser.add_argument("--keyword-table", dest="keyword_table_path", help="keyword table JSON override")
    parser.add_argument("--context-lines", type=int, help="window around blob line anchors")
    parser.add_argument("--max-artifact-chars", type=int)
    parser.add_argument("--max-summary-chars", type=int)
    parser.add_argument("--max-image-bytes", type=int)
    parser.add_argument("--reddit-top-comments", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="issuetraj",
        description="Convert GitHub issue threads into label-guided reasoning trajectories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="run the full pipeline over thread files")
    p_extract.add_argument("inputs", nargs="+", help="thread JSON files or globs")
    _add_common_flags(p_extract)

    p_judge = sub.add_parser("judge", help="judge (thread, trajectory) pairs")
    p_judge.add_argument(
        "inputs", nargs="+",
        help="directory holding both file kinds, or thread dir + trajectory dir",
    )
    _add_common_flags(p_judge)

    p_stats = sub.add_parser("stats", help="aggregate verdicts into report tables")
    p_stats.add_argument("inputs", nargs="+", help="split directories (name=dir or dir)")
    _add_common_flags(p_stats)

    p_cache = sub.add_parser("cache", help="cache inspection and maintenance")
    p_cache.add_argument("subcommand", choices=("stats", "purge-failed"))
    _add_common_flags(p_cache)
    return parser


_LIMIT_FLAGS = (
    "context_lines",
    "max_artifact_chars",
    "max_summary_chars",
    "max_image_bytes",
    "reddit_top_comments",
)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Assemble a RunConfig honoring flag > env > file > default precedence."""
    file_cfg = load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name: str, file_key: str, default):
        value = getattr(args, flag_name, None)
        if value is not None:
            return value
        env_key = ENV_KEYS.get(file_key)
        if env_key and os.environ.get(env_key):
            return os.environ[env_key]
        if file_key in file_cfg:
            return file_cfg[file_key]
        return default

    limit_overrides = dict(file_cfg.get("limits") or {})
    for name in _LIMIT_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            limit_overrides[name] = value

    config = RunConfig(
        inputs=list(getattr(args, "inputs", []) or []),
        output_dir=str(pick("output_dir", "output_dir", "out")),
        cache_path=str(pick("cache_path", "cache_path", "link_cache.json")),
        gateway_mode=str(pick("gateway_mode", "gateway_mode", "stub")),
        exchange_path=pick("exchange_path", "exchange_path", None),
        parallelism=int(pick("parallelism", "parallelism", 1)),
        stable_output=bool(pick("stable_output", "stable_output", False)),
        keyword_table_path=pick("keyword_table_path", "keyword_table_path", None),
        routes=dict(file_cfg.get("routes") or {}),
        limits=build_limits(limit_overrides),
    )
    return config


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = build_run_config(args)
        if args.command == "extract":
            report = cmd_extract(config)
        elif args.command == "judge":
            report = cmd_judge(config)
        elif args.command == "stats":
            cmd_stats(config)
            return 0
        elif args.command == "cache":
            cmd_cache(config, args.subcommand)
            return 0
        else:  # pragma: no cover - argparse enforces choices
            return 2
    except (ConfigError, EmptyInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for outcome in report.outcomes:
        status = outcome.status.upper()
        suffix = f" [{outcome.stage}: {outcome.reason}]" if outcome.status == "failed" else ""
        print(f"{status:6} {outcome.input_path}{suffix}")
    print(
        f"done: {report.ok_count} ok, {report.failed_count} failed, "
        f"{report.wall_time_s:.1f}s"
    )
    return 0 if report.all_ok() else 1


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration: limit constants, gateway settings, batch options.

Precedence when assembling a RunConfig in the CLI: command-line flags beat
environment variables beat the JSON config file beat these compiled-in
defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError

BROWSER_USER_AGENT = (
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
    "(KHTML, like Gecko) Chrome/120.0.0.0 Safari/537.36"
)


@dataclass(frozen=True)
class Limits:
    """Tunable bounds for artifact retrieval and summarization."""

    context_lines: int = 20  # window around blob line anchors
    max_artifact_chars: int = 50_000  # cap before summarization
    max_summary_chars: int = 2_000
    max_image_bytes: int = 10 * 1024 * 1024
    reddit_top_comments: int = 10
    http_timeout: float = 30.0
    user_agent: str = BROWSER_USER_AGENT


DEFAULT_LIMITS = Limits()

# environment variable overrides understood by the CLI
ENV_PREFIX = "ISSUETRAJ_"
ENV_KEYS = {
    "gateway_mode": ENV_PREFIX + "GATEWAY_MODE",
    "parallelism": ENV_PREFIX + "PARALLELISM",
    "cache_path": ENV_PREFIX + "CACHE_PATH",
    "output_dir": ENV_PREFIX + "OUTPUT_DIR",
}


@dataclass
class RunConfig:
    """Everything a batch command needs to run."""

    inputs: list[str] = field(default_factory=list)  # paths or globs
    output_dir: str = "out"
    cache_path: str = "link_cache.json"
    gateway_mode: str = "stub"  # live | record | replay | stub
    exchange_path: str | None = None  # record/replay exchange file
    parallelism: int = 1
    stable_output: bool = False
    keyword_table_path: str | None = None
    routes: dict = field(default_factory=dict)  # per-role model route overrides
    limits: Limits = DEFAULT_LIMITS

    def validate(self) -> None:
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.gateway_mode not in ("live", "record", "replay", "stub"):
            raise ConfigError(f"unknown gateway mode {self.gateway_mode!r}")
        if self.gateway_mode in ("record", "replay") and not self.exchange_path:
            raise ConfigError(f"{self.gateway_mode} mode requires an exchange file path")
        if self.gateway_mode == "replay" and not os.path.exists(self.exchange_path):
            raise ConfigError(f"replay exchange file not found: {self.exchange_path}")


def load_config_file(path: str) -> dict:
    """Read the JSON config file; top-level keys mirror RunConfig/Limits fields."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def build_limits(overrides: dict) -> Limits:
    known = {f.name for f in fields(Limits)}
    bad = set(overrides) - known
    if bad:
        raise ConfigError(f"unknown limit keys: {', '.join(sorted(bad))}")
    return Limits(**{**{f.name: getattr(DEFAULT_LIMITS, f.name) for f in fields(Limits)}, **overrides})

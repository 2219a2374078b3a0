"""Normalized-URL → summary cache with single-flight semantics.

Within a run the cache is append-only: an entry, once written, never
changes, so every reference to the same normalized URL resolves to the same
context representation. Failed fetches are cached too (negative caching) so
dead hosts are hit at most once per run. The on-disk form is one JSON
document mapping normalized URLs to entries, flushed atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterator

from ..thread_model import format_timestamp, parse_timestamp
from .model import FetchStatus


@dataclass(frozen=True)
class CacheEntry:
    summary: str
    fetch_status: FetchStatus
    fetched_at: datetime


class LinkCache:
    """Thread-safe URL cache guaranteeing at most one fetch per URL.

    ``get_or_create`` holds a per-URL lock while the factory runs, so
    concurrent resolvers for the same normalized URL collapse into a single
    in-flight fetch; other URLs proceed in parallel.
    """

    def __init__(self, entries: dict[str, CacheEntry] | None = None):
        self._entries: dict[str, CacheEntry] = dict(entries or {})
        self._lock = threading.Lock()
        self._url_locks: dict[str, threading.Lock] = {}

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __contains__(self, url: str) -> bool:
        with self._lock:
            return url in self._entries

    def get(self, url: str) -> CacheEntry | None:
        with self._lock:
            return self._entries.get(url)

    def put(self, url: str, entry: CacheEntry) -> CacheEntry:
        """Insert an entry unless one exists; returns the entry that is kept."""
        with self._lock:
            return self._entries.setdefault(url, entry)

    def get_or_create(self, url: str, factory: Callable[[], CacheEntry]) -> CacheEntry:
        """Return the cached entry, or run factory once (single-flight) and cache it."""
        with self._lock:
            existing = self._entries.get(url)
            if existing is not None:
                return existing
            url_lock = self._url_locks.setdefault(url, threading.Lock())
        with url_lock:
            with self._lock:
                existing = self._entries.get(url)
                if existing is not None:
                    return existing
            entry = factory()
            with self._lock:
                return self._entries.setdefault(url, entry)

    def items(self) -> Iterator[tuple[str, CacheEntry]]:
        with self._lock:
            snapshot = list(self._entries.items())
        return iter(snapshot)

    def stats(self) -> dict[str, int]:
        """Entry counts, total and per fetch status."""
        counts = {"total": 0, "ok": 0, "failed": 0, "skipped": 0}
        for _, entry in self.items():
            counts["total"] += 1
            counts[entry.fetch_status.value] += 1
        return counts

    def purge_failed(self) -> int:
        """Drop failed entries (maintenance between runs); returns count removed."""
        with self._lock:
            failed = [u for u, e in self._entries.items() if e.fetch_status is FetchStatus.FAILED]
            for url in failed:
                del self._entries[url]
            return len(failed)

    # -- persistence -----------------------------------------------------

    @classmethod
    def load(cls, path: str) -> "LinkCache":
        """Load a cache file; a missing file yields an empty cache."""
        if not os.path.exists(path):
            return cls()
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        entries = {
            url: CacheEntry(
                summary=rec.get("summary", ""),
                fetch_status=FetchStatus(rec["fetch_status"]),
                fetched_at=parse_timestamp(rec["fetched_at"]),
            )
            for url, rec in doc.items()
        }
        return cls(entries)

    def save(self, path: str) -> None:
        """Write the cache as one JSON document, atomically (temp + rename)."""
        doc = {
            url: {
                "summary": entry.summary,
                "fetch_status": entry.fetch_status.value,
                "fetched_at": format_timestamp(entry.fetched_at),
            }
            for url, entry in sorted(self.items())
        }
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, ensure_ascii=False)
                fh.write("\n")
            os.replace(tmp_path, path)
        finally:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)

"""Tests for the link cache and the resolve-or-reuse flow."""

from __future__ import annotations

import json
import threading
import time
from datetime import datetime, timezone

import pytest

from issuetraj.artifacts.cache import CacheEntry, LinkCache, utc_now
from issuetraj.artifacts.model import FetchStatus
from issuetraj.artifacts.summarize import ResolverClients, get_or_summarize, summarize_artifact
from issuetraj.artifacts.urls import build_ref
from issuetraj.gateway import LlmGateway, Role
from issuetraj.github_api import GitHubClient

from conftest import FakeResponse, FakeSession


def entry(status=FetchStatus.OK, summary="s") -> CacheEntry:
    return CacheEntry(summary, status, datetime(2024, 1, 1, tzinfo=timezone.utc))


def commit_clients() -> tuple[ResolverClients, FakeSession]:
    session = FakeSession(
        {"/commits/": FakeResponse({"commit": {"message": "fix pager"}, "files": []})}
    )
    clients = ResolverClients(github=GitHubClient(token="t", session=session), http=session)
    return clients, session


class TestLinkCache:
    def test_put_is_append_only(self):
        cache = LinkCache()
        first = entry(summary="first")
        kept = cache.put("https://a", first)
        assert kept is first
        kept_again = cache.put("https://a", entry(summary="second"))
        assert kept_again.summary == "first"

    def test_stats_counts_by_status(self):
        cache = LinkCache()
        cache.put("a", entry(FetchStatus.OK))
        cache.put("b", entry(FetchStatus.FAILED, summary=""))
        cache.put("c", entry(FetchStatus.SKIPPED, summary=""))
        assert cache.stats() == {"total": 3, "ok": 1, "failed": 1, "skipped": 1}

    def test_purge_failed_keeps_ok(self):
        cache = LinkCache()
        cache.put("a", entry(FetchStatus.OK))
        cache.put("b", entry(FetchStatus.FAILED, summary=""))
        assert cache.purge_failed() == 1
        assert "a" in cache and "b" not in cache

    def test_save_load_round_trip(self, tmp_path):
        cache = LinkCache()
        cache.put("https://a", entry(summary="alpha"))
        cache.put("https://b", entry(FetchStatus.FAILED, summary=""))
        path = str(tmp_path / "cache.json")
        cache.save(path)
        loaded = LinkCache.load(path)
        assert loaded.get("https://a").summary == "alpha"
        assert loaded.get("https://b").fetch_status is FetchStatus.FAILED

    def test_load_missing_file_is_empty(self, tmp_path):
        cache = LinkCache.load(str(tmp_path / "nope.json"))
        assert len(cache) == 0

    def test_save_is_single_json_document(self, tmp_path):
        cache = LinkCache()
        cache.put("https://a", entry())
        path = str(tmp_path / "cache.json")
        cache.save(path)
        doc = json.loads((tmp_path / "cache.json").read_text())
        assert set(doc["https://a"]) == {"summary", "fetch_status", "fetched_at"}

    def test_single_flight_under_contention(self):
        cache = LinkCache()
        calls = []
        barrier = threading.Barrier(8)

        def factory():
            calls.append(1)
            time.sleep(0.02)
            return entry()

        def worker():
            barrier.wait()
            cache.get_or_create("https://hot", factory)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(calls) == 1  # one in-flight fetch per URL

    def test_distinct_urls_do_not_serialize(self):
        cache = LinkCache()
        order = []

        def slow_factory(name):
            def factory():
                order.append(name)
                time.sleep(0.05)
                return entry()
            return factory

        a = threading.Thread(target=lambda: cache.get_or_create("https://a", slow_factory("a")))
        b = threading.Thread(target=lambda: cache.get_or_create("https://b", slow_factory("b")))
        started = time.monotonic()
        a.start(); b.start(); a.join(); b.join()
        elapsed = time.monotonic() - started
        assert sorted(order) == ["a", "b"]
        assert elapsed < 0.09  # both factories overlapped


class TestSummarizeArtifact:
    def _content(self, gateway, clients=None):
        from issuetraj.artifacts.handlers import resolve_github_artifact

        clients, _ = commit_clients()
        ref = build_ref("https://github.com/o/r/commit/abc")
        return resolve_github_artifact(ref, clients.github)

    def test_scripted_summary(self, stub_gateway):
        stub_gateway.script(Role.LINK_SUMMARIZER, "fixes off-by-one in pager")
        content = self._content(stub_gateway)
        assert summarize_artifact(content, "issue ctx", stub_gateway) == "fixes off-by-one in pager"

    def test_failed_content_is_a_contract_violation(self, stub_gateway):
        from issuetraj.artifacts.model import ArtifactContent

        ref = build_ref("https://github.com/o/r/commit/abc")
        failed = ArtifactContent(
            ref=ref, text="", fetch_status=FetchStatus.FAILED, failure_reason="x"
        )
        with pytest.raises(ValueError):
            summarize_artifact(failed, "ctx", stub_gateway)

    def test_long_summary_truncated_with_marker(self, stub_gateway):
        from issuetraj.config import Limits

        stub_gateway.script(Role.LINK_SUMMARIZER, "x" * 100_000)
        content = self._content(stub_gateway)
        summary = summarize_artifact(content, "ctx", stub_gateway, Limits(max_summary_chars=2000))
        assert len(summary) == 2000
        assert summary.endswith("[…truncated]")


class TestGetOrSummarize:
    def test_repeated_url_one_fetch_one_summary(self, stub_gateway):
        stub_gateway.script(Role.LINK_SUMMARIZER, "the commit summary")
        clients, session = commit_clients()
        cache = LinkCache()
        # same commit URL referenced from comments 3 and 9
        ref_a = build_ref("https://github.com/o/r/commit/abc", source_comment_id="c3")
        ref_b = build_ref("HTTPS://GITHUB.com/o/r/commit/abc", source_comment_id="c9")
        entry_a = get_or_summarize(cache, ref_a, clients, stub_gateway)
        entry_b = get_or_summarize(cache, ref_b, clients, stub_gateway)
        assert entry_a.summary == entry_b.summary == "the commit summary"
        assert session.fetch_count == 1
        assert stub_gateway.calls_by_role.total() == 1

    def test_archive_skipped_zero_gateway_calls(self, stub_gateway):
        class MustNotFetch:
            def get(self, *a, **k):
                raise AssertionError("no download for archives")

        clients = ResolverClients(
            github=GitHubClient(token="t", session=MustNotFetch()), http=MustNotFetch()
        )
        cache = LinkCache()
        ref = build_ref("https://example.com/x.zip")
        result = get_or_summarize(cache, ref, clients, stub_gateway)
        assert result.fetch_status is FetchStatus.SKIPPED
        assert stub_gateway.calls_by_role.total() == 0

    def test_preseeded_entry_short_circuits(self, stub_gateway):
        clients, session = commit_clients()
        cache = LinkCache()
        seeded = entry(summary="already here")
        cache.put("https://github.com/o/r/commit/abc", seeded)
        ref = build_ref("https://github.com/o/r/commit/abc")
        result = get_or_summarize(cache, ref, clients, stub_gateway)
        assert result is seeded
        assert session.fetch_count == 0
        assert stub_gateway.calls_by_role.total() == 0

    def test_fetch_failure_recorded_as_failed_entry(self, stub_gateway):
        session = FakeSession({"/commits/": FakeResponse({}, status_code=404)})
        clients = ResolverClients(github=GitHubClient(token="t", session=session), http=session)
        cache = LinkCache()
        ref = build_ref("https://github.com/o/r/commit/abc")
        result = get_or_summarize(cache, ref, clients, stub_gateway)
        assert result.fetch_status is FetchStatus.FAILED
        assert "https://github.com/o/r/commit/abc" in cache  # negative caching
        # second attempt hits the cache, no second fetch
        get_or_summarize(cache, ref, clients, stub_gateway)
        assert session.fetch_count == 1

    def test_summary_failure_recorded_as_failed_entry(self):
        from issuetraj.errors import GatewayFailure

        gateway = LlmGateway(mode="stub")
        gateway.script(Role.LINK_SUMMARIZER, GatewayFailure("summarizer down"))
        clients, session = commit_clients()
        cache = LinkCache()
        ref = build_ref("https://github.com/o/r/commit/abc")
        result = get_or_summarize(cache, ref, clients, gateway)
        assert result.fetch_status is FetchStatus.FAILED

    def test_stable_clock_injectable(self, stub_gateway):
        stub_gateway.script(Role.LINK_SUMMARIZER, "s")
        clients, _ = commit_clients()
        cache = LinkCache()
        fixed = datetime(1970, 1, 1, tzinfo=timezone.utc)
        ref = build_ref("https://github.com/o/r/commit/abc")
        result = get_or_summarize(cache, ref, clients, stub_gateway, now=lambda: fixed)
        assert result.fetched_at == fixed

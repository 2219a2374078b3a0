"""Minimal GitHub REST client with pagination and rate-limit mapping.

All HTTP goes through an injectable ``requests.Session``-compatible object so
tests can run against recorded fixtures without touching the network.
"""

from __future__ import annotations

import os
import time
from typing import Any, Iterator

import requests

from .errors import NetworkFailure, NotFound, RateLimited

API_BASE = "https://api.github.com"
DEFAULT_USER_AGENT = "issuetraj/0.1"


class GitHubClient:
    """GitHub REST API wrapper.

    Token is read from the ``GITHUB_TOKEN`` environment variable unless given
    explicitly. Errors are mapped to the package exception types; callers
    decide whether a failure is fatal.
    """

    def __init__(
        self,
        token: str | None = None,
        session: Any = None,
        base_url: str = API_BASE,
        user_agent: str = DEFAULT_USER_AGENT,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._token = token if token is not None else os.environ.get("GITHUB_TOKEN")
        self._session = session if session is not None else requests.Session()
        self._headers = {
            "Accept": "application/vnd.github+json",
            "User-Agent": user_agent,
        }
        if self._token:
            self._headers["Authorization"] = f"Bearer {self._token}"

    def _url(self, path: str) -> str:
        if path.startswith("http://") or path.startswith("https://"):
            return path
        return self.base_url + path

    def get(self, path: str, params: dict | None = None) -> Any:
        """GET a path (or absolute URL) and return the response object."""
        try:
            resp = self._session.get(
                self._url(path), headers=self._headers, params=params, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise NetworkFailure(f"GET {path}: {exc}") from exc
        if resp.status_code == 404:
            raise NotFound(f"GET {path}: 404")
        if resp.status_code in (403, 429) and _is_rate_limited(resp):
            raise RateLimited(f"GET {path}: rate limited", retry_after=_retry_after(resp))
        if resp.status_code >= 400:
            raise NetworkFailure(f"GET {path}: HTTP {resp.status_code}")
        return resp

    def get_json(self, path: str, params: dict | None = None) -> Any:
        """GET a path and decode the JSON body."""
        return self.get(path, params=params).json()

    def paginate(
        self, path: str, params: dict | None = None, per_page: int = 100
    ) -> Iterator[dict]:
        """Yield items across all pages of a list endpoint."""
        page = 1
        while True:
            merged = dict(params or {})
            merged.update({"per_page": per_page, "page": page})
            items = self.get_json(path, params=merged)
            if not isinstance(items, list) or not items:
                return
            yield from items
            if len(items) < per_page:
                return
            page += 1


def _is_rate_limited(resp: Any) -> bool:
    headers = getattr(resp, "headers", {}) or {}
    if headers.get("X-RateLimit-Remaining") == "0":
        return True
    if "Retry-After" in headers:
        return True
    return resp.status_code == 429


def _retry_after(resp: Any) -> float:
    headers = getattr(resp, "headers", {}) or {}
    if "Retry-After" in headers:
        try:
            return float(headers["Retry-After"])
        except ValueError:
            return 0.0
    reset = headers.get("X-RateLimit-Reset")
    if reset:
        try:
            return max(0.0, float(reset) - time.time())
        except ValueError:
            return 0.0
    return 0.0

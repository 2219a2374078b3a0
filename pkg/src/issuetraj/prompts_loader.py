"""Loader for the prompt templates shipped with the package.

Templates live in ``issuetraj/prompts/*.txt``. Lines starting with ``#`` at
the top of a file are header metadata (template version) and are stripped
before use. Placeholders use ``string.Template`` syntax (``$name``); the
placeholder names per template are documented in the README.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template


@lru_cache(maxsize=None)
def template_text(name: str) -> str:
    raw = resources.files("issuetraj.prompts").joinpath(f"{name}.txt").read_text("utf-8")
    lines = raw.splitlines()
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    return "\n".join(lines).strip() + "\n"


def render(name: str, **values: str) -> str:
    """Render a named template with its placeholder values."""
    return Template(template_text(name)).substitute(**values)

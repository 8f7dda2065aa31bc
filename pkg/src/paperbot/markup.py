"""The message markup dialect.

Bot message bodies are plain text plus three token forms:

* bold spans delimited by single asterisks: ``*key phrase*``
* member mentions: ``<@member_id>``
* links with display text: ``<https://example|Display Title>``
"""
from __future__ import annotations

import re
from typing import Mapping

__all__ = [
    "MENTION_RE",
    "LINK_RE",
    "BOLD_RE",
    "mention_token",
    "link_token",
    "mentioned_ids",
    "bold_spans",
    "link_tokens",
    "plain_text",
]

MENTION_RE = re.compile(r"<@([A-Za-z0-9_.\-]+)>")
LINK_RE = re.compile(r"<([a-z][a-z0-9+.\-]*://[^|>\s]+)\|([^>]+)>")
BOLD_RE = re.compile(r"\*([^*\n]+)\*")


def mention_token(member_id: str) -> str:
    return f"<@{member_id}>"


def link_token(url: str, title: str) -> str:
    return f"<{url}|{title}>"


def mentioned_ids(text: str) -> list[str]:
    return MENTION_RE.findall(text)


def link_tokens(text: str) -> list[tuple[str, str]]:
    return [(m.group(1), m.group(2)) for m in LINK_RE.finditer(text)]


def bold_spans(text: str) -> list[str]:
    # Resolve link tokens first so a title containing '*' can't masquerade as bold.
    resolved = LINK_RE.sub(lambda m: m.group(2), text)
    return BOLD_RE.findall(resolved)


def plain_text(body: str, display_names: Mapping[str, str] | None = None) -> str:
    """Project markup back to reader-visible text.

    Mentions become ``@DisplayName`` and links become their display title, so
    for a freshly assembled body this is the inverse of tokenization. Bold
    markers are kept: they were part of the generated text.
    """
    names = display_names or {}

    def replace_mention(match: re.Match[str]) -> str:
        member_id = match.group(1)
        return "@" + names.get(member_id, member_id)

    text = MENTION_RE.sub(replace_mention, body)
    return LINK_RE.sub(lambda m: m.group(2), text)

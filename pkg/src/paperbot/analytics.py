"""Engagement accounting over raw event logs.

This module deliberately recounts everything from the ordered events rather
than reusing the knowledge-base index, so the numbers double as an
independent cross-check of ingestion.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable

from .errors import InvalidInputError
from .events import EventKind, SocialEvent
from .knowledge import DEFAULT_BOT_ACTOR
from .refs import extract_item_refs

__all__ = [
    "DayCounts",
    "CumulativeSeries",
    "CSV_HEADER",
    "engagement_report",
    "export_report",
    "write_report",
]

CSV_HEADER = "day,human_recs,bot_recs,emoji_reactions,comments"


@dataclass(frozen=True)
class DayCounts:
    """Cumulative totals as of the end of one study day."""

    day: int
    human_recs: int
    bot_recs: int
    emoji_reactions: int
    comments: int

    def csv_row(self) -> str:
        return f"{self.day},{self.human_recs},{self.bot_recs},{self.emoji_reactions},{self.comments}"

    def json_row(self) -> str:
        return json.dumps(
            {
                "day": self.day,
                "human_recs": self.human_recs,
                "bot_recs": self.bot_recs,
                "emoji_reactions": self.emoji_reactions,
                "comments": self.comments,
            },
            separators=(", ", ": "),
        )


@dataclass(frozen=True)
class CumulativeSeries:
    """Per-UTC-day cumulative engagement, day 0 anchored at the first bot post."""

    anchor: datetime | None
    rows: tuple[DayCounts, ...]

    @property
    def totals(self) -> DayCounts | None:
        return self.rows[-1] if self.rows else None

    def to_csv(self) -> str:
        lines = [CSV_HEADER] + [row.csv_row() for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json_lines(self) -> str:
        return "".join(row.json_row() + "\n" for row in self.rows)


def _day_floor(ts: datetime) -> datetime:
    return datetime(ts.year, ts.month, ts.day, tzinfo=timezone.utc)


def _bears_paper(event: SocialEvent) -> bool:
    if event.kind is EventKind.BOT_POST:
        return bool(event.payload.get("paper_ref"))
    if event.kind in (EventKind.MESSAGE, EventKind.REPLY):
        return bool(extract_item_refs(str(event.payload.get("text", ""))))
    return False


def engagement_report(
    events: Iterable[SocialEvent], bot_actor: str = DEFAULT_BOT_ACTOR
) -> CumulativeSeries:
    """Build the cumulative series from raw events (all channels pooled).

    Counted quantities:

    * ``human_recs``  -- non-bot messages containing at least one paper link;
    * ``bot_recs``    -- bot posts carrying a recommended paper;
    * ``emoji_reactions`` / ``comments`` -- reactions and replies whose target
      is one of those paper-bearing posts.

    Day 0 is the UTC calendar day of the first bot recommendation (first
    event, if the bot never posted); earlier activity folds into day 0.
    Days are contiguous, with totals carried forward over quiet days.
    """
    ordered = sorted(events, key=lambda e: (e.ts, e.channel, e.seq))
    if not ordered:
        return CumulativeSeries(anchor=None, rows=())

    paper_posts: set[tuple[str, int]] = set()
    for event in ordered:
        if _bears_paper(event):
            paper_posts.add((event.channel, event.seq))

    anchor_event = next(
        (e for e in ordered if e.kind is EventKind.BOT_POST and e.payload.get("paper_ref")),
        ordered[0],
    )
    anchor = _day_floor(anchor_event.ts.astimezone(timezone.utc))

    last_day = max(
        (e.ts.astimezone(timezone.utc) - anchor) // timedelta(days=1) for e in ordered
    )
    last_day = max(last_day, 0)

    increments: dict[int, list[int]] = {}

    def bump(ts: datetime, slot: int) -> None:
        day = (ts.astimezone(timezone.utc) - anchor) // timedelta(days=1)
        day = max(day, 0)
        increments.setdefault(day, [0, 0, 0, 0])[slot] += 1

    for event in ordered:
        if event.kind is EventKind.MESSAGE and event.actor != bot_actor:
            if (event.channel, event.seq) in paper_posts:
                bump(event.ts, 0)
        elif event.kind is EventKind.BOT_POST and event.payload.get("paper_ref"):
            bump(event.ts, 1)
        elif event.kind is EventKind.REACTION:
            target = (event.channel, int(event.payload["target_seq"]))
            if target in paper_posts:
                bump(event.ts, 2)
        elif event.kind is EventKind.REPLY:
            parent = (event.channel, int(event.payload["parent_seq"]))
            if parent in paper_posts:
                bump(event.ts, 3)

    rows: list[DayCounts] = []
    running = [0, 0, 0, 0]
    for day in range(0, last_day + 1):
        for slot, value in enumerate(increments.get(day, [0, 0, 0, 0])):
            running[slot] += value
        rows.append(DayCounts(day, *running))
    return CumulativeSeries(anchor=anchor, rows=tuple(rows))


def export_report(series: CumulativeSeries, fmt: str = "csv") -> str:
    if fmt == "csv":
        return series.to_csv()
    if fmt in ("json", "json-lines", "jsonl"):
        return series.to_json_lines()
    raise InvalidInputError(f"unknown report format: {fmt}")


def write_report(series: CumulativeSeries, path: str | Path, fmt: str = "csv") -> None:
    Path(path).write_text(export_report(series, fmt), encoding="utf-8", newline="")

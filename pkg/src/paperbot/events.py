"""The channel event log: the single source of truth for all social state.

Every observable act in a channel -- a member message, an emoji reaction, a
threaded reply, a bot post, a configuration change -- is one immutable
:class:`SocialEvent`. Events are persisted as one canonical JSON object per
line with exactly the keys ``seq, ts, channel, kind, actor, payload``; replaying
a log file reconstructs derived state bit-exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import InvalidInputError

__all__ = [
    "EventKind",
    "SocialEvent",
    "Member",
    "utc_now",
    "parse_ts",
    "format_ts",
    "canonical_json",
    "dump_event_line",
    "load_event_line",
    "read_event_log",
    "write_event_log",
    "append_event",
    "message_payload",
    "reaction_payload",
    "reply_payload",
]

_EVENT_KEYS = ("seq", "ts", "channel", "kind", "actor", "payload")


class EventKind(str, Enum):
    MESSAGE = "message"
    REACTION = "reaction"
    REPLY = "reply"
    BOT_POST = "bot_post"
    CONFIG = "config"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def parse_ts(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_ts(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise InvalidInputError("timestamps must be timezone-aware")
    return ts.astimezone(timezone.utc).isoformat()


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class SocialEvent:
    seq: int
    ts: datetime
    channel: str
    kind: EventKind
    actor: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise InvalidInputError("seq must be >= 1")
        if self.ts.tzinfo is None:
            raise InvalidInputError("event ts must be timezone-aware")
        if not self.channel or not self.actor:
            raise InvalidInputError("channel and actor must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "ts": format_ts(self.ts),
            "channel": self.channel,
            "kind": self.kind.value,
            "actor": self.actor,
            "payload": _plain(self.payload),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SocialEvent":
        extra = set(record) - set(_EVENT_KEYS)
        missing = set(_EVENT_KEYS) - set(record)
        if extra or missing:
            raise InvalidInputError(
                f"event record keys must be exactly {_EVENT_KEYS}; "
                f"missing={sorted(missing)} extra={sorted(extra)}"
            )
        try:
            kind = EventKind(record["kind"])
        except ValueError:
            raise InvalidInputError(f"unknown event kind: {record['kind']!r}") from None
        return cls(
            seq=int(record["seq"]),
            ts=parse_ts(record["ts"]),
            channel=str(record["channel"]),
            kind=kind,
            actor=str(record["actor"]),
            payload=dict(record["payload"]),
        )


def _plain(value: Any) -> Any:
    """Reduce a payload to plain JSON types."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, datetime):
        return format_ts(value)
    return value


@dataclass(frozen=True)
class Member:
    """A human channel participant, optionally linked to a scholarly identity."""

    member_id: str
    display_name: str
    linked_author_id: str | None = None
    affiliation: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "member_id": self.member_id,
            "display_name": self.display_name,
            "linked_author_id": self.linked_author_id,
            "affiliation": self.affiliation,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Member":
        return cls(
            member_id=record["member_id"],
            display_name=record["display_name"],
            linked_author_id=record.get("linked_author_id"),
            affiliation=record.get("affiliation"),
        )


# --- payload builders -------------------------------------------------------


def message_payload(text: str) -> dict[str, Any]:
    return {"text": text}


def reaction_payload(target_seq: int, emoji: str) -> dict[str, Any]:
    return {"target_seq": target_seq, "emoji": emoji}


def reply_payload(parent_seq: int, text: str) -> dict[str, Any]:
    return {"parent_seq": parent_seq, "text": text}


# --- log file IO ------------------------------------------------------------


def dump_event_line(event: SocialEvent) -> str:
    return canonical_json(event.to_record())


def load_event_line(line: str) -> SocialEvent:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed event line: {exc}") from exc
    return SocialEvent.from_record(record)


def read_event_log(path: str | Path) -> Iterator[SocialEvent]:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield load_event_line(line)


def write_event_log(path: str | Path, events: Iterable[SocialEvent]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(dump_event_line(event) + "\n")


def append_event(path: str | Path, event: SocialEvent) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(dump_event_line(event) + "\n")

"""Deterministic replay of scripted channel activity.

A transcript describes a channel (config, roster, optional seed links) plus a
list of timed human events over a horizon. Replay drives a virtual clock
hour by hour: due transcript events are ingested first, then the scheduler
ticks. Reactions and replies may name their target symbolically -- by the
label of an earlier transcript event or by bot-post ordinal -- so scripts can
engage with posts whose seq numbers only exist at run time.

Identical (transcript, corpus, seed) inputs reproduce the event log
byte for byte.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Mapping

from .analytics import CumulativeSeries, engagement_report
from .clients import (
    CachingMetadataClient,
    CorpusFixture,
    MockCompletionClient,
    MockMetadataClient,
    MockRecommendationClient,
)
from .config import ChannelConfig
from .errors import InvalidInputError, TranscriptError
from .events import (
    EventKind,
    Member,
    SocialEvent,
    dump_event_line,
    message_payload,
    parse_ts,
    reaction_payload,
    reply_payload,
)
from .generation import Condition
from .knowledge import KnowledgeBase
from .orchestrator import CycleResult, Orchestrator
from .refs import extract_item_refs

__all__ = [
    "TimedEvent",
    "Transcript",
    "VirtualClock",
    "ReplayResult",
    "load_transcript",
    "replay",
]

_HUMAN_KINDS = (EventKind.MESSAGE, EventKind.REACTION, EventKind.REPLY, EventKind.CONFIG)


@dataclass(frozen=True)
class TimedEvent:
    """One scripted action, offset in (possibly fractional) hours from start."""

    at_hours: float
    kind: EventKind
    actor: str
    text: str | None = None
    emoji: str | None = None
    target: Any = None  # reaction target: int | {"seq"|"label"|"bot_post": ...}
    parent: Any = None  # reply parent, same forms
    changes: Mapping[str, Any] | None = None  # config updates
    label: str | None = None

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], index: int) -> "TimedEvent":
        try:
            kind = EventKind(str(raw["kind"]))
            event = cls(
                at_hours=float(raw["at_hours"]),
                kind=kind,
                actor=str(raw.get("actor", "")),
                text=raw.get("text"),
                emoji=raw.get("emoji"),
                target=raw.get("target"),
                parent=raw.get("parent"),
                changes=raw.get("changes"),
                label=raw.get("label"),
            )
        except (KeyError, ValueError) as exc:
            raise TranscriptError(f"event #{index}: {exc}") from exc
        event._check(index)
        return event

    def _check(self, index: int) -> None:
        where = f"event #{index}"
        if self.at_hours < 0:
            raise TranscriptError(f"{where}: at_hours must be >= 0")
        if self.kind not in _HUMAN_KINDS:
            raise TranscriptError(f"{where}: transcripts cannot script {self.kind.value} events")
        if self.kind is EventKind.MESSAGE and not self.text:
            raise TranscriptError(f"{where}: message needs text")
        if self.kind is EventKind.REACTION and (not self.emoji or self.target is None):
            raise TranscriptError(f"{where}: reaction needs emoji and target")
        if self.kind is EventKind.REPLY and (self.text is None or self.parent is None):
            raise TranscriptError(f"{where}: reply needs text and parent")
        if self.kind is EventKind.CONFIG and not self.changes:
            raise TranscriptError(f"{where}: config event needs changes")
        if self.kind is not EventKind.CONFIG and not self.actor:
            raise TranscriptError(f"{where}: actor is required")


@dataclass(frozen=True)
class Transcript:
    channel: str
    start_ts: datetime
    horizon_days: int
    config: ChannelConfig
    members: tuple[Member, ...]
    seed_links: tuple[str, ...] = ()
    seed_actor: str | None = None
    events: tuple[TimedEvent, ...] = ()
    corpus_path: str | None = None  # bound paper corpus, relative to the transcript file

    @property
    def horizon_hours(self) -> int:
        return self.horizon_days * 24

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Transcript":
        try:
            channel = str(raw["channel"])
            config_record = dict(raw["config"])
            config_record.setdefault("channel", channel)
            transcript = cls(
                channel=channel,
                start_ts=parse_ts(str(raw["start_ts"])),
                horizon_days=int(raw.get("horizon_days", 30)),
                config=ChannelConfig.from_record(config_record),
                members=tuple(Member.from_record(m) for m in raw.get("members", ())),
                seed_links=tuple(str(s) for s in raw.get("seed_links", ())),
                seed_actor=raw.get("seed_actor"),
                events=tuple(
                    TimedEvent.from_dict(e, i) for i, e in enumerate(raw.get("events", ()))
                ),
                corpus_path=raw.get("corpus"),
            )
        except TranscriptError:
            raise
        except (KeyError, ValueError, TypeError, InvalidInputError) as exc:
            raise TranscriptError(f"malformed transcript: {exc}") from exc
        transcript.validate()
        return transcript

    def validate(self, corpus: CorpusFixture | None = None) -> None:
        if self.horizon_days < 1:
            raise TranscriptError("horizon_days must be >= 1")
        if self.config.channel != self.channel:
            raise TranscriptError("config is for a different channel")
        if not self.members:
            raise TranscriptError("at least one member is required")
        roster = {m.member_id for m in self.members}
        if self.seed_actor is not None and self.seed_actor not in roster:
            raise TranscriptError(f"seed_actor {self.seed_actor!r} is not a member")
        labels: set[str] = set()
        for index, event in enumerate(self.events):
            where = f"event #{index}"
            if event.at_hours >= self.horizon_hours:
                raise TranscriptError(f"{where}: at_hours beyond the {self.horizon_days}-day horizon")
            if event.kind is not EventKind.CONFIG and event.actor not in roster:
                raise TranscriptError(f"{where}: unknown actor {event.actor!r}")
            if event.label is not None:
                if event.label in labels:
                    raise TranscriptError(f"{where}: duplicate label {event.label!r}")
                labels.add(event.label)
            for spec in (event.target, event.parent):
                if isinstance(spec, Mapping) and "label" in spec:
                    if spec["label"] not in labels:
                        raise TranscriptError(
                            f"{where}: target label {spec['label']!r} not defined earlier"
                        )
        if corpus is not None:
            known = set(corpus.refs)
            for link in self.seed_links:
                for ref in extract_item_refs(link) or []:
                    if ref not in known:
                        raise TranscriptError(f"seed link {link!r} is not in the corpus")
            for index, event in enumerate(self.events):
                for ref in extract_item_refs(event.text or ""):
                    if ref not in known:
                        raise TranscriptError(
                            f"event #{index}: paper {ref} is not in the corpus"
                        )


def load_transcript(path: str | Path) -> Transcript:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TranscriptError(f"cannot read transcript {path}: {exc}") from exc
    transcript = Transcript.from_dict(raw)
    if transcript.corpus_path is not None:
        resolved = Path(path).parent / transcript.corpus_path
        transcript = dataclasses.replace(transcript, corpus_path=str(resolved))
    return transcript


class VirtualClock:
    """A settable, monotonically advancing time source."""

    def __init__(self, start: datetime):
        if start.tzinfo is None:
            raise InvalidInputError("virtual clock needs a timezone-aware start")
        self._now = start

    def now(self) -> datetime:
        return self._now

    def set(self, ts: datetime) -> None:
        if ts < self._now:
            raise InvalidInputError("virtual clock cannot move backwards")
        self._now = ts

    def advance(self, delta: timedelta) -> None:
        self.set(self._now + delta)


@dataclass
class ReplayResult:
    transcript: Transcript
    kb: KnowledgeBase
    cycles: list[CycleResult]
    series: CumulativeSeries
    label_seqs: dict[str, int]
    ticks: int

    @property
    def bot_posts(self) -> list[SocialEvent]:
        return self.kb.bot_posts(self.transcript.channel)

    @property
    def events(self) -> list[SocialEvent]:
        return self.kb.events(self.transcript.channel)

    def event_log_lines(self) -> list[str]:
        return [dump_event_line(e) for e in self.events]


def _resolve_seq(spec: Any, kb: KnowledgeBase, channel: str, labels: dict[str, int]) -> int:
    if isinstance(spec, int):
        return spec
    if isinstance(spec, Mapping):
        if "seq" in spec:
            return int(spec["seq"])
        if "label" in spec:
            label = str(spec["label"])
            if label not in labels:
                raise TranscriptError(f"label {label!r} has not been ingested yet")
            return labels[label]
        if "bot_post" in spec:
            posts = kb.bot_posts(channel)
            which = spec["bot_post"]
            if which == "last":
                if not posts:
                    raise TranscriptError("no bot post to target yet")
                return posts[-1].seq
            ordinal = int(which)
            if not 1 <= ordinal <= len(posts):
                raise TranscriptError(
                    f"bot post #{ordinal} does not exist yet (have {len(posts)})"
                )
            return posts[ordinal - 1].seq
    raise TranscriptError(f"unresolvable event target: {spec!r}")


def _ingest_timed(
    event: TimedEvent,
    ts: datetime,
    kb: KnowledgeBase,
    channel: str,
    labels: dict[str, int],
) -> SocialEvent:
    if event.kind is EventKind.MESSAGE:
        actor, payload = event.actor, message_payload(str(event.text))
    elif event.kind is EventKind.REACTION:
        seq = _resolve_seq(event.target, kb, channel, labels)
        actor, payload = event.actor, reaction_payload(seq, str(event.emoji))
    elif event.kind is EventKind.REPLY:
        seq = _resolve_seq(event.parent, kb, channel, labels)
        actor, payload = event.actor, reply_payload(seq, str(event.text))
    else:  # config change
        new_config = kb.config(channel).updated(dict(event.changes or {}))
        actor = event.actor or kb.bot_actor
        payload = new_config.to_record()
    social = SocialEvent(
        seq=kb.next_seq(channel),
        ts=ts,
        channel=channel,
        kind=event.kind,
        actor=actor,
        payload=payload,
    )
    kb.ingest_event(social)
    if event.label is not None:
        labels[event.label] = social.seq
    return social


def replay(
    transcript: Transcript,
    corpus: CorpusFixture,
    base_seed: int = 0,
    condition: Condition = Condition.C4_SYNTHESIS,
    log_path: str | Path | None = None,
) -> ReplayResult:
    """Run a transcript to completion under mock clients.

    Hourly scheduler ticks over the horizon; transcript events due at or
    before a tick are ingested first, stamped with their scripted times.
    """
    transcript.validate(corpus)
    clock = VirtualClock(transcript.start_ts)
    kb = KnowledgeBase(clock=clock.now, log_path=log_path)
    orchestrator = Orchestrator(
        kb,
        metadata=CachingMetadataClient(MockMetadataClient(corpus)),
        recommender=MockRecommendationClient(corpus),
        completion=MockCompletionClient(),
        base_seed=base_seed,
        condition=condition,
    )
    orchestrator.onboard(
        transcript.config,
        transcript.members,
        seed_links=transcript.seed_links,
        seed_actor=transcript.seed_actor,
    )

    timeline = sorted(
        enumerate(transcript.events), key=lambda pair: (pair[1].at_hours, pair[0])
    )
    labels: dict[str, int] = {}
    cycles: list[CycleResult] = []
    cursor = 0
    ticks = 0
    for hour in range(transcript.horizon_hours):
        tick_time = transcript.start_ts + timedelta(hours=hour)
        while cursor < len(timeline):
            _, event = timeline[cursor]
            event_time = transcript.start_ts + timedelta(hours=event.at_hours)
            if event_time > tick_time:
                break
            clock.set(event_time)
            _ingest_timed(event, event_time, kb, transcript.channel, labels)
            cursor += 1
        clock.set(tick_time)
        cycles.extend(orchestrator.tick(tick_time))
        ticks += 1
    # Events scripted inside the final hour, after the last tick.
    while cursor < len(timeline):
        _, event = timeline[cursor]
        event_time = transcript.start_ts + timedelta(hours=event.at_hours)
        clock.set(event_time)
        _ingest_timed(event, event_time, kb, transcript.channel, labels)
        cursor += 1

    series = engagement_report(kb.events(transcript.channel), bot_actor=kb.bot_actor)
    return ReplayResult(
        transcript=transcript,
        kb=kb,
        cycles=cycles,
        series=series,
        label_seqs=labels,
        ticks=ticks,
    )

"""The social knowledge base: what was shared, by whom, and how people reacted.

State here is a pure function of the ordered channel event log. Ingesting
events one at a time and rebuilding from a persisted log must agree
field-by-field, which is what makes replaying, auditing, and the simulation
harness trustworthy. Member rosters and the paper corpus are reference data
bound at channel registration; everything social lives in events.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .clients import MetadataClient, PaperRecord
from .config import ChannelConfig
from .errors import IntegrityError, InvalidInputError, NotFoundError
from .events import EventKind, Member, SocialEvent, append_event, utc_now
from .markup import mentioned_ids
from .refs import PaperRef, extract_item_refs

__all__ = [
    "Sentiment",
    "DEFAULT_EMOJI_LEXICON",
    "DEFAULT_BOT_ACTOR",
    "classify_reaction",
    "MentionPost",
    "ReactionEntry",
    "CommentEntry",
    "IndexedPaper",
    "EngagementSummary",
    "IndexUpdate",
    "ChannelSnapshot",
    "KnowledgeBase",
]

logger = logging.getLogger(__name__)

DEFAULT_BOT_ACTOR = "paperbot"


class Sentiment(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


# Roughly twenty everyday reaction names; anything unknown is neutral.
DEFAULT_EMOJI_LEXICON: dict[str, Sentiment] = {
    "thumbsup": Sentiment.POSITIVE,
    "+1": Sentiment.POSITIVE,
    "tada": Sentiment.POSITIVE,
    "heart": Sentiment.POSITIVE,
    "heart_eyes": Sentiment.POSITIVE,
    "star": Sentiment.POSITIVE,
    "star_struck": Sentiment.POSITIVE,
    "fire": Sentiment.POSITIVE,
    "clap": Sentiment.POSITIVE,
    "raised_hands": Sentiment.POSITIVE,
    "100": Sentiment.POSITIVE,
    "rocket": Sentiment.POSITIVE,
    "bulb": Sentiment.POSITIVE,
    "partying_face": Sentiment.POSITIVE,
    "thumbsdown": Sentiment.NEGATIVE,
    "-1": Sentiment.NEGATIVE,
    "confused": Sentiment.NEGATIVE,
    "cry": Sentiment.NEGATIVE,
    "angry": Sentiment.NEGATIVE,
    "x": Sentiment.NEGATIVE,
}


def classify_reaction(emoji: str, overrides: Mapping[str, Any] | None = None) -> Sentiment:
    """Map an emoji name to a sentiment. Total: unknown names are neutral."""
    if not emoji:
        raise InvalidInputError("emoji name must be non-empty")
    if overrides and emoji in overrides:
        value = overrides[emoji]
        return value if isinstance(value, Sentiment) else Sentiment(value)
    return DEFAULT_EMOJI_LEXICON.get(emoji, Sentiment.NEUTRAL)


@dataclass(frozen=True)
class MentionPost:
    seq: int
    actor: str
    ts: datetime

    def to_record(self) -> dict[str, Any]:
        return {"seq": self.seq, "actor": self.actor, "ts": self.ts.isoformat()}


@dataclass(frozen=True)
class ReactionEntry:
    seq: int
    target_seq: int
    emoji: str
    sentiment: Sentiment
    actor: str
    ts: datetime

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "target_seq": self.target_seq,
            "emoji": self.emoji,
            "sentiment": self.sentiment.value,
            "actor": self.actor,
            "ts": self.ts.isoformat(),
        }


@dataclass(frozen=True)
class CommentEntry:
    seq: int
    parent_seq: int
    actor: str
    ts: datetime
    text: str

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "parent_seq": self.parent_seq,
            "actor": self.actor,
            "ts": self.ts.isoformat(),
            "text": self.text,
        }


@dataclass
class IndexedPaper:
    """Everything the channel has done around one paper."""

    ref: PaperRef
    mention_posts: list[MentionPost] = field(default_factory=list)
    reactions: list[ReactionEntry] = field(default_factory=list)
    comments: list[CommentEntry] = field(default_factory=list)
    record: PaperRecord | None = None

    def interested_members(self, bot_actor: str) -> set[str]:
        members = {p.actor for p in self.mention_posts}
        members |= {r.actor for r in self.reactions if r.sentiment is Sentiment.POSITIVE}
        members |= {c.actor for c in self.comments}
        members.discard(bot_actor)
        return members

    def to_record(self) -> dict[str, Any]:
        return {
            "ref": self.ref.key,
            "mention_posts": [m.to_record() for m in self.mention_posts],
            "reactions": [r.to_record() for r in self.reactions],
            "comments": [c.to_record() for c in self.comments],
        }


@dataclass(frozen=True)
class EngagementSummary:
    positive_reactions: int
    negative_reactions: int
    neutral_reactions: int
    comments: int
    last_activity_ts: datetime | None


@dataclass(frozen=True)
class IndexUpdate:
    event: SocialEvent
    created: tuple[PaperRef, ...] = ()
    updated: tuple[PaperRef, ...] = ()


@dataclass
class _ChannelState:
    config: ChannelConfig
    members: dict[str, Member]
    events: list[SocialEvent] = field(default_factory=list)
    papers: dict[PaperRef, IndexedPaper] = field(default_factory=dict)
    refs_by_seq: dict[int, tuple[PaperRef, ...]] = field(default_factory=dict)
    bot_posts: list[SocialEvent] = field(default_factory=list)

    @property
    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else 0


def _within(ts: datetime, window: timedelta | None, now: datetime) -> bool:
    return window is None or ts >= now - window


@dataclass(frozen=True)
class ChannelSnapshot:
    """An immutable read view of one channel, for detectors and generation."""

    channel: str
    config: ChannelConfig
    members: Mapping[str, Member]
    events: tuple[SocialEvent, ...]
    papers: Mapping[PaperRef, IndexedPaper]
    records: Mapping[PaperRef, PaperRecord | None]
    now: datetime
    bot_actor: str = DEFAULT_BOT_ACTOR

    def permalink(self, seq: int) -> str:
        return f"loop://{self.channel}/{seq}"

    def event_by_seq(self, seq: int) -> SocialEvent:
        for event in self.events:
            if event.seq == seq:
                return event
        raise NotFoundError(f"no event {seq} in {self.channel}")

    def record_of(self, ref: PaperRef) -> PaperRecord | None:
        return self.records.get(ref)

    def display_names(self) -> dict[str, str]:
        return {m.member_id: m.display_name for m in self.members.values()}

    @property
    def bot_posts(self) -> list[SocialEvent]:
        return [e for e in self.events if e.kind is EventKind.BOT_POST]

    def human_engaged_papers(self, window: timedelta | None = None) -> dict[PaperRef, list[int]]:
        """Papers posted, reacted to, or replied to by a human inside the window,
        with the seqs of the qualifying events as evidence."""
        engaged: dict[PaperRef, list[int]] = {}
        for ref, paper in self.papers.items():
            evidence = [
                m.seq
                for m in paper.mention_posts
                if m.actor != self.bot_actor and _within(m.ts, window, self.now)
            ]
            evidence += [
                r.seq
                for r in paper.reactions
                if r.actor != self.bot_actor and _within(r.ts, window, self.now)
            ]
            evidence += [
                c.seq
                for c in paper.comments
                if c.actor != self.bot_actor and _within(c.ts, window, self.now)
            ]
            if evidence:
                engaged[ref] = sorted(evidence)
        return engaged

    def member_interest_papers(self, member_id: str) -> dict[PaperRef, list[int]]:
        """Papers this member shared, reacted positively to, or commented on."""
        interests: dict[PaperRef, list[int]] = {}
        for ref, paper in self.papers.items():
            evidence = [m.seq for m in paper.mention_posts if m.actor == member_id]
            evidence += [
                r.seq
                for r in paper.reactions
                if r.actor == member_id and r.sentiment is Sentiment.POSITIVE
            ]
            evidence += [c.seq for c in paper.comments if c.actor == member_id]
            if evidence:
                interests[ref] = sorted(evidence)
        return interests

    def suppressed_members(self, cooldown: int | None = None) -> set[str]:
        """Members mention-tokenized in any of the last ``cooldown`` bot posts."""
        if cooldown is None:
            cooldown = self.config.mention_cooldown
        if cooldown <= 0:
            return set()
        suppressed: set[str] = set()
        for post in self.bot_posts[-cooldown:]:
            suppressed.update(mentioned_ids(str(post.payload.get("body", ""))))
        return suppressed

    def sharer_of(self, ref: PaperRef) -> MentionPost | None:
        """Most recent human mention post of a paper, else most recent mention."""
        paper = self.papers.get(ref)
        if paper is None or not paper.mention_posts:
            return None
        human = [m for m in paper.mention_posts if m.actor != self.bot_actor]
        pool = human or paper.mention_posts
        return max(pool, key=lambda m: m.seq)


class KnowledgeBase:
    """Event-sourced index of channel interactions around papers."""

    def __init__(
        self,
        clock: Callable[[], datetime] = utc_now,
        log_path: str | Path | None = None,
        bot_actor: str = DEFAULT_BOT_ACTOR,
    ):
        self.clock = clock
        self.bot_actor = bot_actor
        self._log_path = Path(log_path) if log_path else None
        self._states: dict[str, _ChannelState] = {}

    # -- channel registry ----------------------------------------------------

    def register_channel(self, config: ChannelConfig, members: Iterable[Member]) -> None:
        if config.channel in self._states:
            raise InvalidInputError(f"channel already registered: {config.channel}")
        roster: dict[str, Member] = {}
        for member in members:
            if member.member_id in roster:
                raise InvalidInputError(f"duplicate member id: {member.member_id}")
            roster[member.member_id] = member
        self._states[config.channel] = _ChannelState(config=config, members=roster)

    def has_channel(self, channel: str) -> bool:
        return channel in self._states

    def channels(self) -> list[str]:
        return list(self._states)

    def _state(self, channel: str) -> _ChannelState:
        try:
            return self._states[channel]
        except KeyError:
            raise NotFoundError(f"unknown channel: {channel}") from None

    def config(self, channel: str) -> ChannelConfig:
        return self._state(channel).config

    def members(self, channel: str) -> dict[str, Member]:
        return dict(self._state(channel).members)

    def events(self, channel: str) -> list[SocialEvent]:
        return list(self._state(channel).events)

    def bot_posts(self, channel: str) -> list[SocialEvent]:
        return list(self._state(channel).bot_posts)

    def papers(self, channel: str) -> dict[PaperRef, IndexedPaper]:
        return dict(self._state(channel).papers)

    def mentioned_refs(self, channel: str) -> set[PaperRef]:
        return set(self._state(channel).papers)

    def recommended_refs(self, channel: str) -> set[PaperRef]:
        refs = set()
        for post in self._state(channel).bot_posts:
            raw = post.payload.get("paper_ref")
            if raw:
                refs.add(PaperRef.parse(str(raw)))
        return refs

    def last_post_ts(self, channel: str) -> datetime | None:
        posts = self._state(channel).bot_posts
        return posts[-1].ts if posts else None

    def next_seq(self, channel: str) -> int:
        return self._state(channel).last_seq + 1

    def attach_log(self, path: str | Path) -> None:
        self._log_path = Path(path)

    # -- ingestion -------------------------------------------------------------

    def ingest_event(self, event: SocialEvent) -> IndexUpdate:
        """Validate and fold one event into channel state.

        Events must arrive with consecutive per-channel seq values (starting at
        1, no gaps); reactions and replies must reference an existing earlier
        event in the same channel. Valid events are appended to the attached
        log, if any, after state is updated.
        """
        state = self._state(event.channel)
        expected = state.last_seq + 1
        if event.seq != expected:
            raise IntegrityError(
                f"out-of-order event in {event.channel}: got seq {event.seq}, expected {expected}"
            )

        created: list[PaperRef] = []
        updated: list[PaperRef] = []

        def touch(ref: PaperRef) -> IndexedPaper:
            paper = state.papers.get(ref)
            if paper is None:
                paper = IndexedPaper(ref=ref)
                state.papers[ref] = paper
                created.append(ref)
            elif ref not in updated and ref not in created:
                updated.append(ref)
            return paper

        if event.kind in (EventKind.MESSAGE, EventKind.BOT_POST):
            if event.kind is EventKind.MESSAGE:
                refs = extract_item_refs(str(event.payload.get("text", "")))
            else:
                raw = event.payload.get("paper_ref")
                refs = [PaperRef.parse(str(raw))] if raw else []
            for ref in refs:
                touch(ref).mention_posts.append(
                    MentionPost(seq=event.seq, actor=event.actor, ts=event.ts)
                )
            state.refs_by_seq[event.seq] = tuple(refs)
            if event.kind is EventKind.BOT_POST:
                state.bot_posts.append(event)
        elif event.kind is EventKind.REACTION:
            target = int(event.payload["target_seq"])
            if target not in {e.seq for e in state.events}:
                raise IntegrityError(f"reaction targets unknown seq {target} in {event.channel}")
            emoji = str(event.payload["emoji"])
            sentiment = classify_reaction(emoji, state.config.emoji_lexicon_overrides)
            for ref in state.refs_by_seq.get(target, ()):
                touch(ref).reactions.append(
                    ReactionEntry(
                        seq=event.seq,
                        target_seq=target,
                        emoji=emoji,
                        sentiment=sentiment,
                        actor=event.actor,
                        ts=event.ts,
                    )
                )
        elif event.kind is EventKind.REPLY:
            parent = int(event.payload["parent_seq"])
            if parent not in {e.seq for e in state.events}:
                raise IntegrityError(f"reply targets unknown seq {parent} in {event.channel}")
            for ref in state.refs_by_seq.get(parent, ()):
                touch(ref).comments.append(
                    CommentEntry(
                        seq=event.seq,
                        parent_seq=parent,
                        actor=event.actor,
                        ts=event.ts,
                        text=str(event.payload.get("text", "")),
                    )
                )
        elif event.kind is EventKind.CONFIG:
            new_config = ChannelConfig.from_record(event.payload)
            if new_config.channel != event.channel:
                raise IntegrityError("config payload names a different channel")
            state.config = new_config
        else:  # pragma: no cover - enum is closed
            raise InvalidInputError(f"unhandled event kind: {event.kind}")

        state.events.append(event)
        if self._log_path:
            append_event(self._log_path, event)
        return IndexUpdate(event=event, created=tuple(created), updated=tuple(updated))

    # -- queries ---------------------------------------------------------------

    def engagement_summary(
        self,
        ref: PaperRef,
        channel: str,
        window: timedelta | None = None,
        now: datetime | None = None,
    ) -> EngagementSummary:
        """Reaction/comment counts for one paper, restricted to a trailing window."""
        state = self._state(channel)
        paper = state.papers.get(ref)
        if paper is None:
            raise NotFoundError(f"paper not indexed in {channel}: {ref}")
        now = now or self.clock()
        counts = {Sentiment.POSITIVE: 0, Sentiment.NEGATIVE: 0, Sentiment.NEUTRAL: 0}
        timestamps: list[datetime] = []
        for reaction in paper.reactions:
            if _within(reaction.ts, window, now):
                counts[reaction.sentiment] += 1
                timestamps.append(reaction.ts)
        comment_count = 0
        for comment in paper.comments:
            if _within(comment.ts, window, now):
                comment_count += 1
                timestamps.append(comment.ts)
        timestamps.extend(m.ts for m in paper.mention_posts if _within(m.ts, window, now))
        return EngagementSummary(
            positive_reactions=counts[Sentiment.POSITIVE],
            negative_reactions=counts[Sentiment.NEGATIVE],
            neutral_reactions=counts[Sentiment.NEUTRAL],
            comments=comment_count,
            last_activity_ts=max(timestamps) if timestamps else None,
        )

    def candidate_seeds(
        self,
        channel: str,
        window: timedelta | None = None,
        now: datetime | None = None,
    ) -> list[PaperRef]:
        """Recently active papers the channel showed appetite for.

        A paper qualifies when it was mentioned inside the window and drew at
        least one positive reaction or one comment there. Negative-only
        engagement never seeds recommendations. Most recently active first.
        """
        state = self._state(channel)
        now = now or self.clock()
        if window is None:
            window = state.config.seed_window
        qualified: list[tuple[datetime, PaperRef]] = []
        for ref, paper in state.papers.items():
            if not any(_within(m.ts, window, now) for m in paper.mention_posts):
                continue
            summary = self.engagement_summary(ref, channel, window=window, now=now)
            if summary.positive_reactions >= 1 or summary.comments >= 1:
                assert summary.last_activity_ts is not None
                qualified.append((summary.last_activity_ts, ref))
        qualified.sort(key=lambda item: (item[0], item[1].key), reverse=True)
        return [ref for _, ref in qualified]

    def snapshot(
        self,
        channel: str,
        metadata: MetadataClient | None = None,
        now: datetime | None = None,
    ) -> ChannelSnapshot:
        state = self._state(channel)
        records: dict[PaperRef, PaperRecord | None] = {}
        for ref in state.papers:
            record = None
            if metadata is not None:
                try:
                    record = metadata.fetch_paper_metadata(ref)
                except NotFoundError:
                    logger.warning("no metadata for indexed paper %s", ref)
            records[ref] = record
        papers = {
            ref: IndexedPaper(
                ref=ref,
                mention_posts=list(p.mention_posts),
                reactions=list(p.reactions),
                comments=list(p.comments),
                record=records.get(ref),
            )
            for ref, p in state.papers.items()
        }
        return ChannelSnapshot(
            channel=channel,
            config=state.config,
            members=dict(state.members),
            events=tuple(state.events),
            papers=papers,
            records=records,
            now=now or self.clock(),
            bot_actor=self.bot_actor,
        )

    def state_digest(self, channel: str) -> dict[str, Any]:
        """Canonical derived-state structure for equality comparisons."""
        state = self._state(channel)
        return {
            "channel": channel,
            "last_seq": state.last_seq,
            "config": state.config.to_record(),
            "papers": {
                ref.key: state.papers[ref].to_record() for ref in sorted(state.papers)
            },
            "refs_by_seq": {
                str(seq): [r.key for r in refs]
                for seq, refs in sorted(state.refs_by_seq.items())
            },
        }

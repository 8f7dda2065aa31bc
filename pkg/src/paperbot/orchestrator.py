"""Scheduling and the end-to-end recommendation cycle.

One cycle: gather seed papers the channel recently engaged with, fetch
recommendations, drop anything already mentioned or already recommended,
detect and rank social signals for the top candidate, generate the message,
and post it back into the channel. Posting feeds the knowledge base, so the
bot's own history (and reactions to it) shapes the next cycle.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterable, Protocol, Sequence

from .clients import CompletionClient, MetadataClient, RecommendationClient
from .config import ChannelConfig
from .errors import ConnectorError, GenerationFailedError, InvalidInputError
from .events import EventKind, Member, SocialEvent, message_payload
from .generation import BotMessage, Condition, derive_seed, generate_message, render_condition
from .knowledge import IndexUpdate, KnowledgeBase
from .markup import mentioned_ids
from .refs import PaperRef, ref_url
from .signals import SelectedSignals, detect_all_signals, rank_and_select

__all__ = [
    "Connector",
    "LoopbackConnector",
    "CycleStatus",
    "CycleResult",
    "next_post_time",
    "Orchestrator",
    "RECOMMENDATION_HEADROOM",
]

logger = logging.getLogger(__name__)

# Ask the recommender for this many results beyond the number we may exclude.
RECOMMENDATION_HEADROOM = 10


class Connector(Protocol):
    """Chat-platform adapter: post messages, read back events, build links."""

    def post_message(self, channel: str, message: BotMessage) -> SocialEvent: ...

    def subscribe(self, channel: str, since: int = 0) -> Iterable[SocialEvent]: ...

    def permalink(self, channel: str, seq: int) -> str: ...


class LoopbackConnector:
    """Posts straight into the local knowledge base (simulation / sandbox)."""

    def __init__(self, kb: KnowledgeBase):
        self._kb = kb

    def post_message(self, channel: str, message: BotMessage) -> SocialEvent:
        event = SocialEvent(
            seq=self._kb.next_seq(channel),
            ts=self._kb.clock(),
            channel=channel,
            kind=EventKind.BOT_POST,
            actor=self._kb.bot_actor,
            payload=message.to_record(),
        )
        self._kb.ingest_event(event)
        return event

    def subscribe(self, channel: str, since: int = 0) -> Iterable[SocialEvent]:
        return [e for e in self.kb_events(channel) if e.seq > since]

    def permalink(self, channel: str, seq: int) -> str:
        return self._kb.snapshot(channel).permalink(seq)

    def kb_events(self, channel: str) -> tuple[SocialEvent, ...]:
        return self._kb.snapshot(channel).events


class CycleStatus(str, Enum):
    POSTED = "posted"
    SKIPPED_NO_CANDIDATES = "skipped_no_candidates"
    SKIPPED_GENERATION_FAILED = "skipped_generation_failed"
    FAILED_CONNECTOR = "failed_connector"


@dataclass(frozen=True)
class CycleResult:
    channel: str
    status: CycleStatus
    message: BotMessage | None = None
    posted_seq: int | None = None
    candidate: PaperRef | None = None
    selected: SelectedSignals | None = None
    seeds: tuple[PaperRef, ...] = ()
    detail: str = ""

    @property
    def posted(self) -> bool:
        return self.status is CycleStatus.POSTED


def next_post_time(
    config: ChannelConfig, last_post_ts: datetime | None, now: datetime
) -> datetime:
    """When the next post is due: interval after the last one, or right away."""
    if last_post_ts is None:
        return now
    return last_post_ts + config.post_interval


class Orchestrator:
    """Drives per-channel recommendation cycles against a knowledge base."""

    def __init__(
        self,
        kb: KnowledgeBase,
        metadata: MetadataClient,
        recommender: RecommendationClient,
        completion: CompletionClient,
        base_seed: int = 0,
        connector: Connector | None = None,
        condition: Condition = Condition.C4_SYNTHESIS,
    ):
        self.kb = kb
        self.metadata = metadata
        self.recommender = recommender
        self.completion = completion
        self.base_seed = base_seed
        self.connector: Connector = connector or LoopbackConnector(kb)
        self.condition = condition
        self._locks: dict[str, threading.Lock] = {}

    def _lock(self, channel: str) -> threading.Lock:
        return self._locks.setdefault(channel, threading.Lock())

    # -- onboarding ------------------------------------------------------------

    def onboard(
        self,
        config: ChannelConfig,
        members: Iterable[Member],
        seed_links: Sequence[str] = (),
        seed_actor: str | None = None,
    ) -> None:
        """Register a channel and optionally post seed paper links as a member."""
        self.kb.register_channel(config, members)
        if seed_links:
            self.post_seed_links(config.channel, seed_links, seed_actor)

    def post_seed_links(
        self, channel: str, seed_links: Sequence[str], seed_actor: str | None = None
    ) -> list[SocialEvent]:
        """Post paper links as member messages so the channel has seeds."""
        roster = self.kb.members(channel)
        if not roster:
            raise InvalidInputError("seed links need at least one member to post them")
        actor = seed_actor or sorted(roster)[0]
        if actor not in roster:
            raise InvalidInputError(f"seed actor is not a channel member: {actor}")
        posted = []
        for link in seed_links:
            ref = PaperRef.parse(link) if ":" in link and "//" not in link else None
            text = ref_url(ref) if ref is not None else link
            event = SocialEvent(
                seq=self.kb.next_seq(channel),
                ts=self.kb.clock(),
                channel=channel,
                kind=EventKind.MESSAGE,
                actor=actor,
                payload=message_payload(text),
            )
            self.kb.ingest_event(event)
            posted.append(event)
        return posted

    # -- the cycle ---------------------------------------------------------------

    def run_cycle(
        self,
        channel: str,
        now: datetime | None = None,
        seed: int | None = None,
        condition: Condition | None = None,
    ) -> CycleResult:
        """Attempt one recommendation post for ``channel``.

        Never posts a paper that was already mentioned in the channel or
        already recommended by the bot. The generation seed is derived from
        the base seed, the channel name, and how many posts the bot has
        already made there, so replays are reproducible.
        """
        with self._lock(channel):
            now = now if now is not None else self.kb.clock()
            condition = condition or self.condition
            seeds = tuple(self.kb.candidate_seeds(channel, now=now))
            if not seeds:
                return CycleResult(
                    channel, CycleStatus.SKIPPED_NO_CANDIDATES, detail="no seed papers"
                )
            excluded = self.kb.mentioned_refs(channel) | self.kb.recommended_refs(channel)
            k = len(excluded) + RECOMMENDATION_HEADROOM
            recommendations = self.recommender.fetch_recommendations(list(seeds), k=k)
            candidates = [r for r in recommendations if r.ref not in excluded]
            if not candidates:
                return CycleResult(
                    channel,
                    CycleStatus.SKIPPED_NO_CANDIDATES,
                    seeds=seeds,
                    detail="every recommendation was already known",
                )
            paper = candidates[0]
            snapshot = self.kb.snapshot(channel, self.metadata, now=now)
            selected = rank_and_select(detect_all_signals(paper, snapshot))
            if seed is None:
                seed = derive_seed(self.base_seed, channel, len(snapshot.bot_posts))
            try:
                if condition is Condition.C4_SYNTHESIS:
                    message, _, _ = generate_message(
                        paper, selected, snapshot, self.completion, seed=seed
                    )
                else:
                    message = render_condition(
                        paper, selected, condition, snapshot, self.completion, seed=seed
                    )
            except GenerationFailedError as exc:
                logger.warning("generation failed for %s in %s: %s", paper.ref, channel, exc)
                return CycleResult(
                    channel,
                    CycleStatus.SKIPPED_GENERATION_FAILED,
                    candidate=paper.ref,
                    selected=selected,
                    seeds=seeds,
                    detail=str(exc),
                )
            event = self.connector.post_message(channel, message)
            return CycleResult(
                channel,
                CycleStatus.POSTED,
                message=message,
                posted_seq=event.seq,
                candidate=paper.ref,
                selected=selected,
                seeds=seeds,
            )

    def tick(self, now: datetime | None = None) -> list[CycleResult]:
        """Run a cycle for every channel whose next post is due.

        Connector failures are contained: the schedule only advances on a
        successful post, so the next tick simply tries again.
        """
        now = now if now is not None else self.kb.clock()
        results: list[CycleResult] = []
        for channel in self.kb.channels():
            due = next_post_time(self.kb.config(channel), self.kb.last_post_ts(channel), now)
            if now < due:
                continue
            try:
                results.append(self.run_cycle(channel, now=now))
            except ConnectorError as exc:
                logger.warning("posting to %s failed, will retry next tick: %s", channel, exc)
                results.append(
                    CycleResult(channel, CycleStatus.FAILED_CONNECTOR, detail=str(exc))
                )
        return results

    # -- feedback ---------------------------------------------------------------

    def apply_feedback(self, event: SocialEvent) -> IndexUpdate:
        """Ingest a reaction or reply that targets one of the bot's posts."""
        if event.kind not in (EventKind.REACTION, EventKind.REPLY):
            raise InvalidInputError(f"feedback must be a reaction or reply, got {event.kind}")
        key = "target_seq" if event.kind is EventKind.REACTION else "parent_seq"
        target_seq = int(event.payload[key])
        target = next(
            (e for e in self.kb.events(event.channel) if e.seq == target_seq), None
        )
        if target is None or target.kind is not EventKind.BOT_POST:
            raise InvalidInputError(
                f"feedback target seq {target_seq} is not a bot post in {event.channel}"
            )
        return self.kb.ingest_event(event)

    def mention_allowed(self, channel: str, member_id: str) -> bool:
        """False while the member is inside the mention cooldown window."""
        config = self.kb.config(channel)
        suppressed: set[str] = set()
        posts = self.kb.bot_posts(channel)[-config.mention_cooldown :] if config.mention_cooldown > 0 else []
        for post in posts:
            suppressed.update(mentioned_ids(str(post.payload.get("body", ""))))
        return member_id not in suppressed

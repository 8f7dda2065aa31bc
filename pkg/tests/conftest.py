"""Shared test world: a small closed corpus of papers plus channel builders.

Embeddings are 8-dimensional with Pythagorean components only (3-4-5 and
7-24-25 style), so every vector has an exactly-1.0 norm and cosines computed
by independent oracles are exact dot products -- no tolerances needed.
"""
from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from paperbot.clients import Author, CorpusFixture, MockMetadataClient, PaperRecord
from paperbot.config import ChannelConfig, Frequency
from paperbot.events import (
    EventKind,
    Member,
    SocialEvent,
    message_payload,
    reaction_payload,
    reply_payload,
)
from paperbot.knowledge import KnowledgeBase
from paperbot.refs import PaperRef, ref_url

T0 = datetime(2026, 3, 2, 9, 0, tzinfo=timezone.utc)
CHANNEL = "paper-feed"


def vec(*components: float) -> tuple[float, ...]:
    return tuple(float(c) for c in components) + (0.0,) * (8 - len(components))


E_A = vec(1.0)
E_A2 = vec(0.8, 0.6)          # cos(E_A, E_A2) = 0.8
E_A3 = vec(0.6, 0.8)          # cos(E_A, E_A3) = 0.6, cos(E_A2, E_A3) = 0.96
E_B = vec(0.0, 0.0, 1.0)
E_B2 = vec(0.0, 0.0, 0.96, 0.28)   # cos(E_B, E_B2) = 0.96
E_C = vec(0.0, 0.0, 0.0, 0.0, 0.6, 0.48, 0.64)
E_C2 = vec(0.0, 0.0, 0.0, 0.0, 0.48, 0.36, 0.8)  # cos(E_C, E_C2) = 0.9728
E_D = vec(0.0, 0.6, 0.0, 0.8)

A_PARK = Author("a_park", "Ada Park", ("Aurora Lab",))
A_NOVAK = Author("a_novak", "Petr Novak", ("Karlsen University",))
A_ORTIZ = Author("a_ortiz", "Lucia Ortiz", ("Tidewater Institute",))
A_SAITO = Author("a_saito", "Rin Saito", ())
A_MALIK = Author("a_malik", "Imran Malik", ("Aurora Lab",))
A_WEBER = Author("a_weber", "Greta Weber", ())

SEED1 = "arxiv:2401.01001"
SEED2 = "arxiv:2401.01002"
PRIOR_BY_MEMBER = "arxiv:2401.01003"
CAND_MAIN = "arxiv:2402.02001"
CAND_PLAIN = "arxiv:2402.02002"
CAND_SIMILAR = "arxiv:2402.02003"
DEGRADED = "arxiv:2402.02004"
DOI_PAPER = "doi:10.1145/3613904.3642501"


def paper(
    key: str,
    title: str,
    abstract: str | None,
    authors: tuple[Author, ...],
    venue: str | None = None,
    year: int = 2024,
    citations: tuple[str, ...] = (),
    embedding: tuple[float, ...] | None = None,
    citation_contexts: dict[str, tuple[str, ...]] | None = None,
) -> PaperRecord:
    return PaperRecord(
        ref=PaperRef.parse(key),
        title=title,
        abstract=abstract,
        authors=authors,
        venue=venue,
        year=year,
        citations=tuple(PaperRef.parse(c) for c in citations),
        citation_contexts=citation_contexts or {},
        embedding=embedding,
    )


def base_papers() -> list[PaperRecord]:
    return [
        paper(
            SEED1,
            "Conversational Retrieval over Group Memory",
            "We study retrieval over shared chat history. Recall improves by 18% on"
            " three workloads. A unified index supports replies and reactions.",
            (A_NOVAK, A_ORTIZ),
            venue="CHI",
            embedding=E_A,
        ),
        paper(
            SEED2,
            "Emoji Reactions as Implicit Relevance Signals",
            "Reactions carry graded relevance. We map twenty emoji to sentiment and"
            " evaluate agreement with explicit ratings.",
            (A_SAITO,),
            venue="CSCW",
            citations=(SEED1,),
            embedding=E_B,
            citation_contexts={SEED1: ("Group memory indexes inform our sampling.",)},
        ),
        paper(
            PRIOR_BY_MEMBER,
            "Citation-Aware Feed Ranking",
            "Feeds ranked with citation graphs surface older work. We report a 12%"
            " lift in saved items.",
            (A_MALIK,),
            venue="SIGIR",
            embedding=E_C,
        ),
        paper(
            CAND_MAIN,
            "Socially Grounded Summaries for Reading Groups",
            "Summaries grounded in a group's own discussion read better. A study with"
            " 42 readers preferred grounded drafts.",
            (A_PARK, A_NOVAK),
            venue="CHI",
            citations=(SEED1,),
            embedding=E_A2,
            citation_contexts={SEED1: ("We build directly on group-memory retrieval.",)},
        ),
        paper(
            CAND_PLAIN,
            "Threaded Digests for Research Channels",
            "Digest messages reduce channel noise. Threads keep discussion attached"
            " to the digest.",
            (A_WEBER,),
            venue="UIST",
            embedding=E_A3,
        ),
        paper(
            CAND_SIMILAR,
            "Lightweight Embedding Indexes for Small Corpora",
            "Small corpora need no approximate index. Exact scoring is faster below"
            " ten thousand items.",
            (A_WEBER,),
            venue="SIGIR",
            embedding=E_C2,
        ),
        paper(
            DEGRADED,
            "Sparse Notes on Retrieval Heuristics",
            None,
            (A_SAITO,),
            venue=None,
            embedding=None,
        ),
        paper(
            DOI_PAPER,
            "Moderating Paper Floods in Team Chat",
            "Teams drown in shared links. Rate-limited digests recover attention"
            " without losing coverage.",
            (A_ORTIZ,),
            venue="CHI",
            embedding=E_D,
        ),
    ]


@pytest.fixture()
def corpus() -> CorpusFixture:
    return CorpusFixture(base_papers())


MEMBERS = (
    Member("u_ada", "Ada Park", linked_author_id="a_park", affiliation="Aurora Lab"),
    Member("u_bo", "Bo Liang", affiliation="Tidewater Institute"),
    Member("u_carol", "Carol Reyes"),
    Member("u_imran", "Imran Malik", linked_author_id="a_malik"),
)


@pytest.fixture()
def members() -> tuple[Member, ...]:
    return MEMBERS


def make_config(**overrides) -> ChannelConfig:
    base = dict(channel=CHANNEL, frequency=Frequency.WEEKLY)
    base.update(overrides)
    return ChannelConfig(**base)


@pytest.fixture()
def config() -> ChannelConfig:
    return make_config()


class EventScript:
    """Builds a channel's event list with automatic seqs and timestamps."""

    def __init__(self, channel: str = CHANNEL, start: datetime = T0):
        self.channel = channel
        self.start = start
        self.events: list[SocialEvent] = []

    @property
    def _next_seq(self) -> int:
        return len(self.events) + 1

    def _stamp(self, minutes: float | None) -> datetime:
        if minutes is None:
            minutes = 10.0 * self._next_seq
        return self.start + timedelta(minutes=minutes)

    def _add(self, kind: EventKind, actor: str, payload: dict, minutes: float | None) -> SocialEvent:
        event = SocialEvent(
            seq=self._next_seq,
            ts=self._stamp(minutes),
            channel=self.channel,
            kind=kind,
            actor=actor,
            payload=payload,
        )
        self.events.append(event)
        return event

    def message(self, actor: str, text: str, minutes: float | None = None) -> SocialEvent:
        return self._add(EventKind.MESSAGE, actor, message_payload(text), minutes)

    def share(self, actor: str, ref_key: str, minutes: float | None = None) -> SocialEvent:
        return self.message(actor, f"worth a look: {ref_url(PaperRef.parse(ref_key))}", minutes)

    def react(
        self, actor: str, target: SocialEvent | int, emoji: str, minutes: float | None = None
    ) -> SocialEvent:
        seq = target.seq if isinstance(target, SocialEvent) else target
        return self._add(EventKind.REACTION, actor, reaction_payload(seq, emoji), minutes)

    def reply(
        self, actor: str, parent: SocialEvent | int, text: str, minutes: float | None = None
    ) -> SocialEvent:
        seq = parent.seq if isinstance(parent, SocialEvent) else parent
        return self._add(EventKind.REPLY, actor, reply_payload(seq, text), minutes)


def build_kb(
    events: list[SocialEvent],
    config: ChannelConfig | None = None,
    members: tuple[Member, ...] = MEMBERS,
    now: datetime | None = None,
) -> KnowledgeBase:
    moment = now or (events[-1].ts if events else T0)
    kb = KnowledgeBase(clock=lambda: moment)
    kb.register_channel(config or make_config(), members)
    for event in events:
        kb.ingest_event(event)
    return kb


def snapshot_for(kb: KnowledgeBase, corpus: CorpusFixture, now: datetime | None = None):
    return kb.snapshot(CHANNEL, MockMetadataClient(corpus), now=now)

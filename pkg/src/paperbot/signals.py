"""Retrieval and ranking of social signals about a candidate paper.

Nine heuristics in three families connect a candidate to the channel:

* metadata (h1-h4): an author is a channel member; an author shows up on
  recently engaged papers; an author's affiliation matches a member's; the
  venue shows up on recently engaged papers;
* paper connections (h5-h7): a previously shared paper is related by
  citation, shared authorship, or embedding similarity; a prior paper drew
  replies/reactions worth surfacing; a prior paper was authored by a member;
* member connections (h8-h9): a member's interest profile is similar to the
  candidate; a concrete named relation to a member exists (liked similar
  papers, liked the author's papers, liked the venue's papers, own
  publications similar, cited similar work).

Scores are a declared evidence-strength scale, not probabilities: citation
relations (1.0) beat shared authorship (0.8) which beats raw embedding
similarity (the cosine value itself); member-connection signals score by
similarity; metadata signals score by engagement volume inside the window.
Selection keeps the best signal per family, at most three in total.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping

from .clients import PaperRecord, cosine_similarity
from .events import canonical_json
from .knowledge import ChannelSnapshot
from .refs import PaperRef

__all__ = [
    "Heuristic",
    "Category",
    "InterestVariant",
    "SocialSignal",
    "SelectedSignals",
    "detect_metadata_signals",
    "detect_paper_connection_signals",
    "detect_member_signals",
    "detect_all_signals",
    "rank_and_select",
    "cosine_similarity",
]


class Heuristic(str, Enum):
    H1_AUTHOR_IS_MEMBER = "h1"
    H2_AUTHOR_ENGAGED_RECENTLY = "h2"
    H3_AFFILIATION_MATCH = "h3"
    H4_VENUE_ENGAGED_RECENTLY = "h4"
    H5_PRIOR_PAPER_RELATION = "h5"
    H6_PRIOR_PAPER_ENGAGEMENT = "h6"
    H7_PRIOR_PAPER_BY_MEMBER = "h7"
    H8_MEMBER_INTEREST_SIMILARITY = "h8"
    H9_MEMBER_RELATION_VARIANT = "h9"

    @property
    def number(self) -> int:
        return int(self.value[1])


class Category(str, Enum):
    METADATA = "metadata"
    PAPER_CONNECTION = "paper_connection"
    MEMBER_CONNECTION = "member_connection"


CATEGORY_OF: dict[Heuristic, Category] = {
    Heuristic.H1_AUTHOR_IS_MEMBER: Category.METADATA,
    Heuristic.H2_AUTHOR_ENGAGED_RECENTLY: Category.METADATA,
    Heuristic.H3_AFFILIATION_MATCH: Category.METADATA,
    Heuristic.H4_VENUE_ENGAGED_RECENTLY: Category.METADATA,
    Heuristic.H5_PRIOR_PAPER_RELATION: Category.PAPER_CONNECTION,
    Heuristic.H6_PRIOR_PAPER_ENGAGEMENT: Category.PAPER_CONNECTION,
    Heuristic.H7_PRIOR_PAPER_BY_MEMBER: Category.PAPER_CONNECTION,
    Heuristic.H8_MEMBER_INTEREST_SIMILARITY: Category.MEMBER_CONNECTION,
    Heuristic.H9_MEMBER_RELATION_VARIANT: Category.MEMBER_CONNECTION,
}


class InterestVariant(str, Enum):
    LIKED_SIMILAR = "liked_similar"
    LIKED_AUTHOR = "liked_author"
    LIKED_VENUE = "liked_venue"
    OWN_PUBLICATIONS = "own_publications_similar"
    CITES_SIMILAR = "cites_similar"


# Identity fields per heuristic: what makes two emissions "the same signal"
# regardless of how much evidence backs them.
_IDENTITY_FIELDS: dict[Heuristic, tuple[str, ...]] = {
    Heuristic.H1_AUTHOR_IS_MEMBER: ("member_id", "author_id"),
    Heuristic.H2_AUTHOR_ENGAGED_RECENTLY: ("author_id",),
    Heuristic.H3_AFFILIATION_MATCH: ("member_id", "affiliation"),
    Heuristic.H4_VENUE_ENGAGED_RECENTLY: ("venue",),
    Heuristic.H5_PRIOR_PAPER_RELATION: ("prior_paper",),
    Heuristic.H6_PRIOR_PAPER_ENGAGEMENT: ("prior_paper",),
    Heuristic.H7_PRIOR_PAPER_BY_MEMBER: ("prior_paper", "member_id"),
    Heuristic.H8_MEMBER_INTEREST_SIMILARITY: ("member_id",),
    Heuristic.H9_MEMBER_RELATION_VARIANT: ("member_id", "variant"),
}

# --- score scale -------------------------------------------------------------

SCORE_AUTHOR_IS_MEMBER = 1.0
SCORE_AFFILIATION_MATCH = 0.3
SCORE_CITATION = 1.0
SCORE_SHARED_AUTHOR = 0.8
SCORE_MEMBER_AUTHORED_PRIOR = 0.9
SCORE_OWN_PUBLICATION_SHARED_AUTHOR = 0.8
SCORE_CITES_LINK = 0.85
SCORE_LIKED_AUTHOR = 0.8
SCORE_LIKED_VENUE = 0.7

# "Several", as in "you've liked several similar papers".
SEVERAL = 2


def score_recent_author(count: int) -> float:
    """h2: grows with the number of engaged papers, bounded below h1's 1.0."""
    return 0.5 + 0.4 * count / (count + 1)


def score_recent_venue(count: int) -> float:
    return 0.4 + 0.4 * count / (count + 1)


def score_engagement(count: int) -> float:
    """h6: reply/reaction volume on the prior paper."""
    return 0.5 * count / (count + 1)


@dataclass(frozen=True)
class SocialSignal:
    heuristic: Heuristic
    score: float
    payload: Mapping[str, Any]
    evidence_seqs: tuple[int, ...] = ()

    @property
    def category(self) -> Category:
        return CATEGORY_OF[self.heuristic]

    def identity(self) -> tuple[str, str]:
        fields = _IDENTITY_FIELDS[self.heuristic]
        core = {name: self.payload.get(name) for name in fields}
        return (self.heuristic.value, canonical_json(core))

    def to_record(self) -> dict[str, Any]:
        return {
            "heuristic": self.heuristic.value,
            "category": self.category.value,
            "score": self.score,
            "payload": dict(self.payload),
            "evidence_seqs": list(self.evidence_seqs),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SocialSignal":
        return cls(
            heuristic=Heuristic(record["heuristic"]),
            score=float(record["score"]),
            payload=dict(record["payload"]),
            evidence_seqs=tuple(int(s) for s in record.get("evidence_seqs", ())),
        )


@dataclass(frozen=True)
class SelectedSignals:
    """At most one winning signal per category."""

    metadata: SocialSignal | None = None
    paper_connection: SocialSignal | None = None
    member_connection: SocialSignal | None = None

    def signals(self) -> list[SocialSignal]:
        return [
            s
            for s in (self.metadata, self.paper_connection, self.member_connection)
            if s is not None
        ]

    def __len__(self) -> int:
        return len(self.signals())

    def to_record(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata.to_record() if self.metadata else None,
            "paper_connection": (
                self.paper_connection.to_record() if self.paper_connection else None
            ),
            "member_connection": (
                self.member_connection.to_record() if self.member_connection else None
            ),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SelectedSignals":
        def load(key: str) -> SocialSignal | None:
            value = record.get(key)
            return SocialSignal.from_record(value) if value else None

        return cls(
            metadata=load("metadata"),
            paper_connection=load("paper_connection"),
            member_connection=load("member_connection"),
        )


def _norm_affiliation(text: str) -> str:
    return " ".join(text.lower().split())


# --- category I: paper metadata ----------------------------------------------


def detect_metadata_signals(paper: PaperRecord, snapshot: ChannelSnapshot) -> list[SocialSignal]:
    signals: list[SocialSignal] = []
    window = snapshot.config.heuristic_window
    engaged = snapshot.human_engaged_papers(window)

    # h1: a candidate author is a channel member (by linked author id).
    for member_id in sorted(snapshot.members):
        member = snapshot.members[member_id]
        if member.linked_author_id is None:
            continue
        for author in paper.authors:
            if author.author_id == member.linked_author_id:
                signals.append(
                    SocialSignal(
                        heuristic=Heuristic.H1_AUTHOR_IS_MEMBER,
                        score=SCORE_AUTHOR_IS_MEMBER,
                        payload={
                            "member_id": member.member_id,
                            "author_id": author.author_id,
                            "author_name": author.name,
                        },
                    )
                )

    # h2: a candidate author appears on papers the channel engaged with recently.
    for author in paper.authors:
        matched: list[PaperRef] = []
        evidence: list[int] = []
        for ref in sorted(engaged):
            record = snapshot.record_of(ref)
            if record is None or record.ref == paper.ref:
                continue
            if author.author_id in record.author_ids:
                matched.append(ref)
                evidence.extend(engaged[ref])
        if matched:
            signals.append(
                SocialSignal(
                    heuristic=Heuristic.H2_AUTHOR_ENGAGED_RECENTLY,
                    score=score_recent_author(len(matched)),
                    payload={
                        "author_id": author.author_id,
                        "author_name": author.name,
                        "count": len(matched),
                        "papers": [r.key for r in matched],
                    },
                    evidence_seqs=tuple(sorted(set(evidence))),
                )
            )

    # h3: author affiliation matches a member's declared affiliation.
    for member_id in sorted(snapshot.members):
        member = snapshot.members[member_id]
        if not member.affiliation:
            continue
        member_aff = _norm_affiliation(member.affiliation)
        for author in paper.authors:
            hit = next(
                (a for a in author.affiliations if _norm_affiliation(a) == member_aff), None
            )
            if hit is not None:
                signals.append(
                    SocialSignal(
                        heuristic=Heuristic.H3_AFFILIATION_MATCH,
                        score=SCORE_AFFILIATION_MATCH,
                        payload={
                            "member_id": member.member_id,
                            "affiliation": hit,
                            "author_name": author.name,
                        },
                    )
                )
                break

    # h4: the candidate's venue shows up on recently engaged papers.
    if paper.venue:
        matched = []
        evidence = []
        for ref in sorted(engaged):
            record = snapshot.record_of(ref)
            if record is None or record.ref == paper.ref:
                continue
            if record.venue and record.venue.lower() == paper.venue.lower():
                matched.append(ref)
                evidence.extend(engaged[ref])
        if matched:
            signals.append(
                SocialSignal(
                    heuristic=Heuristic.H4_VENUE_ENGAGED_RECENTLY,
                    score=score_recent_venue(len(matched)),
                    payload={
                        "venue": paper.venue,
                        "count": len(matched),
                        "papers": [r.key for r in matched],
                    },
                    evidence_seqs=tuple(sorted(set(evidence))),
                )
            )

    return signals


# --- category II: connections to previously shared papers --------------------


def _relation_of(paper: PaperRecord, prior: PaperRecord, tau: float) -> tuple[str, float] | None:
    """Strongest relation between candidate and prior, or None."""
    if prior.ref in paper.citations or paper.ref in prior.cited_by:
        return ("cites", SCORE_CITATION)
    if paper.ref in prior.citations or prior.ref in paper.cited_by:
        return ("cited_by", SCORE_CITATION)
    if paper.author_ids & prior.author_ids:
        return ("shared_authors", SCORE_SHARED_AUTHOR)
    if paper.embedding is not None and prior.embedding is not None:
        similarity = cosine_similarity(paper.embedding, prior.embedding)
        if similarity >= tau:
            return ("semantic", similarity)
    return None


def detect_paper_connection_signals(
    paper: PaperRecord, snapshot: ChannelSnapshot
) -> list[SocialSignal]:
    signals: list[SocialSignal] = []
    tau = snapshot.config.tau
    member_by_author = {
        m.linked_author_id: m.member_id
        for m in snapshot.members.values()
        if m.linked_author_id is not None
    }

    for ref in sorted(snapshot.papers):
        if ref == paper.ref:
            continue
        indexed = snapshot.papers[ref]
        prior = snapshot.record_of(ref)
        mention_seqs = tuple(m.seq for m in indexed.mention_posts)
        engagement_seqs = tuple(
            sorted({r.seq for r in indexed.reactions} | {c.seq for c in indexed.comments})
        )

        # h5: citation / shared-author / semantic relation to the prior paper.
        if prior is not None:
            relation = _relation_of(paper, prior, tau)
            if relation is not None:
                kind, score = relation
                shared = sorted(
                    a.name for a in paper.authors if a.author_id in prior.author_ids
                )
                payload: dict[str, Any] = {
                    "prior_paper": ref.key,
                    "relation": kind,
                    "shared_authors": shared,
                    "citation_contexts": list(paper.contexts_for(ref))
                    + list(prior.contexts_for(paper.ref)),
                }
                if kind == "semantic":
                    payload["similarity"] = score
                signals.append(
                    SocialSignal(
                        heuristic=Heuristic.H5_PRIOR_PAPER_RELATION,
                        score=score,
                        payload=payload,
                        evidence_seqs=tuple(sorted(set(mention_seqs + engagement_seqs))),
                    )
                )

        # h6: the prior paper drew replies/reactions worth mentioning. Needs
        # resolvable metadata -- the message has to name the paper.
        if prior is not None and (indexed.reactions or indexed.comments):
            reaction_count = len(indexed.reactions)
            reply_count = len(indexed.comments)
            by_emoji: dict[str, int] = {}
            for entry in indexed.reactions:
                by_emoji[entry.emoji] = by_emoji.get(entry.emoji, 0) + 1
            reactors = sorted(
                {r.actor for r in indexed.reactions} | {c.actor for c in indexed.comments}
            )
            sample = max(indexed.comments, key=lambda c: c.seq).text if indexed.comments else None
            signals.append(
                SocialSignal(
                    heuristic=Heuristic.H6_PRIOR_PAPER_ENGAGEMENT,
                    score=score_engagement(reaction_count + reply_count),
                    payload={
                        "prior_paper": ref.key,
                        "reply_count": reply_count,
                        "reaction_count": reaction_count,
                        "reaction_counts": {k: by_emoji[k] for k in sorted(by_emoji)},
                        "reactors": reactors,
                        "sample_comment": sample,
                    },
                    evidence_seqs=engagement_seqs,
                )
            )

        # h7: the prior paper was authored by a channel member.
        if prior is not None:
            for author_id in sorted(prior.author_ids):
                member_id = member_by_author.get(author_id)
                if member_id is not None:
                    signals.append(
                        SocialSignal(
                            heuristic=Heuristic.H7_PRIOR_PAPER_BY_MEMBER,
                            score=SCORE_MEMBER_AUTHORED_PRIOR,
                            payload={
                                "prior_paper": ref.key,
                                "member_id": member_id,
                                "author_id": author_id,
                            },
                            evidence_seqs=mention_seqs,
                        )
                    )

    return signals


# --- category III: connections to members -------------------------------------


def detect_member_signals(paper: PaperRecord, snapshot: ChannelSnapshot) -> list[SocialSignal]:
    signals: list[SocialSignal] = []
    tau = snapshot.config.tau

    for member_id in sorted(snapshot.members):
        member = snapshot.members[member_id]
        if member_id == snapshot.bot_actor:
            continue
        interests = snapshot.member_interest_papers(member_id)

        similar: list[tuple[float, PaperRef, list[int]]] = []
        by_author: list[tuple[PaperRef, list[int]]] = []
        by_venue: list[tuple[PaperRef, list[int]]] = []
        for ref in sorted(interests):
            record = snapshot.record_of(ref)
            if record is None or record.ref == paper.ref:
                continue
            evidence = interests[ref]
            if paper.embedding is not None and record.embedding is not None:
                similarity = cosine_similarity(paper.embedding, record.embedding)
                if similarity >= tau:
                    similar.append((similarity, ref, evidence))
            if record.author_ids & paper.author_ids:
                by_author.append((ref, evidence))
            if record.venue and paper.venue and record.venue.lower() == paper.venue.lower():
                by_venue.append((ref, evidence))

        # h8: the member's interest profile contains something similar enough.
        if similar:
            best_score, best_ref, best_evidence = max(
                similar, key=lambda item: (item[0], item[1].key)
            )
            signals.append(
                SocialSignal(
                    heuristic=Heuristic.H8_MEMBER_INTEREST_SIMILARITY,
                    score=best_score,
                    payload={
                        "member_id": member_id,
                        "similarity": best_score,
                        "interest_paper": best_ref.key,
                    },
                    evidence_seqs=tuple(best_evidence),
                )
            )

        # h9 named variants. "Several ..." variants need >= SEVERAL backing papers.
        if len(similar) >= SEVERAL:
            best_score, best_ref, _ = max(similar, key=lambda item: (item[0], item[1].key))
            evidence = sorted({s for _, _, ev in similar for s in ev})
            signals.append(
                _variant_signal(
                    member_id,
                    InterestVariant.LIKED_SIMILAR,
                    best_score,
                    best_ref,
                    evidence,
                    {"count": len(similar), "similarity": best_score},
                )
            )
        if len(by_author) >= SEVERAL:
            liked_author_ids: set[str] = set()
            for ref, _ in by_author:
                record = snapshot.record_of(ref)
                if record is not None:
                    liked_author_ids |= record.author_ids & paper.author_ids
            names = sorted(a.name for a in paper.authors if a.author_id in liked_author_ids)
            evidence = sorted({s for _, ev in by_author for s in ev})
            signals.append(
                _variant_signal(
                    member_id,
                    InterestVariant.LIKED_AUTHOR,
                    SCORE_LIKED_AUTHOR,
                    by_author[0][0],
                    evidence,
                    {"count": len(by_author), "author_names": names},
                )
            )
        if len(by_venue) >= SEVERAL:
            evidence = sorted({s for _, ev in by_venue for s in ev})
            signals.append(
                _variant_signal(
                    member_id,
                    InterestVariant.LIKED_VENUE,
                    SCORE_LIKED_VENUE,
                    by_venue[0][0],
                    evidence,
                    {"count": len(by_venue), "venue": paper.venue},
                )
            )

        # Own-publication variants: the member's linked scholarly identity, as
        # visible through indexed papers they authored.
        if member.linked_author_id is not None and member.linked_author_id not in paper.author_ids:
            own_similarity = 0.0
            own_shared = False
            own_best: PaperRef | None = None
            cite_link: PaperRef | None = None
            cite_evidence: list[int] = []
            for ref in sorted(snapshot.papers):
                record = snapshot.record_of(ref)
                if record is None or ref == paper.ref:
                    continue
                if member.linked_author_id not in record.author_ids:
                    continue
                own_mentions = [m.seq for m in snapshot.papers[ref].mention_posts]
                if record.author_ids & paper.author_ids:
                    own_shared = True
                    own_best = own_best or ref
                if paper.embedding is not None and record.embedding is not None:
                    similarity = cosine_similarity(paper.embedding, record.embedding)
                    if similarity >= tau and similarity > own_similarity:
                        own_similarity = similarity
                        own_best = ref
                if cite_link is None and (
                    ref in paper.citations
                    or paper.ref in record.citations
                    or paper.ref in record.cited_by
                    or ref in paper.cited_by
                ):
                    cite_link = ref
                    cite_evidence = own_mentions
            if own_best is not None:
                score = max(
                    own_similarity, SCORE_OWN_PUBLICATION_SHARED_AUTHOR if own_shared else 0.0
                )
                extra: dict[str, Any] = {}
                if own_similarity:
                    extra["similarity"] = own_similarity
                signals.append(
                    _variant_signal(
                        member_id, InterestVariant.OWN_PUBLICATIONS, score, own_best, [], extra
                    )
                )
            if cite_link is not None:
                signals.append(
                    _variant_signal(
                        member_id,
                        InterestVariant.CITES_SIMILAR,
                        SCORE_CITES_LINK,
                        cite_link,
                        cite_evidence,
                        {},
                    )
                )

    return signals


def _variant_signal(
    member_id: str,
    variant: InterestVariant,
    score: float,
    interest_paper: PaperRef,
    evidence: Iterable[int],
    extra: Mapping[str, Any],
) -> SocialSignal:
    payload: dict[str, Any] = {
        "member_id": member_id,
        "variant": variant.value,
        "interest_paper": interest_paper.key,
    }
    payload.update({k: v for k, v in extra.items() if v is not None})
    return SocialSignal(
        heuristic=Heuristic.H9_MEMBER_RELATION_VARIANT,
        score=score,
        payload=payload,
        evidence_seqs=tuple(evidence),
    )


def detect_all_signals(paper: PaperRecord, snapshot: ChannelSnapshot) -> list[SocialSignal]:
    return (
        detect_metadata_signals(paper, snapshot)
        + detect_paper_connection_signals(paper, snapshot)
        + detect_member_signals(paper, snapshot)
    )


def rank_and_select(signals: Iterable[SocialSignal]) -> SelectedSignals:
    """Keep the best signal per category, at most three overall.

    Within a category the winner has the highest score; ties break toward more
    evidence, then more recent evidence, then the lower heuristic number, then
    a stable payload key, so selection is insensitive to input order.
    """
    pool = list(signals)

    def sort_key(signal: SocialSignal) -> tuple:
        return (
            -signal.score,
            -len(signal.evidence_seqs),
            -(max(signal.evidence_seqs) if signal.evidence_seqs else 0),
            signal.heuristic.number,
            signal.identity()[1],
        )

    best: dict[Category, SocialSignal] = {}
    for category in Category:
        candidates = [s for s in pool if s.category is category]
        if candidates:
            best[category] = min(candidates, key=sort_key)
    return SelectedSignals(
        metadata=best.get(Category.METADATA),
        paper_connection=best.get(Category.PAPER_CONNECTION),
        member_connection=best.get(Category.MEMBER_CONNECTION),
    )

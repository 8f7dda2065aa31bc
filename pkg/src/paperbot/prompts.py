"""Prompt-chain construction for socially grounded recommendation messages.

A chain has up to four stages. The first three each turn one selected signal
into a focused writing task (paper metadata, relation to a previously shared
paper, relation to a member's interests); the final synthesis stage compresses
their outputs into one short chat message under hard content constraints.
Stage texts are fully instantiated here: downstream only substitutes the
earlier stage outputs into the synthesis stage's ``{chain_outputs}`` slot.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .clients import PaperRecord
from .config import CharLimits
from .errors import InvalidInputError
from .knowledge import ChannelSnapshot, IndexedPaper
from .refs import PaperRef
from .signals import Heuristic, SelectedSignals, SocialSignal

__all__ = ["StageKind", "PromptSpec", "PromptChain", "CHAIN_OUTPUTS_SLOT", "build_prompt_chain"]

CHAIN_OUTPUTS_SLOT = "{chain_outputs}"

# A leftover instantiation hole would look like [THIS].
_RESIDUAL_PLACEHOLDER_RE = re.compile(r"\[[A-Z][A-Z0-9_]*\]")

_SYSTEM_LINE = "You are a helpful assistant for paper summarization."


class StageKind(str, Enum):
    P1_METADATA = "p1_metadata"
    P2_PRIOR_PAPER = "p2_prior_paper"
    P3_MEMBER = "p3_member"
    P4_SYNTHESIS = "p4_synthesis"


@dataclass(frozen=True)
class PromptSpec:
    kind: StageKind
    template_text: str
    char_limit: int
    required_strings: tuple[str, ...] = ()
    forbidden_bold_strings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PromptChain:
    stages: tuple[PromptSpec, ...]

    def __post_init__(self) -> None:
        kinds = [stage.kind for stage in self.stages]
        if len(set(kinds)) != len(kinds):
            raise InvalidInputError("duplicate stage kinds in chain")
        if not kinds or kinds[-1] is not StageKind.P4_SYNTHESIS:
            raise InvalidInputError("chain must end with the synthesis stage")
        for stage in self.stages:
            body = stage.template_text
            if stage.kind is StageKind.P4_SYNTHESIS:
                if CHAIN_OUTPUTS_SLOT not in body and len(self.stages) > 1:
                    raise InvalidInputError("synthesis stage lost its outputs slot")
                body = body.replace(CHAIN_OUTPUTS_SLOT, "")
            residue = _RESIDUAL_PLACEHOLDER_RE.findall(body)
            if residue:
                raise InvalidInputError(f"unsubstituted placeholders in {stage.kind}: {residue}")

    @property
    def synthesis(self) -> PromptSpec:
        return self.stages[-1]

    def stage(self, kind: StageKind) -> PromptSpec | None:
        return next((s for s in self.stages if s.kind is kind), None)


def _names(paper: PaperRecord) -> str:
    return ", ".join(a.name for a in paper.authors) or "(unknown)"


def _member_handle(snapshot: ChannelSnapshot, member_id: str) -> str:
    member = snapshot.members.get(member_id)
    return "@" + (member.display_name if member else member_id)


def _record_or_fail(snapshot: ChannelSnapshot, key: str) -> PaperRecord:
    ref = PaperRef.parse(key)
    record = snapshot.record_of(ref)
    if record is None:
        raise InvalidInputError(f"no metadata available for {ref}; cannot build prompt")
    return record


def _build_metadata_stage(
    paper: PaperRecord, signal: SocialSignal, snapshot: ChannelSnapshot, limit: int
) -> PromptSpec:
    directives: list[str] = []
    payload = signal.payload
    if signal.heuristic is Heuristic.H1_AUTHOR_IS_MEMBER:
        handle = _member_handle(snapshot, str(payload["member_id"]))
        directives.append(f"* Congratulate the following authors: {handle}.")
    elif signal.heuristic is Heuristic.H2_AUTHOR_ENGAGED_RECENTLY:
        directives.append(f"* Mention the following authors: {payload['author_name']}.")
    elif signal.heuristic is Heuristic.H3_AFFILIATION_MATCH:
        directives.append(f"* Mention the affiliation: {payload['affiliation']}.")
    elif signal.heuristic is Heuristic.H4_VENUE_ENGAGED_RECENTLY:
        directives.append(f"* Mention the paper's conference or journal: {payload['venue']}.")
    lines = [
        _SYSTEM_LINE,
        "The paper has the following details:",
        f"* Title: {paper.title}",
        f"* Abstract: {paper.abstract or paper.title}",
        f"* Authors: {_names(paper)}",
        "In your summarization, you must",
        *directives,
        f"* Keep your output less than {limit} characters.",
        "* Be informative.",
        "* If applicable, be specific about the numbers in the abstract that may refer to the"
        " proposed method's performance.",
    ]
    return PromptSpec(kind=StageKind.P1_METADATA, template_text="\n".join(lines), char_limit=limit)


def _engagement_lines(
    prior: PaperRecord, indexed: IndexedPaper, snapshot: ChannelSnapshot
) -> list[str]:
    sharer_post = snapshot.sharer_of(prior.ref)
    if sharer_post is None or not (indexed.reactions or indexed.comments):
        return []
    shared_by_member = sharer_post.actor != snapshot.bot_actor
    comments = "; ".join(c.text for c in indexed.comments) or "(none)"
    reactions = ", ".join(r.emoji for r in indexed.reactions) or "(none)"
    lines = []
    if shared_by_member:
        handle = _member_handle(snapshot, sharer_post.actor)
        share_event = snapshot.event_by_seq(sharer_post.seq)
        share_text = str(share_event.payload.get("text", "")) or "(link only)"
        lines.append(f"The message from {handle} who shared {prior.title}: {share_text}")
    else:
        lines.append(f"{prior.title} was shared earlier in this channel.")
    lines += [
        f"People's comments about {prior.title}: {comments}",
        f"People's reactions about {prior.title}: {reactions}",
        "The second paragraph of your answer should specify what people think about"
        f" {prior.title} and who these people are. Be informative.",
        "* In this second paragraph of your answer, you must start with"
        f' "thoughts about {prior.title}".',
    ]
    if shared_by_member:
        handle = _member_handle(snapshot, sharer_post.actor)
        lines.append(
            f"* In this second paragraph of your answer, you must appreciate that {handle}"
            f" shared {prior.title}."
        )
    lines.append(
        "* In this second paragraph of your answer, you must NOT add in-line citations and"
        " citation numbers."
    )
    return lines


def _build_prior_paper_stage(
    paper: PaperRecord, signal: SocialSignal, snapshot: ChannelSnapshot, limit: int
) -> PromptSpec:
    payload = signal.payload
    prior = _record_or_fail(snapshot, str(payload["prior_paper"]))
    indexed = snapshot.papers[prior.ref]

    lines = [
        "You are a helpful assistant.",
        f"Title: {paper.title}",
        f"Abstract: {paper.abstract or paper.title}",
        f"Title: {prior.title}",
        f"Abstract: {prior.abstract or prior.title}",
        "The first paragraph of your answer should explain and specify the relationship"
        f" between {paper.title} and {prior.title}. Be informative.",
        "* In this first paragraph of your answer, you must explain and specify how"
        f" {paper.title} is related to {prior.title} in one short sentence.",
        "* In this first paragraph of your answer, you must start with"
        f' "This paper might be related to {prior.title} because".',
    ]
    relation = payload.get("relation")
    contexts = [str(c) for c in payload.get("citation_contexts", ())]
    if relation in ("cites", "cited_by") and contexts:
        citing, cited = (paper.title, prior.title) if relation == "cites" else (prior.title, paper.title)
        lines.append(
            f"* In this first paragraph of your answer, you must specify how {citing} cites"
            f" {cited} in one short sentence. The content from {citing} that cites {cited}:"
            f" {' '.join(contexts)}"
        )
    shared_authors = [str(name) for name in payload.get("shared_authors", ())]
    if shared_authors:
        lines.append(
            "* In this first paragraph of your answer, you must mention the following"
            f" shared authors of the two papers: {', '.join(shared_authors)}."
        )
    if signal.heuristic is Heuristic.H7_PRIOR_PAPER_BY_MEMBER:
        handle = _member_handle(snapshot, str(payload["member_id"]))
        lines.append(
            f"* In this first paragraph of your answer, you must mention that {prior.title}"
            f" was authored by channel member {handle}."
        )
    lines.append(f"* The first paragraph should have no more than {limit} characters.")
    engagement = _engagement_lines(prior, indexed, snapshot)
    lines.extend(engagement)
    if engagement:
        lines.append(f"* The second paragraph should have no more than {limit} characters.")
    lines.append(f'Your answer should replace {paper.title} with "this paper".')
    return PromptSpec(kind=StageKind.P2_PRIOR_PAPER, template_text="\n".join(lines), char_limit=limit)


def _build_member_stage(
    paper: PaperRecord, signal: SocialSignal, snapshot: ChannelSnapshot, limit: int
) -> PromptSpec:
    payload = signal.payload
    interest = _record_or_fail(snapshot, str(payload["interest_paper"]))
    handle = _member_handle(snapshot, str(payload["member_id"]))

    reason = "their interests in the channel suggest a close match"
    variant = payload.get("variant")
    if variant == "liked_similar":
        reason = "they have liked several similar papers in the channel"
    elif variant == "liked_author":
        names = ", ".join(payload.get("author_names", ())) or "this author"
        reason = f"they have liked several of {names}'s papers in the channel"
    elif variant == "liked_venue":
        reason = f"they have liked several {payload.get('venue', 'related')} papers in the channel"
    elif variant == "own_publications_similar":
        reason = "several of their publications are similar"
    elif variant == "cites_similar":
        reason = "they have cited similar papers before"

    lines = [
        "You are a helpful assistant in finding the relationships between two papers.",
        f"Title: {paper.title}",
        f"Abstract: {paper.abstract or paper.title}",
        f"Title: {interest.title}",
        f"Abstract: {interest.abstract or interest.title}",
        f"Your answer should explain and specify how {paper.title} is related to and"
        f" different from {interest.title} with no more than {limit} characters."
        ' If two papers are irrelevant, you should answer "NONE".'
        f" Your answer must start with \"This paper is related to '{interest.title}'"
        ' because both papers". Be informative.',
        f"* In your answer, you must note this may interest {handle} because {reason}.",
    ]
    return PromptSpec(kind=StageKind.P3_MEMBER, template_text="\n".join(lines), char_limit=limit)


def _build_synthesis_stage(
    paper: PaperRecord,
    selected: SelectedSignals,
    snapshot: ChannelSnapshot,
    limit: int,
    standalone: bool,
) -> PromptSpec:
    required: list[str] = []
    forbidden_bold: list[str] = [paper.title]
    prior_title: str | None = None

    if selected.paper_connection is not None:
        prior = _record_or_fail(snapshot, str(selected.paper_connection.payload["prior_paper"]))
        prior_title = prior.title
        required.append(prior.title)
        forbidden_bold.append(prior.title)
    if selected.member_connection is not None:
        interest = _record_or_fail(
            snapshot, str(selected.member_connection.payload["interest_paper"])
        )
        handle = _member_handle(
            snapshot, str(selected.member_connection.payload["member_id"])
        )
        required.append(interest.title)
        required.append(handle)
        forbidden_bold.append(interest.title)
        forbidden_bold.append(handle)
    if selected.metadata is not None and selected.metadata.heuristic is Heuristic.H1_AUTHOR_IS_MEMBER:
        forbidden_bold.append(
            _member_handle(snapshot, str(selected.metadata.payload["member_id"]))
        )

    lines = [_SYSTEM_LINE]
    if standalone:
        lines += [
            "The paper has the following details:",
            f"* Title: {paper.title}",
            f"* Abstract: {paper.abstract or paper.title}",
            f"First, you are required to summarize the paper with no more than {limit}"
            " characters. Note that:",
        ]
    else:
        lines += [
            CHAIN_OUTPUTS_SLOT,
            f"First, you are required to shorten the above content with no more than {limit}"
            " characters. Note that:",
        ]
    for req in required:
        lines.append(f'- The shortened content must contain the following strings: "{req}".')
    if prior_title is not None:
        lines.append(
            "- Two papers are mentioned in the content above. When you specify people's"
            f" reactions or comments about {prior_title}, you should focus more on who"
            " reacted or commented and how these reactions or comments infer the potential"
            " reactions or comments about another paper based on the two papers'"
            f" similarities than people's reactions or comments about {prior_title}."
        )
    lines += [
        "- Do not remove any person's name (with or without '@'), institution's name,"
        " number, and conference/journal's name.",
        "- Do not change the content's tone when it is low-confidence.",
        "Second, you are required to bold at most three key phrases of the shortened"
        " content by adding ONE '*' to the left of the bolded text and ONE '*' to the"
        " right of the bolded text.",
        "You should only bold the following text:",
        "- The text tells what a paper is about.",
        "- The text explains why a paper might be related to another paper or why a user"
        " might be interested in a paper, which is often after (does not include) the"
        ' keywords such as "because" and "due to".',
        "You should not bold the following text:",
    ]
    for item in forbidden_bold:
        lines.append(f"- {item}")
    return PromptSpec(
        kind=StageKind.P4_SYNTHESIS,
        template_text="\n".join(lines),
        char_limit=limit,
        required_strings=tuple(required),
        forbidden_bold_strings=tuple(forbidden_bold),
    )


def build_prompt_chain(
    paper: PaperRecord,
    selected: SelectedSignals,
    limits: CharLimits,
    snapshot: ChannelSnapshot,
) -> PromptChain:
    """Instantiate the stage prompts for a candidate and its selected signals.

    Stages for absent categories are omitted; with no signals at all the chain
    degenerates to a single summary-form synthesis stage.
    """
    stages: list[PromptSpec] = []
    if selected.metadata is not None:
        stages.append(
            _build_metadata_stage(paper, selected.metadata, snapshot, limits.metadata)
        )
    if selected.paper_connection is not None:
        stages.append(
            _build_prior_paper_stage(
                paper, selected.paper_connection, snapshot, limits.prior_paper
            )
        )
    if selected.member_connection is not None:
        stages.append(
            _build_member_stage(paper, selected.member_connection, snapshot, limits.member)
        )
    stages.append(
        _build_synthesis_stage(
            paper, selected, snapshot, limits.synthesis, standalone=not stages
        )
    )
    return PromptChain(stages=tuple(stages))

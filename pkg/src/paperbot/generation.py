"""Turning selected signals into a postable chat message.

The pipeline is: run the prompt chain (retrying while hard constraints fail),
then assemble the raw text into message markup -- mention tokens subject to
the per-channel cooldown, exactly one thread link when a prior-paper signal is
present, bold spans capped and kept off titles and names -- and attach the
structured metadata block and provenance. Hard constraints (required strings,
length) are enforced by retry; formatting rules are enforced mechanically at
assembly and merely reported by validation.
"""
from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .clients import CompletionClient, CompletionRequest, PaperRecord
from .config import CharLimits
from .errors import GenerationFailedError, InvalidInputError
from .knowledge import ChannelSnapshot
from .markup import (
    BOLD_RE,
    LINK_RE,
    bold_spans,
    link_token,
    link_tokens,
    mention_token,
    mentioned_ids,
    plain_text,
)
from .prompts import CHAIN_OUTPUTS_SLOT, PromptChain, StageKind, build_prompt_chain
from .refs import PaperRef, ref_url
from .signals import Heuristic, SelectedSignals, SocialSignal

__all__ = [
    "Condition",
    "BotMessage",
    "ChainRun",
    "MessageConstraints",
    "RuleCheck",
    "ValidationReport",
    "MAX_BOLD_SPANS",
    "DEFAULT_MAX_RETRIES",
    "derive_seed",
    "tldr_text",
    "execute_chain",
    "run_chain",
    "run_chain_detailed",
    "assemble_message",
    "constraints_for",
    "validate_message",
    "render_condition",
    "generate_message",
]

logger = logging.getLogger(__name__)

MAX_BOLD_SPANS = 3
DEFAULT_MAX_RETRIES = 2
CONDITION_SEPARATOR = "\n\n"
TLDR_BUDGET = 300

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


class Condition(str, Enum):
    """Message composition conditions, from bare summary to full synthesis."""

    C1_TLDR = "c1_tldr"
    C2_TEMPLATE = "c2_template"
    C3_TEMPLATE_TLDR = "c3_template_tldr"
    C4_SYNTHESIS = "c4_synthesis"


def derive_seed(*parts: object) -> int:
    """Stable sub-seed derivation (independent of PYTHONHASHSEED)."""
    joined = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big")


@dataclass(frozen=True)
class BotMessage:
    body: str
    paper_ref: PaperRef
    metadata_block: Mapping[str, Any]
    provenance: SelectedSignals
    condition: Condition

    def to_record(self) -> dict[str, Any]:
        return {
            "body": self.body,
            "paper_ref": self.paper_ref.key,
            "metadata_block": dict(self.metadata_block),
            "provenance": self.provenance.to_record(),
            "condition": self.condition.value,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "BotMessage":
        return cls(
            body=str(record["body"]),
            paper_ref=PaperRef.parse(record["paper_ref"]),
            metadata_block=dict(record["metadata_block"]),
            provenance=SelectedSignals.from_record(record.get("provenance") or {}),
            condition=Condition(record["condition"]),
        )


@dataclass(frozen=True)
class ChainRun:
    stage_outputs: Mapping[StageKind, str]
    final_text: str


@dataclass(frozen=True)
class RuleCheck:
    rule_id: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[RuleCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> tuple[RuleCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def failed_rules(self) -> list[str]:
        return [c.rule_id for c in self.violations]


@dataclass(frozen=True)
class MessageConstraints:
    max_bold_spans: int = MAX_BOLD_SPANS
    max_body_chars: int | None = None
    required_strings: tuple[str, ...] = ()
    forbidden_bold: tuple[str, ...] = ()
    suppressed_members: frozenset[str] = frozenset()
    expected_link: tuple[str, str] | None = None  # (url, title) of the prior thread
    field_order: tuple[str, ...] = field(default=(), repr=False)


def tldr_text(paper: PaperRecord, budget: int = TLDR_BUDGET) -> str:
    """Deterministic extractive summary: leading abstract sentences within budget."""
    if not paper.abstract:
        return paper.title
    out = ""
    for sentence in _SENTENCE_SPLIT_RE.split(paper.abstract.strip()):
        candidate = f"{out} {sentence}".strip()
        if len(candidate) > budget:
            break
        out = candidate
    if not out:
        out = paper.abstract.strip()[: budget - 1].rstrip() + "…"
    return out


# --- chain execution ----------------------------------------------------------


def execute_chain(chain: PromptChain, completion: CompletionClient, seed: int = 0) -> ChainRun:
    """Run every stage once, feeding earlier outputs into the synthesis slot.

    A stage that answers exactly ``NONE`` (the irrelevance escape) contributes
    nothing to the synthesis input.
    """
    outputs: dict[StageKind, str] = {}
    parts: list[str] = []
    for stage in chain.stages[:-1]:
        text = completion.complete(CompletionRequest(stage.template_text, stage.char_limit, seed))
        outputs[stage.kind] = text
        if text.strip() != "NONE":
            parts.append(text)
    synthesis = chain.synthesis
    prompt = synthesis.template_text.replace(CHAIN_OUTPUTS_SLOT, "\n\n".join(parts))
    final = completion.complete(CompletionRequest(prompt, synthesis.char_limit, seed))
    outputs[synthesis.kind] = final
    return ChainRun(stage_outputs=outputs, final_text=final)


def _hard_violations(text: str, chain: PromptChain) -> list[str]:
    synthesis = chain.synthesis
    issues = []
    if len(text) > synthesis.char_limit:
        issues.append(f"length {len(text)} > {synthesis.char_limit}")
    for req in synthesis.required_strings:
        if req not in text:
            issues.append(f"missing required string {req!r}")
    return issues


def run_chain_detailed(
    chain: PromptChain,
    completion: CompletionClient,
    seed: int = 0,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> ChainRun:
    issues: list[str] = []
    for attempt in range(max_retries + 1):
        attempt_seed = seed if attempt == 0 else derive_seed(seed, "retry", attempt)
        run = execute_chain(chain, completion, attempt_seed)
        issues = _hard_violations(run.final_text, chain)
        if not issues:
            return run
        logger.info("chain attempt %d violated hard constraints: %s", attempt + 1, issues)
    raise GenerationFailedError(
        f"hard constraints unmet after {max_retries + 1} attempts: {issues}"
    )


def run_chain(
    chain: PromptChain,
    completion: CompletionClient,
    seed: int = 0,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> str:
    return run_chain_detailed(chain, completion, seed, max_retries).final_text


# --- assembly -----------------------------------------------------------------


def _title_of(snapshot: ChannelSnapshot, key: str) -> str:
    ref = PaperRef.parse(key)
    record = snapshot.record_of(ref)
    return record.title if record is not None else ref.key


def _prior_link(selected: SelectedSignals, snapshot: ChannelSnapshot) -> tuple[str, str] | None:
    """(url, title) of the thread that shared the selected prior paper."""
    if selected.paper_connection is None:
        return None
    ref = PaperRef.parse(str(selected.paper_connection.payload["prior_paper"]))
    title = _title_of(snapshot, ref.key)
    mention = snapshot.sharer_of(ref)
    if mention is None:
        return None
    return (snapshot.permalink(mention.seq), title)


def _forbidden_bold(
    paper: PaperRecord, selected: SelectedSignals, snapshot: ChannelSnapshot
) -> list[str]:
    forbidden = [paper.title]
    if selected.paper_connection is not None:
        forbidden.append(
            _title_of(snapshot, str(selected.paper_connection.payload["prior_paper"]))
        )
    if selected.member_connection is not None:
        forbidden.append(
            _title_of(snapshot, str(selected.member_connection.payload["interest_paper"]))
        )
    for signal in selected.signals():
        member_id = signal.payload.get("member_id")
        if member_id and member_id in snapshot.members:
            forbidden.append("@" + snapshot.members[str(member_id)].display_name)
    seen: set[str] = set()
    return [f for f in forbidden if not (f in seen or seen.add(f))]


def _normalize_bolds(body: str, forbidden: list[str], max_spans: int) -> str:
    """Unwrap forbidden or excess bold spans; keep at most ``max_spans``."""
    kept = 0

    def replace(match: re.Match[str]) -> str:
        nonlocal kept
        span = match.group(1)
        resolved = LINK_RE.sub(lambda m: m.group(2), span)
        if any(f in resolved for f in forbidden) or kept >= max_spans:
            logger.warning("unwrapping bold span %r (format normalization)", span)
            return span
        kept += 1
        return match.group(0)

    return BOLD_RE.sub(replace, body)


def _tokenize_mentions(
    body: str, snapshot: ChannelSnapshot, suppressed: frozenset[str]
) -> str:
    """Replace the first ``@DisplayName`` per member with a mention token,
    or with plain text when the member is under cooldown."""
    members = sorted(
        snapshot.members.values(), key=lambda m: len(m.display_name), reverse=True
    )
    for member in members:
        pattern = re.compile(rf"(?<!<)@{re.escape(member.display_name)}(?![\w])")
        if member.member_id in suppressed:
            replacement = member.display_name
            suffix = " (mention suppressed by cooldown)"
        else:
            replacement = mention_token(member.member_id)
            suffix = ""
        body, count = pattern.subn(replacement, body, count=1)
        if count and suffix:
            logger.info("rendering %s as plain text%s", member.display_name, suffix)
    for leftover in re.finditer(r"(?<!<)@([A-Za-z0-9_](?:[\w.\-]*[A-Za-z0-9_])?)", body):
        name = leftover.group(1)
        if name not in {m.display_name for m in snapshot.members.values()}:
            logger.warning("unresolvable member name @%s rendered as plain text", name)
    return body


def _insert_thread_link(body: str, url: str, title: str) -> str:
    index = body.find(title)
    if index < 0:
        logger.warning("prior-paper title %r absent from body; no thread link inserted", title)
        return body
    return body[:index] + link_token(url, title) + body[index + len(title) :]


def metadata_block_for(paper: PaperRecord) -> dict[str, Any]:
    return {
        "title": paper.title,
        "authors": [a.name for a in paper.authors],
        "venue": paper.venue,
        "year": paper.year,
        "url": ref_url(paper.ref),
    }


def assemble_message(
    raw: str,
    selected: SelectedSignals,
    paper: PaperRecord,
    snapshot: ChannelSnapshot,
    condition: Condition = Condition.C4_SYNTHESIS,
) -> BotMessage:
    """Convert raw generated text into a posting-ready message.

    Deterministic and total: formatting rules that the generator may have
    violated (bold caps, bolded titles) are normalized here rather than
    retried; mention tokens honor the channel cooldown.
    """
    suppressed = frozenset(snapshot.suppressed_members())
    body = _normalize_bolds(raw, _forbidden_bold(paper, selected, snapshot), MAX_BOLD_SPANS)
    body = _tokenize_mentions(body, snapshot, suppressed)
    link = _prior_link(selected, snapshot)
    if link is not None:
        body = _insert_thread_link(body, link[0], link[1])
    return BotMessage(
        body=body,
        paper_ref=paper.ref,
        metadata_block=metadata_block_for(paper),
        provenance=selected,
        condition=condition,
    )


def constraints_for(
    paper: PaperRecord,
    selected: SelectedSignals,
    snapshot: ChannelSnapshot,
    condition: Condition = Condition.C4_SYNTHESIS,
    limits: CharLimits | None = None,
) -> MessageConstraints:
    limits = limits or snapshot.config.char_limits
    suppressed = frozenset(snapshot.suppressed_members())
    required: list[str] = []
    if condition is Condition.C4_SYNTHESIS:
        if selected.paper_connection is not None:
            required.append(
                _title_of(snapshot, str(selected.paper_connection.payload["prior_paper"]))
            )
        if selected.member_connection is not None:
            required.append(
                _title_of(snapshot, str(selected.member_connection.payload["interest_paper"]))
            )
            member_id = str(selected.member_connection.payload["member_id"])
            member = snapshot.members.get(member_id)
            name = member.display_name if member else member_id
            # Cooldown demotes the mention-token requirement to the bare name.
            required.append(name if member_id in suppressed else f"@{name}")
    return MessageConstraints(
        max_bold_spans=MAX_BOLD_SPANS,
        max_body_chars=limits.synthesis if condition is Condition.C4_SYNTHESIS else None,
        required_strings=tuple(required),
        forbidden_bold=tuple(_forbidden_bold(paper, selected, snapshot)),
        suppressed_members=suppressed,
        expected_link=_prior_link(selected, snapshot),
    )


def validate_message(
    message: BotMessage,
    constraints: MessageConstraints,
    snapshot: ChannelSnapshot,
) -> ValidationReport:
    checks: list[RuleCheck] = []
    names = snapshot.display_names()
    projection = plain_text(message.body, names)
    spans = bold_spans(message.body)
    tokens = mentioned_ids(message.body)

    checks.append(
        RuleCheck(
            "bold_count",
            len(spans) <= constraints.max_bold_spans,
            f"{len(spans)} spans",
        )
    )
    bad_bold = [
        (f, s) for s in spans for f in constraints.forbidden_bold if f in s
    ]
    checks.append(RuleCheck("forbidden_bold", not bad_bold, str(bad_bold)))
    if constraints.max_body_chars is not None:
        checks.append(
            RuleCheck(
                "length",
                len(projection) <= constraints.max_body_chars,
                f"{len(projection)} > {constraints.max_body_chars}" if len(projection) > constraints.max_body_chars else f"{len(projection)} chars",
            )
        )
    for req in constraints.required_strings:
        checks.append(RuleCheck(f"required:{req}", req in projection, ""))
    unknown = [t for t in tokens if t not in names]
    checks.append(RuleCheck("mention_resolvable", not unknown, str(unknown)))
    cooled = [t for t in tokens if t in constraints.suppressed_members]
    checks.append(RuleCheck("mention_cooldown", not cooled, str(cooled)))
    duplicated = [t for t in set(tokens) if tokens.count(t) > 1]
    checks.append(RuleCheck("mention_once", not duplicated, str(duplicated)))
    links = link_tokens(message.body)
    if constraints.expected_link is not None:
        url, _title = constraints.expected_link
        checks.append(
            RuleCheck(
                "thread_link",
                len(links) == 1 and links[0][0] == url,
                f"links={links}",
            )
        )
    else:
        checks.append(RuleCheck("thread_link", not links, f"links={links}"))
    return ValidationReport(checks=tuple(checks))


# --- template conditions ------------------------------------------------------


def _plural(count: int, noun: str) -> str:
    return f"{count} {noun}" + ("" if count == 1 else "s")


def _window_phrase(days: int) -> str:
    return "3 months" if days == 90 else f"{days} days"


def _handle_for(snapshot: ChannelSnapshot, member_id: str) -> str:
    member = snapshot.members.get(member_id)
    return "@" + (member.display_name if member else member_id)


def _template_sentence(signal: SocialSignal, snapshot: ChannelSnapshot) -> str:
    p = signal.payload
    h = signal.heuristic
    if h is Heuristic.H1_AUTHOR_IS_MEMBER:
        return f"Congrats {_handle_for(snapshot, str(p['member_id']))}!"
    if h is Heuristic.H2_AUTHOR_ENGAGED_RECENTLY:
        window = _window_phrase(snapshot.config.heuristic_window_days)
        return (
            f"{p['author_name']} also authored {_plural(int(p['count']), 'paper')} discussed"
            f" in the channel in the past {window}."
        )
    if h is Heuristic.H3_AFFILIATION_MATCH:
        return f"A paper from {p['affiliation']}."
    if h is Heuristic.H4_VENUE_ENGAGED_RECENTLY:
        return f"You've reacted positively to other papers from {p['venue']}."
    if h in (Heuristic.H5_PRIOR_PAPER_RELATION, Heuristic.H6_PRIOR_PAPER_ENGAGEMENT):
        ref = PaperRef.parse(str(p["prior_paper"]))
        title = _title_of(snapshot, ref.key)
        mention = snapshot.sharer_of(ref)
        if mention is None:
            shared_by = ""
        elif mention.actor == snapshot.bot_actor:
            shared_by = " (shared earlier in this channel)"
        else:
            shared_by = f" ({_handle_for(snapshot, mention.actor)} shared in a thread)"
        if h is Heuristic.H6_PRIOR_PAPER_ENGAGEMENT:
            return (
                f"{title}{shared_by} received {_plural(int(p['reply_count']), 'reply')} and"
                f" {_plural(int(p['reaction_count']), 'reaction')}."
            )
        relation = p.get("relation")
        if relation == "cites":
            contexts = list(p.get("citation_contexts", ()))
            tail = f" — {contexts[0]}" if contexts else ""
            return f"Cites: {title}{shared_by}{tail}"
        if relation == "cited_by":
            return f"Cited by: {title}{shared_by}"
        if relation == "shared_authors":
            names = ", ".join(p.get("shared_authors", ())) or "authors in common"
            return f"Shared authors with {title}{shared_by}: {names}."
        return f"Related paper: {title}{shared_by}."
    if h is Heuristic.H7_PRIOR_PAPER_BY_MEMBER:
        title = _title_of(snapshot, str(p["prior_paper"]))
        return f"Related paper: {title}, authored by channel member {_handle_for(snapshot, str(p['member_id']))}."
    if h is Heuristic.H8_MEMBER_INTEREST_SIMILARITY:
        return f"Possibly of interest to {_handle_for(snapshot, str(p['member_id']))}."
    if h is Heuristic.H9_MEMBER_RELATION_VARIANT:
        handle = _handle_for(snapshot, str(p["member_id"]))
        variant = p.get("variant")
        if variant == "liked_similar":
            reason = "you've liked several similar papers in the channel"
        elif variant == "liked_author":
            names = ", ".join(p.get("author_names", ())) or "this author"
            reason = f"you've liked several of {names}'s papers in the channel"
        elif variant == "liked_venue":
            reason = f"you've liked several {p.get('venue', 'related')} papers in the channel"
        elif variant == "own_publications_similar":
            reason = "several of your publications are similar"
        else:
            reason = "you've cited similar papers before"
        return f"Possibly of interest to {handle}: {reason}."
    raise InvalidInputError(f"no template for {h}")  # pragma: no cover


def _template_block(selected: SelectedSignals, snapshot: ChannelSnapshot) -> str:
    return "\n".join(_template_sentence(s, snapshot) for s in selected.signals())


def render_condition(
    paper: PaperRecord,
    selected: SelectedSignals,
    condition: Condition,
    snapshot: ChannelSnapshot,
    completion: CompletionClient | None = None,
    limits: CharLimits | None = None,
    seed: int = 0,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> BotMessage:
    """Render the same candidate + selection under a composition condition.

    c1 is the bare summary; c2 the template-rendered signals; c3 their
    concatenation (c2 body, separator, c1 body -- byte-wise); c4 the full
    chain output, identical to ``assemble_message(run_chain(...))``.
    """
    limits = limits or snapshot.config.char_limits
    if condition is Condition.C1_TLDR:
        return assemble_message(tldr_text(paper), SelectedSignals(), paper, snapshot, condition)
    if condition is Condition.C2_TEMPLATE:
        return assemble_message(_template_block(selected, snapshot), selected, paper, snapshot, condition)
    if condition is Condition.C3_TEMPLATE_TLDR:
        block = _template_block(selected, snapshot)
        raw = block + CONDITION_SEPARATOR + tldr_text(paper) if block else tldr_text(paper)
        return assemble_message(raw, selected, paper, snapshot, condition)
    if completion is None:
        raise InvalidInputError("the synthesis condition needs a completion client")
    chain = build_prompt_chain(paper, selected, limits, snapshot)
    raw = run_chain(chain, completion, seed=seed, max_retries=max_retries)
    return assemble_message(raw, selected, paper, snapshot, condition)


def generate_message(
    paper: PaperRecord,
    selected: SelectedSignals,
    snapshot: ChannelSnapshot,
    completion: CompletionClient,
    seed: int = 0,
    limits: CharLimits | None = None,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> tuple[BotMessage, ChainRun, ValidationReport]:
    """Full generation pipeline; the returned message always validates clean."""
    limits = limits or snapshot.config.char_limits
    chain = build_prompt_chain(paper, selected, limits, snapshot)
    run = run_chain_detailed(chain, completion, seed=seed, max_retries=max_retries)
    message = assemble_message(run.final_text, selected, paper, snapshot)
    constraints = constraints_for(paper, selected, snapshot, Condition.C4_SYNTHESIS, limits)
    report = validate_message(message, constraints, snapshot)
    if not report.ok:
        raise GenerationFailedError(f"assembled message failed validation: {report.failed_rules()}")
    return message, run, report

"""External service boundary: paper metadata, recommendations, completions.

Everything the agent needs from the outside world comes through three small
interfaces (metadata lookup, related-paper recommendation, text completion).
Each has a deterministic offline implementation backed by a
:class:`CorpusFixture`, and a thin HTTP implementation for hosted services.
The rest of the engine never knows which one it is talking to.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .errors import (
    ConfigurationError,
    InvalidInputError,
    NotFoundError,
    RetryableError,
)
from .refs import PaperRef, canonicalize

__all__ = [
    "Author",
    "PaperRecord",
    "CorpusFixture",
    "CompletionRequest",
    "MetadataClient",
    "RecommendationClient",
    "CompletionClient",
    "MockMetadataClient",
    "MockRecommendationClient",
    "MockCompletionClient",
    "CachingMetadataClient",
    "LiveMetadataClient",
    "LiveRecommendationClient",
    "LiveCompletionClient",
    "TokenBucket",
    "cosine_similarity",
    "normalized",
]

_UNIT_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Author:
    author_id: str
    name: str
    affiliations: tuple[str, ...] = ()

    def to_record(self) -> dict[str, Any]:
        return {
            "author_id": self.author_id,
            "name": self.name,
            "affiliations": list(self.affiliations),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Author":
        return cls(
            author_id=str(record["author_id"]),
            name=str(record["name"]),
            affiliations=tuple(record.get("affiliations") or ()),
        )


@dataclass(frozen=True)
class PaperRecord:
    """Resolved metadata for one scholarly item."""

    ref: PaperRef
    title: str
    abstract: str | None = None
    authors: tuple[Author, ...] = ()
    venue: str | None = None
    year: int | None = None
    citations: tuple[PaperRef, ...] = ()
    cited_by: tuple[PaperRef, ...] = ()
    citation_contexts: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    embedding: tuple[float, ...] | None = None
    degraded: bool = False

    @property
    def author_ids(self) -> frozenset[str]:
        return frozenset(a.author_id for a in self.authors)

    def contexts_for(self, prior: PaperRef) -> tuple[str, ...]:
        return tuple(self.citation_contexts.get(prior.key, ()))

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "ref": self.ref.key,
            "title": self.title,
            "abstract": self.abstract,
            "authors": [a.to_record() for a in self.authors],
            "venue": self.venue,
            "year": self.year,
            "citations": [c.key for c in self.citations],
            "embedding": list(self.embedding) if self.embedding is not None else None,
        }
        if self.citation_contexts:
            record["citation_contexts"] = {k: list(v) for k, v in self.citation_contexts.items()}
        return record

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "PaperRecord":
        embedding = record.get("embedding")
        contexts = {
            str(k): tuple(v) for k, v in (record.get("citation_contexts") or {}).items()
        }
        return cls(
            ref=PaperRef.parse(record["ref"]),
            title=str(record["title"]),
            abstract=record.get("abstract"),
            authors=tuple(Author.from_record(a) for a in record.get("authors") or ()),
            venue=record.get("venue"),
            year=record.get("year"),
            citations=tuple(PaperRef.parse(c) for c in record.get("citations") or ()),
            cited_by=tuple(PaperRef.parse(c) for c in record.get("cited_by") or ()),
            citation_contexts=contexts,
            embedding=tuple(float(x) for x in embedding) if embedding is not None else None,
            degraded=bool(record.get("degraded", False)),
        )


def normalized(vector: Sequence[float]) -> tuple[float, ...]:
    norm = math.sqrt(math.fsum(x * x for x in vector))
    if norm == 0.0:
        raise InvalidInputError("cannot normalize a zero vector")
    if abs(norm - 1.0) <= _UNIT_NORM_TOLERANCE:
        return tuple(float(x) for x in vector)
    return tuple(float(x) / norm for x in vector)


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two embeddings."""
    if len(a) == 0 or len(b) == 0 or len(a) != len(b):
        raise InvalidInputError(f"dimension mismatch: {len(a)} vs {len(b)}")
    norm_a = math.sqrt(math.fsum(x * x for x in a))
    norm_b = math.sqrt(math.fsum(x * x for x in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise InvalidInputError("cosine undefined for zero vector")
    return math.fsum(x * y for x, y in zip(a, b)) / (norm_a * norm_b)


class CorpusFixture:
    """A small closed world of papers with consistent citation edges.

    Loadable from a single JSON-lines file: one record per paper with keys
    ``ref, title, abstract, authors, venue, year, citations, embedding``
    (plus optional ``citation_contexts``). ``cited_by`` edges are derived, so
    A cites B if and only if B is cited-by A.
    """

    def __init__(self, papers: Iterable[PaperRecord]):
        self._papers: dict[PaperRef, PaperRecord] = {}
        for paper in papers:
            if paper.ref in self._papers:
                raise InvalidInputError(f"duplicate corpus ref: {paper.ref}")
            self._papers[paper.ref] = paper
        self._validate_embeddings()
        self._derive_cited_by()

    def _validate_embeddings(self) -> None:
        dims = {len(p.embedding) for p in self._papers.values() if p.embedding is not None}
        if len(dims) > 1:
            raise InvalidInputError(f"inconsistent embedding dimensions: {sorted(dims)}")
        for paper in self._papers.values():
            if paper.embedding is None:
                continue
            norm = math.sqrt(math.fsum(x * x for x in paper.embedding))
            if abs(norm - 1.0) > _UNIT_NORM_TOLERANCE:
                raise InvalidInputError(
                    f"corpus embedding for {paper.ref} is not unit-normalized (norm={norm!r})"
                )

    def _derive_cited_by(self) -> None:
        incoming: dict[PaperRef, list[PaperRef]] = {ref: [] for ref in self._papers}
        for paper in self._papers.values():
            for cited in paper.citations:
                if cited in incoming:
                    incoming[cited].append(paper.ref)
        for ref, sources in incoming.items():
            self._papers[ref] = replace(self._papers[ref], cited_by=tuple(sorted(sources)))

    def __len__(self) -> int:
        return len(self._papers)

    def __contains__(self, ref: PaperRef) -> bool:
        return canonicalize(ref) in self._papers

    @property
    def refs(self) -> list[PaperRef]:
        return sorted(self._papers)

    def papers(self) -> list[PaperRecord]:
        return [self._papers[ref] for ref in self.refs]

    def get(self, ref: PaperRef) -> PaperRecord:
        try:
            return self._papers[canonicalize(ref)]
        except KeyError:
            raise NotFoundError(f"no corpus record for {ref}") from None

    @classmethod
    def load(cls, path: str | Path) -> "CorpusFixture":
        papers = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    papers.append(PaperRecord.from_record(json.loads(line)))
        return cls(papers)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for paper in self.papers():
                handle.write(json.dumps(paper.to_record(), ensure_ascii=False) + "\n")


# --- client interfaces ------------------------------------------------------


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_output_chars: int
    seed: int


class MetadataClient(Protocol):
    def fetch_paper_metadata(self, ref: PaperRef) -> PaperRecord: ...


class RecommendationClient(Protocol):
    def fetch_recommendations(
        self, positives: Sequence[PaperRef], k: int
    ) -> list[PaperRecord]: ...


class CompletionClient(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


# --- offline implementations ------------------------------------------------


def _degrade(record: PaperRecord) -> PaperRecord:
    """A record with no abstract cannot carry an embedding either."""
    if record.abstract:
        return record
    return replace(record, embedding=None, degraded=True)


class MockMetadataClient:
    """Metadata lookups answered from a corpus fixture. Counts remote calls."""

    def __init__(self, corpus: CorpusFixture):
        self._corpus = corpus
        self.remote_calls = 0

    def fetch_paper_metadata(self, ref: PaperRef) -> PaperRecord:
        self.remote_calls += 1
        return _degrade(self._corpus.get(ref))


class CachingMetadataClient:
    """Per-process (and optionally on-disk) cache in front of a metadata client.

    Repeated fetches of the same ref hit the underlying client at most once per
    process; with ``cache_path`` set, at most once across processes.
    """

    def __init__(self, inner: MetadataClient, cache_path: str | Path | None = None):
        self._inner = inner
        self._cache: dict[PaperRef, PaperRecord] = {}
        self._cache_path = Path(cache_path) if cache_path else None
        if self._cache_path and self._cache_path.exists():
            with open(self._cache_path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        record = PaperRecord.from_record(json.loads(line))
                        self._cache[record.ref] = record

    def fetch_paper_metadata(self, ref: PaperRef) -> PaperRecord:
        ref = canonicalize(ref)
        if ref not in self._cache:
            record = self._inner.fetch_paper_metadata(ref)
            self._cache[ref] = record
            if self._cache_path:
                with open(self._cache_path, "a", encoding="utf-8") as handle:
                    payload = record.to_record()
                    payload["degraded"] = record.degraded
                    handle.write(json.dumps(payload, ensure_ascii=False) + "\n")
        return self._cache[ref]


class MockRecommendationClient:
    """Ranks the fixture corpus by maximum cosine similarity to the positives."""

    def __init__(self, corpus: CorpusFixture):
        self._corpus = corpus

    def fetch_recommendations(self, positives: Sequence[PaperRef], k: int) -> list[PaperRecord]:
        if not positives:
            raise InvalidInputError("at least one positive paper is required")
        if k < 1:
            raise InvalidInputError("k must be >= 1")
        positive_set = {canonicalize(ref) for ref in positives}
        positive_vectors = []
        for ref in sorted(positive_set):
            if ref in self._corpus:
                record = self._corpus.get(ref)
                if record.embedding is not None:
                    positive_vectors.append(record.embedding)

        def score(record: PaperRecord) -> float:
            if record.embedding is None or not positive_vectors:
                return 0.0
            return max(cosine_similarity(record.embedding, vec) for vec in positive_vectors)

        ranked = sorted(
            (p for p in self._corpus.papers() if p.ref not in positive_set),
            key=lambda p: (-score(p), p.ref.key),
        )
        return [_degrade(p) for p in ranked[:k]]


# --- deterministic completion -----------------------------------------------

_START_RE = re.compile(r'must start with "([^"]+)"')
_REQUIRED_RE = re.compile(r'must contain the following strings: "([^"]+)"')
_CONGRATS_RE = re.compile(r"Congratulate the following authors: (.+?)\.(?:\n|$)")
_MENTION_AUTHORS_RE = re.compile(r"Mention the following authors: (.+?)\.(?:\n|$)")
_AFFILIATION_RE = re.compile(r"Mention the affiliation: (.+?)\.(?:\n|$)")
_VENUE_RE = re.compile(r"Mention the paper's conference or journal: (.+?)\.(?:\n|$)")
_ABSTRACT_RE = re.compile(r"^\*? ?Abstract: (.+)$", re.MULTILINE)
_TITLE_RE = re.compile(r"^\*? ?Title: (.+)$", re.MULTILINE)
_HANDLE_RE = re.compile(r"(?<![\w.])@[A-Za-z0-9_](?:[\w.\-]*[A-Za-z0-9_])?")
_NUMBER_RE = re.compile(r"\b\d+(?:\.\d+)?%?\b")
_SHARED_AUTHORS_RE = re.compile(r"shared authors of the two papers: (.+?)\.(?:\n|$)")

_BOLD_PHRASES = (
    "a concrete methods contribution",
    "an unusually thorough evaluation",
    "a practical systems angle",
    "a crisp take on a hard problem",
    "strong empirical grounding",
    "a reusable benchmark",
)

_LINKERS = (
    "it tackles a closely related question",
    "it builds on the same line of work",
    "it shares the core problem framing",
    "it extends ideas the channel has discussed",
)


def _digest_int(*parts: object) -> int:
    joined = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big")


class MockCompletionClient:
    """A pure function of (prompt, seed): parses the prompt's own directives
    and emits compliant text within the requested budget."""

    def complete(self, request: CompletionRequest) -> str:
        prompt = request.prompt
        limit = request.max_output_chars
        if limit < 1:
            raise InvalidInputError("max_output_chars must be >= 1")
        pick = _digest_int(request.seed, prompt)

        starts = _START_RE.findall(prompt)
        required = _REQUIRED_RE.findall(prompt)
        handles = list(dict.fromkeys(_HANDLE_RE.findall(prompt)))
        abstract_m = _ABSTRACT_RE.search(prompt)
        title_m = _TITLE_RE.search(prompt)

        mandatory: list[str] = []
        optional: list[str] = []

        if starts:
            linker = _LINKERS[pick % len(_LINKERS)]
            mandatory.append(f"{starts[0]} {linker}.")
            for extra_start in starts[1:]:
                lifted = extra_start[0].upper() + extra_start[1:]
                mandatory.append(f"\n\n{lifted}: the channel found it useful.")
        congrats = _CONGRATS_RE.search(prompt)
        if congrats:
            mandatory.append(f"Congrats to {congrats.group(1)} on the new paper!")
        if not starts and not congrats:
            lead = title_m.group(1) if title_m else "This paper"
            mandatory.append(f"{lead} looks worth a read.")

        seen_text = " ".join(mandatory)
        for req in required:
            if req not in seen_text:
                mandatory.append(f"See {req}.")
                seen_text += f" See {req}."
        for handle in handles:
            if handle not in seen_text:
                optional.append(f"cc {handle}.")
                seen_text += f" cc {handle}."

        mention = _MENTION_AUTHORS_RE.search(prompt)
        if mention:
            optional.append(f"New work by {mention.group(1)}.")
        shared = _SHARED_AUTHORS_RE.search(prompt)
        if shared:
            optional.append(f"Shared authors: {shared.group(1)}.")
        affiliation = _AFFILIATION_RE.search(prompt)
        if affiliation:
            optional.append(f"A paper from {affiliation.group(1)}.")
        venue = _VENUE_RE.search(prompt)
        if venue:
            optional.append(f"Published at {venue.group(1)}.")
        if abstract_m:
            first_sentence = abstract_m.group(1).split(". ")[0].strip()
            if first_sentence:
                optional.append(f"In brief: {first_sentence.rstrip('.')}.")
            number = _NUMBER_RE.search(abstract_m.group(1))
            if number:
                optional.append(f"Reports {number.group(0)}.")
        if "bold at most three" in prompt:
            phrase = _BOLD_PHRASES[pick % len(_BOLD_PHRASES)]
            optional.append(f"In short: *{phrase}*.")

        out = ""
        for part in mandatory:
            out = part if not out else (out + part if part.startswith("\n") else f"{out} {part}")
        if len(out) > limit:
            return out[:limit]
        for part in optional:
            candidate = f"{out} {part}" if out else part
            if len(candidate) <= limit:
                out = candidate
        return out


# --- live implementations ---------------------------------------------------


class TokenBucket:
    """Blocking token-bucket rate limiter with injectable clock and sleeper."""

    def __init__(
        self,
        rate_per_sec: float,
        capacity: float,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if rate_per_sec <= 0 or capacity <= 0:
            raise InvalidInputError("rate and capacity must be positive")
        self._rate = rate_per_sec
        self._capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleeper = sleeper
        self._updated = clock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self._capacity, self._tokens + (now - self._updated) * self._rate)
        self._updated = now

    def acquire(self, tokens: float = 1.0) -> None:
        self._refill()
        if self._tokens < tokens:
            self._sleeper((tokens - self._tokens) / self._rate)
            self._refill()
            self._tokens = max(self._tokens, tokens)
        self._tokens -= tokens


def _with_backoff(
    call: Callable[[], httpx.Response],
    attempts: int = 3,
    base_delay: float = 0.5,
    sleeper: Callable[[float], None] = time.sleep,
) -> httpx.Response:
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            response = call()
        except httpx.TransportError as exc:
            last = exc
        else:
            if response.status_code in (429, 500, 502, 503, 504):
                last = RetryableError(f"upstream returned {response.status_code}")
            else:
                return response
        if attempt < attempts - 1:
            sleeper(base_delay * (2**attempt))
    raise RetryableError(f"request failed after {attempts} attempts: {last}")


def _require_env(name: str, override: str | None) -> str:
    value = override or os.environ.get(name)
    if not value:
        raise ConfigurationError(f"{name} is not configured")
    return value.rstrip("/")


class LiveMetadataClient:
    """Metadata over HTTP against a paper-index service."""

    def __init__(
        self,
        base_url: str | None = None,
        client: httpx.Client | None = None,
        limiter: TokenBucket | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._base = _require_env("PAPER_API_BASE_URL", base_url)
        self._client = client or httpx.Client(timeout=30.0)
        self._limiter = limiter
        self._sleeper = sleeper

    def fetch_paper_metadata(self, ref: PaperRef) -> PaperRecord:
        ref = canonicalize(ref)
        if self._limiter:
            self._limiter.acquire()
        response = _with_backoff(
            lambda: self._client.get(f"{self._base}/papers/{ref.key}"), sleeper=self._sleeper
        )
        if response.status_code == 404:
            raise NotFoundError(f"no metadata for {ref}")
        response.raise_for_status()
        record = PaperRecord.from_record(response.json())
        if record.embedding is not None:
            record = replace(record, embedding=normalized(record.embedding))
        return _degrade(record)


class LiveRecommendationClient:
    def __init__(
        self,
        base_url: str | None = None,
        client: httpx.Client | None = None,
        limiter: TokenBucket | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._base = _require_env("PAPER_API_BASE_URL", base_url)
        self._client = client or httpx.Client(timeout=30.0)
        self._limiter = limiter
        self._sleeper = sleeper

    def fetch_recommendations(self, positives: Sequence[PaperRef], k: int) -> list[PaperRecord]:
        if not positives:
            raise InvalidInputError("at least one positive paper is required")
        if self._limiter:
            self._limiter.acquire()
        response = _with_backoff(
            lambda: self._client.post(
                f"{self._base}/recommendations",
                json={"positives": [canonicalize(r).key for r in positives], "k": k},
            ),
            sleeper=self._sleeper,
        )
        response.raise_for_status()
        records = [PaperRecord.from_record(r) for r in response.json()["papers"]]
        return [
            _degrade(
                replace(r, embedding=normalized(r.embedding)) if r.embedding is not None else r
            )
            for r in records
        ]


class LiveCompletionClient:
    """Completion over HTTP against a hosted text-generation endpoint."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        limiter: TokenBucket | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._base = _require_env("LLM_BASE_URL", base_url)
        self._key = api_key or os.environ.get("LLM_API_KEY")
        if not self._key:
            raise ConfigurationError("LLM_API_KEY is not configured")
        self._client = client or httpx.Client(timeout=60.0)
        self._limiter = limiter
        self._sleeper = sleeper

    def complete(self, request: CompletionRequest) -> str:
        if self._limiter:
            self._limiter.acquire()
        response = _with_backoff(
            lambda: self._client.post(
                f"{self._base}/completions",
                headers={"Authorization": f"Bearer {self._key}"},
                json={
                    "prompt": request.prompt,
                    "max_output_chars": request.max_output_chars,
                    "seed": request.seed,
                },
            ),
            sleeper=self._sleeper,
        )
        response.raise_for_status()
        return str(response.json()["text"])

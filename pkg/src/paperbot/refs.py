"""Recognition and canonicalization of scholarly item references in chat text.

A reference is anything a channel member might paste to point at a paper: an
arXiv link (abs or pdf, any version), a DOI resolver or publisher digital-library
link, a paper-index permalink, or a bare ``arXiv:``/``doi:`` identifier. Links to
social-media posts about a paper are deliberately not references: they cannot be
resolved to a paper record and are ignored by extraction.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from urllib.parse import unquote, urlparse

from .errors import InvalidInputError

__all__ = ["RefSource", "PaperRef", "canonicalize", "extract_item_refs", "ref_url"]


class RefSource(str, Enum):
    ARXIV = "arxiv"
    DOI = "doi"
    SEMANTIC = "semantic_id"


@dataclass(frozen=True, order=True)
class PaperRef:
    """Canonical identity of a scholarly item: an id within a naming scheme."""

    source: RefSource
    external_id: str

    @property
    def key(self) -> str:
        return f"{self.source.value}:{self.external_id}"

    def __str__(self) -> str:
        return self.key

    @classmethod
    def parse(cls, text: str) -> "PaperRef":
        scheme, sep, external_id = text.partition(":")
        if not sep or not external_id:
            raise InvalidInputError(f"not a ref key: {text!r}")
        try:
            source = RefSource(scheme)
        except ValueError:
            raise InvalidInputError(f"unknown ref scheme: {scheme!r}") from None
        return canonicalize(cls(source, external_id))


# Trailing characters that belong to surrounding prose, not the reference.
_TRAILING_JUNK = ".,;:!?'\")]}>"

_URL_RE = re.compile(r"https?://[^\s<>|\"')\]]+", re.IGNORECASE)
_ARXIV_NEW_RE = re.compile(r"^(\d{4}\.\d{4,5})(v\d+)?$")
_ARXIV_OLD_RE = re.compile(r"^([a-z-]+(?:\.[a-z]{2})?/\d{7})(v\d+)?$", re.IGNORECASE)
_TEXT_ARXIV_RE = re.compile(r"\barxiv:\s?(\d{4}\.\d{4,5}(?:v\d+)?)", re.IGNORECASE)
_TEXT_DOI_RE = re.compile(r"\bdoi:\s?(10\.\d{4,9}/[^\s<>|\"')\]]+)", re.IGNORECASE)
_DOI_PATH_RE = re.compile(r"(10\.\d{4,9}/.+)$")
_SEMANTIC_SHA_RE = re.compile(r"^[0-9a-f]{40}$")
_CORPUS_ID_RE = re.compile(r"^corpusid:(\d+)$", re.IGNORECASE)


def canonicalize(ref: PaperRef) -> PaperRef:
    """Normalize a reference to its canonical spelling. Idempotent.

    arXiv ids drop their version suffix (``2301.00001v3`` == ``2301.00001``);
    DOIs compare case-insensitively and are stored lowercase.
    """
    raw = ref.external_id.strip().strip("/")
    if not raw:
        raise InvalidInputError("empty external id")
    if ref.source is RefSource.ARXIV:
        raw = raw.lower()
        for pattern in (_ARXIV_NEW_RE, _ARXIV_OLD_RE):
            match = pattern.match(raw)
            if match:
                return PaperRef(RefSource.ARXIV, match.group(1))
        raise InvalidInputError(f"not an arXiv id: {ref.external_id!r}")
    if ref.source is RefSource.DOI:
        raw = unquote(raw).lower().rstrip(_TRAILING_JUNK)
        if not raw.startswith("10.") or "/" not in raw:
            raise InvalidInputError(f"not a DOI: {ref.external_id!r}")
        return PaperRef(RefSource.DOI, raw)
    return PaperRef(RefSource.SEMANTIC, raw.lower())


def _from_arxiv_path(path: str) -> PaperRef | None:
    parts = [p for p in path.split("/") if p]
    if len(parts) < 2 or parts[0] not in ("abs", "pdf", "html"):
        return None
    raw = "/".join(parts[1:])
    if raw.endswith(".pdf"):
        raw = raw[: -len(".pdf")]
    try:
        return canonicalize(PaperRef(RefSource.ARXIV, raw))
    except InvalidInputError:
        return None


def _from_doi(raw: str) -> PaperRef | None:
    try:
        return canonicalize(PaperRef(RefSource.DOI, raw))
    except InvalidInputError:
        return None


def _from_url(url: str) -> PaperRef | None:
    parsed = urlparse(url)
    host = parsed.netloc.lower().split(":")[0]
    if host.startswith("www."):
        host = host[len("www.") :]
    path = parsed.path.rstrip("/")

    if host in ("arxiv.org", "export.arxiv.org"):
        return _from_arxiv_path(path)
    if host in ("doi.org", "dx.doi.org"):
        return _from_doi(path.lstrip("/"))
    if host in ("dl.acm.org", "link.springer.com", "dl.gi.de"):
        match = _DOI_PATH_RE.search(path)
        return _from_doi(match.group(1)) if match else None
    if host == "semanticscholar.org":
        parts = [p for p in path.split("/") if p]
        if len(parts) >= 2 and parts[0].lower() == "paper":
            tail = parts[-1].lower()
            if _SEMANTIC_SHA_RE.match(tail):
                return PaperRef(RefSource.SEMANTIC, tail)
        return None
    if host == "api.semanticscholar.org":
        tail = path.lstrip("/")
        if _CORPUS_ID_RE.match(tail):
            return PaperRef(RefSource.SEMANTIC, tail.lower())
        return None
    return None


def extract_item_refs(text: str) -> list[PaperRef]:
    """Return every recognized item reference in ``text``.

    Order follows first appearance; duplicates (after canonicalization) are
    dropped. Unrecognized URLs -- including social-media links -- yield nothing.
    """
    found: list[PaperRef] = []
    seen: set[PaperRef] = set()
    spans: list[tuple[int, PaperRef]] = []

    for match in _URL_RE.finditer(text):
        url = match.group(0).rstrip(_TRAILING_JUNK)
        ref = _from_url(url)
        if ref is not None:
            spans.append((match.start(), ref))
    covered = [(m.start(), m.end()) for m in _URL_RE.finditer(text)]

    def inside_url(pos: int) -> bool:
        return any(start <= pos < end for start, end in covered)

    for match in _TEXT_ARXIV_RE.finditer(text):
        if not inside_url(match.start()):
            try:
                spans.append((match.start(), canonicalize(PaperRef(RefSource.ARXIV, match.group(1)))))
            except InvalidInputError:
                pass
    for match in _TEXT_DOI_RE.finditer(text):
        if not inside_url(match.start()):
            ref = _from_doi(match.group(1))
            if ref is not None:
                spans.append((match.start(), ref))

    for _, ref in sorted(spans, key=lambda item: item[0]):
        if ref not in seen:
            seen.add(ref)
            found.append(ref)
    return found


def ref_url(ref: PaperRef) -> str:
    """Canonical public URL for a reference."""
    if ref.source is RefSource.ARXIV:
        return f"https://arxiv.org/abs/{ref.external_id}"
    if ref.source is RefSource.DOI:
        return f"https://doi.org/{ref.external_id}"
    match = _CORPUS_ID_RE.match(ref.external_id)
    if match:
        return f"https://api.semanticscholar.org/CorpusID:{match.group(1)}"
    return f"https://www.semanticscholar.org/paper/{ref.external_id}"

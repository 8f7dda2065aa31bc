"""HTTP sandbox around the knowledge base and orchestrator.

A small chat-like service: clients read a channel feed, post messages,
react and reply, tweak the posting config, force a recommendation cycle,
and pull the engagement report. All writes flow through the same
event-sourced ingestion path the simulator uses; with a log file configured,
restarts replay the log and resume with identical state.
"""
from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Callable

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .analytics import engagement_report, export_report
from .clients import (
    CachingMetadataClient,
    CorpusFixture,
    MockCompletionClient,
    MockMetadataClient,
    MockRecommendationClient,
)
from .config import ChannelConfig
from .errors import (
    ConfigurationError,
    IntegrityError,
    InvalidInputError,
    NotFoundError,
    PaperbotError,
)
from .events import (
    EventKind,
    Member,
    SocialEvent,
    message_payload,
    reaction_payload,
    read_event_log,
    reply_payload,
    utc_now,
)
from .knowledge import DEFAULT_BOT_ACTOR, KnowledgeBase
from .orchestrator import CycleResult, Orchestrator

__all__ = [
    "ChannelSetup",
    "ServiceSettings",
    "load_settings",
    "create_app",
]

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR: tuple[tuple[type[PaperbotError], int], ...] = (
    (NotFoundError, 404),
    (IntegrityError, 409),
    (InvalidInputError, 422),
    (ConfigurationError, 500),
)


@dataclass(frozen=True)
class ChannelSetup:
    config: ChannelConfig
    members: tuple[Member, ...]
    seed_links: tuple[str, ...] = ()
    seed_actor: str | None = None


@dataclass(frozen=True)
class ServiceSettings:
    corpus: CorpusFixture
    channels: tuple[ChannelSetup, ...]
    seed: int = 0
    log_path: Path | None = None
    bot_actor: str = DEFAULT_BOT_ACTOR

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base_dir: Path | None = None) -> "ServiceSettings":
        base = base_dir or Path.cwd()
        corpus_path = Path(raw["corpus"])
        if not corpus_path.is_absolute():
            corpus_path = base / corpus_path
        channels = []
        for entry in raw.get("channels", []):
            channels.append(
                ChannelSetup(
                    config=ChannelConfig.from_record(entry["config"]),
                    members=tuple(Member.from_record(m) for m in entry.get("members", ())),
                    seed_links=tuple(entry.get("seed_links", ())),
                    seed_actor=entry.get("seed_actor"),
                )
            )
        if not channels:
            raise ConfigurationError("service settings define no channels")
        log_path = raw.get("log_path")
        if log_path is not None:
            log_path = Path(log_path)
            if not log_path.is_absolute():
                log_path = base / log_path
        return cls(
            corpus=CorpusFixture.load(corpus_path),
            channels=tuple(channels),
            seed=int(raw.get("seed", 0)),
            log_path=log_path,
            bot_actor=str(raw.get("bot_actor", DEFAULT_BOT_ACTOR)),
        )


def load_settings(path: str | Path) -> ServiceSettings:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read service settings {path}: {exc}") from exc
    return ServiceSettings.from_dict(raw, base_dir=path.parent)


class MessageIn(BaseModel):
    actor: str
    text: str


class ReactionIn(BaseModel):
    actor: str
    emoji: str


class ReplyIn(BaseModel):
    actor: str
    text: str


def _event_json(event: SocialEvent) -> dict[str, Any]:
    return event.to_record()


def _cycle_json(result: CycleResult) -> dict[str, Any]:
    return {
        "channel": result.channel,
        "status": result.status.value,
        "posted_seq": result.posted_seq,
        "candidate": result.candidate.key if result.candidate else None,
        "seeds": [ref.key for ref in result.seeds],
        "detail": result.detail,
    }


def create_app(
    settings: ServiceSettings,
    clock: Callable[[], datetime] = utc_now,
) -> FastAPI:
    """Build the sandbox app: restore state from the event log, then serve."""
    kb = KnowledgeBase(clock=clock, bot_actor=settings.bot_actor)
    orchestrator = Orchestrator(
        kb,
        metadata=CachingMetadataClient(MockMetadataClient(settings.corpus)),
        recommender=MockRecommendationClient(settings.corpus),
        completion=MockCompletionClient(),
        base_seed=settings.seed,
    )
    for setup in settings.channels:
        kb.register_channel(setup.config, setup.members)
    if settings.log_path is not None and settings.log_path.exists():
        for event in read_event_log(settings.log_path):
            kb.ingest_event(event)
        logger.info("replayed event log %s", settings.log_path)
    if settings.log_path is not None:
        kb.attach_log(settings.log_path)
    for setup in settings.channels:
        if settings.log_path is None or not kb.events(setup.config.channel):
            if setup.seed_links:
                orchestrator.post_seed_links(
                    setup.config.channel, setup.seed_links, setup.seed_actor
                )

    app = FastAPI(title="paperbot sandbox", version="0.1.0")
    app.state.kb = kb
    app.state.orchestrator = orchestrator
    app.state.settings = settings
    write_lock = threading.Lock()

    def _ingest_human(channel: str, kind: EventKind, actor: str, payload: dict[str, Any]) -> SocialEvent:
        if actor == kb.bot_actor:
            raise InvalidInputError("the bot cannot be impersonated")
        if actor not in kb.members(channel):
            raise InvalidInputError(f"unknown member: {actor}")
        with write_lock:
            event = SocialEvent(
                seq=kb.next_seq(channel),
                ts=clock(),
                channel=channel,
                kind=kind,
                actor=actor,
                payload=payload,
            )
            kb.ingest_event(event)
        return event

    @app.exception_handler(PaperbotError)
    async def handle_domain_error(request: Request, exc: PaperbotError) -> JSONResponse:
        status = 500
        for klass, code in _STATUS_BY_ERROR:
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/")
    def root() -> dict[str, Any]:
        return {
            "service": "paperbot-sandbox",
            "bot_actor": kb.bot_actor,
            "channels": [
                {
                    "channel": channel,
                    "last_seq": kb.next_seq(channel) - 1,
                    "members": [m.to_record() for m in kb.members(channel).values()],
                }
                for channel in kb.channels()
            ],
        }

    @app.get("/channels/{channel}/feed")
    def feed(channel: str, since: int = Query(default=0, ge=0)) -> dict[str, Any]:
        events = kb.events(channel)
        visible = [e for e in events if e.seq > since]
        return {
            "channel": channel,
            "since": since,
            "last_seq": events[-1].seq if events else 0,
            "events": [_event_json(e) for e in visible],
        }

    @app.post("/channels/{channel}/messages", status_code=201)
    def post_message(channel: str, body: MessageIn) -> dict[str, Any]:
        if not body.text.strip():
            raise InvalidInputError("message text must not be empty")
        event = _ingest_human(
            channel, EventKind.MESSAGE, body.actor, message_payload(body.text)
        )
        return _event_json(event)

    @app.post("/channels/{channel}/messages/{seq}/reactions", status_code=201)
    def post_reaction(channel: str, seq: int, body: ReactionIn) -> dict[str, Any]:
        event = _ingest_human(
            channel, EventKind.REACTION, body.actor, reaction_payload(seq, body.emoji)
        )
        return _event_json(event)

    @app.post("/channels/{channel}/messages/{seq}/replies", status_code=201)
    def post_reply(channel: str, seq: int, body: ReplyIn) -> dict[str, Any]:
        if not body.text.strip():
            raise InvalidInputError("reply text must not be empty")
        event = _ingest_human(
            channel, EventKind.REPLY, body.actor, reply_payload(seq, body.text)
        )
        return _event_json(event)

    @app.get("/channels/{channel}/config")
    def get_config(channel: str) -> dict[str, Any]:
        return kb.config(channel).to_record()

    @app.put("/channels/{channel}/config")
    def put_config(channel: str, changes: dict[str, Any] = Body(...)) -> dict[str, Any]:
        new_config = kb.config(channel).updated(changes)
        with write_lock:
            event = SocialEvent(
                seq=kb.next_seq(channel),
                ts=clock(),
                channel=channel,
                kind=EventKind.CONFIG,
                actor="admin",
                payload=new_config.to_record(),
            )
            kb.ingest_event(event)
        return new_config.to_record()

    @app.post("/channels/{channel}/cycle")
    def run_cycle(channel: str) -> dict[str, Any]:
        if not kb.has_channel(channel):
            raise NotFoundError(f"unknown channel: {channel}")
        result = orchestrator.run_cycle(channel)
        return _cycle_json(result)

    @app.get("/channels/{channel}/report")
    def report(channel: str, format: str = Query(default="json")):
        events = kb.events(channel)
        series = engagement_report(events, bot_actor=kb.bot_actor)
        if format == "csv":
            return PlainTextResponse(export_report(series, "csv"), media_type="text/csv")
        if format in ("json", "json-lines", "jsonl"):
            return {
                "channel": channel,
                "rows": [
                    {
                        "day": row.day,
                        "human_recs": row.human_recs,
                        "bot_recs": row.bot_recs,
                        "emoji_reactions": row.emoji_reactions,
                        "comments": row.comments,
                    }
                    for row in series.rows
                ],
            }
        raise InvalidInputError(f"unknown report format: {format}")

    return app

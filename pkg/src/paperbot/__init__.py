"""paperbot: a social paper-recommendation bot for group chats.

It indexes channel interactions around papers into an event-sourced
knowledge base, detects and ranks social signals connecting a candidate
paper to the group, generates a short grounded message through a prompt
chain, posts on a schedule, and folds the reactions back in.
"""
from __future__ import annotations

from .analytics import CumulativeSeries, DayCounts, engagement_report, export_report
from .clients import (
    Author,
    CachingMetadataClient,
    CompletionRequest,
    CorpusFixture,
    LiveCompletionClient,
    LiveMetadataClient,
    LiveRecommendationClient,
    MockCompletionClient,
    MockMetadataClient,
    MockRecommendationClient,
    PaperRecord,
    cosine_similarity,
)
from .config import CharLimits, ChannelConfig, Frequency
from .errors import (
    ConfigurationError,
    ConnectorError,
    GenerationFailedError,
    IntegrityError,
    InvalidInputError,
    NotFoundError,
    PaperbotError,
    RetryableError,
    TranscriptError,
)
from .events import EventKind, Member, SocialEvent, read_event_log, write_event_log
from .generation import (
    BotMessage,
    Condition,
    ValidationReport,
    assemble_message,
    generate_message,
    render_condition,
    run_chain,
    tldr_text,
    validate_message,
)
from .knowledge import (
    ChannelSnapshot,
    EngagementSummary,
    IndexedPaper,
    KnowledgeBase,
    Sentiment,
    classify_reaction,
)
from .markup import bold_spans, link_tokens, mentioned_ids, plain_text
from .orchestrator import (
    Connector,
    CycleResult,
    CycleStatus,
    LoopbackConnector,
    Orchestrator,
    next_post_time,
)
from .prompts import PromptChain, PromptSpec, StageKind, build_prompt_chain
from .refs import PaperRef, RefSource, canonicalize, extract_item_refs, ref_url
from .signals import (
    Category,
    Heuristic,
    SelectedSignals,
    SocialSignal,
    detect_all_signals,
    rank_and_select,
)
from .simulate import ReplayResult, Transcript, VirtualClock, load_transcript, replay

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "PaperbotError",
    "IntegrityError",
    "NotFoundError",
    "InvalidInputError",
    "RetryableError",
    "ConfigurationError",
    "GenerationFailedError",
    "ConnectorError",
    "TranscriptError",
    # refs
    "PaperRef",
    "RefSource",
    "canonicalize",
    "extract_item_refs",
    "ref_url",
    # config
    "ChannelConfig",
    "CharLimits",
    "Frequency",
    # events
    "SocialEvent",
    "EventKind",
    "Member",
    "read_event_log",
    "write_event_log",
    # clients
    "Author",
    "PaperRecord",
    "CorpusFixture",
    "CompletionRequest",
    "cosine_similarity",
    "MockMetadataClient",
    "CachingMetadataClient",
    "MockRecommendationClient",
    "MockCompletionClient",
    "LiveMetadataClient",
    "LiveRecommendationClient",
    "LiveCompletionClient",
    # knowledge
    "KnowledgeBase",
    "ChannelSnapshot",
    "IndexedPaper",
    "EngagementSummary",
    "Sentiment",
    "classify_reaction",
    # markup
    "bold_spans",
    "link_tokens",
    "mentioned_ids",
    "plain_text",
    # signals
    "Heuristic",
    "Category",
    "SocialSignal",
    "SelectedSignals",
    "detect_all_signals",
    "rank_and_select",
    # prompts
    "PromptChain",
    "PromptSpec",
    "StageKind",
    "build_prompt_chain",
    # generation
    "BotMessage",
    "Condition",
    "ValidationReport",
    "run_chain",
    "assemble_message",
    "validate_message",
    "generate_message",
    "render_condition",
    "tldr_text",
    # orchestration
    "Orchestrator",
    "Connector",
    "LoopbackConnector",
    "CycleResult",
    "CycleStatus",
    "next_post_time",
    # analytics
    "CumulativeSeries",
    "DayCounts",
    "engagement_report",
    "export_report",
    # simulation
    "Transcript",
    "ReplayResult",
    "VirtualClock",
    "load_transcript",
    "replay",
]

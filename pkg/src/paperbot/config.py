"""Per-channel configuration: posting cadence, windows, thresholds, budgets."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import timedelta
from enum import Enum
from typing import Any, Mapping

from .errors import InvalidInputError

__all__ = ["Frequency", "POST_INTERVALS", "CharLimits", "ChannelConfig"]


class Frequency(str, Enum):
    DAILY = "daily"
    EVERY_OTHER_DAY = "every_other_day"
    WEEKLY = "weekly"


POST_INTERVALS: dict[Frequency, timedelta] = {
    Frequency.DAILY: timedelta(days=1),
    Frequency.EVERY_OTHER_DAY: timedelta(days=2),
    Frequency.WEEKLY: timedelta(days=7),
}


@dataclass(frozen=True)
class CharLimits:
    """Output budgets, in characters, for the four generation stages."""

    metadata: int = 350
    prior_paper: int = 425
    member: int = 300
    synthesis: int = 386

    def to_record(self) -> dict[str, int]:
        return {
            "metadata": self.metadata,
            "prior_paper": self.prior_paper,
            "member": self.member,
            "synthesis": self.synthesis,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "CharLimits":
        return cls(**{k: int(v) for k, v in record.items()})


@dataclass(frozen=True)
class ChannelConfig:
    channel: str
    frequency: Frequency = Frequency.WEEKLY
    seed_window_days: int = 90
    heuristic_window_days: int = 90
    tau: float = 0.6
    char_limits: CharLimits = field(default_factory=CharLimits)
    emoji_lexicon_overrides: Mapping[str, str] = field(default_factory=dict)
    mention_cooldown: int = 3

    def __post_init__(self) -> None:
        if not self.channel:
            raise InvalidInputError("channel id must be non-empty")
        if self.seed_window_days <= 0 or self.heuristic_window_days <= 0:
            raise InvalidInputError("windows must be positive day counts")
        if not 0.0 < self.tau <= 1.0:
            raise InvalidInputError("tau must lie in (0, 1]")
        if self.mention_cooldown < 0:
            raise InvalidInputError("mention_cooldown must be >= 0")

    @property
    def seed_window(self) -> timedelta:
        return timedelta(days=self.seed_window_days)

    @property
    def heuristic_window(self) -> timedelta:
        return timedelta(days=self.heuristic_window_days)

    @property
    def post_interval(self) -> timedelta:
        return POST_INTERVALS[self.frequency]

    def updated(self, changes: Mapping[str, Any]) -> "ChannelConfig":
        """Return a copy with ``changes`` (record-form fields) applied."""
        merged = self.to_record()
        for key, value in changes.items():
            if key not in merged:
                raise InvalidInputError(f"unknown config field: {key}")
            merged[key] = value
        merged["channel"] = self.channel
        return ChannelConfig.from_record(merged)

    def with_channel(self, channel: str) -> "ChannelConfig":
        return replace(self, channel=channel)

    def to_record(self) -> dict[str, Any]:
        return {
            "channel": self.channel,
            "frequency": self.frequency.value,
            "seed_window_days": self.seed_window_days,
            "heuristic_window_days": self.heuristic_window_days,
            "tau": self.tau,
            "char_limits": self.char_limits.to_record(),
            "emoji_lexicon_overrides": dict(self.emoji_lexicon_overrides),
            "mention_cooldown": self.mention_cooldown,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "ChannelConfig":
        data = dict(record)
        try:
            frequency = Frequency(data.get("frequency", Frequency.WEEKLY.value))
        except ValueError:
            raise InvalidInputError(f"unknown frequency: {data.get('frequency')!r}") from None
        limits = data.get("char_limits") or {}
        if isinstance(limits, CharLimits):
            char_limits = limits
        else:
            char_limits = CharLimits.from_record(limits)
        return cls(
            channel=data["channel"],
            frequency=frequency,
            seed_window_days=int(data.get("seed_window_days", 90)),
            heuristic_window_days=int(data.get("heuristic_window_days", 90)),
            tau=float(data.get("tau", 0.6)),
            char_limits=char_limits,
            emoji_lexicon_overrides=dict(data.get("emoji_lexicon_overrides") or {}),
            mention_cooldown=int(data.get("mention_cooldown", 3)),
        )

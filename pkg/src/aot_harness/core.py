"""Shared domain types and aggregation used by every other module. No I/O."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence


class TaskKind(enum.Enum):
    GAME24 = "game24"
    CROSSWORD = "crossword"
    COIN_CHANGE = "coin_change"
    EDIT_DISTANCE = "edit_distance"
    CREATIVE_WRITING = "creative_writing"
    BIAS_PROBE = "bias_probe"


@dataclass(frozen=True)
class TaskInstance:
    """One benchmark item plus whatever its verifier needs.

    The payload type depends on ``kind`` (a tuple of four ints for GAME24, a
    CrosswordInstance for CROSSWORD, and so on); ``source`` records where the
    item came from, e.g. a dataset index.
    """

    id: str
    kind: TaskKind
    payload: Any
    source: str = ""


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if not self.content:
            raise ValueError("ChatMessage content must be non-empty")


class Exactness(enum.Enum):
    """Whether token counts came verbatim from a backend or were estimated."""

    REPORTED = "reported"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int
    completion_tokens: int
    exactness: Exactness = Exactness.REPORTED

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        # Approximate never blends silently into Reported: it is contagious.
        exactness = (
            Exactness.REPORTED
            if self.exactness is Exactness.REPORTED
            and other.exactness is Exactness.REPORTED
            else Exactness.APPROXIMATE
        )
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
            exactness,
        )

    @staticmethod
    def approximate(prompt_chars: int, completion_chars: int) -> "TokenUsage":
        """Estimate usage as ceil(chars / 4) per side, flagged Approximate."""
        return TokenUsage(
            math.ceil(prompt_chars / 4),
            math.ceil(completion_chars / 4),
            Exactness.APPROXIMATE,
        )


ZERO_USAGE = TokenUsage(0, 0, Exactness.REPORTED)


class Strategy(enum.Enum):
    IO = "io"
    COT = "cot"
    COT_SC = "cot_sc"
    IO_REFINE = "io_refine"
    AOT = "aot"
    AOT_SHORT = "aot_short"
    AOT_LONG = "aot_long"
    AOT_RANDOM = "aot_random"
    AOT_BFS = "aot_bfs"
    TOT = "tot"
    ZERO_SHOT_STRATEGY = "zero_shot_strategy"


AOT_VARIANTS = frozenset(
    {Strategy.AOT, Strategy.AOT_SHORT, Strategy.AOT_LONG, Strategy.AOT_RANDOM, Strategy.AOT_BFS}
)


@dataclass(frozen=True)
class MethodConfig:
    strategy: Strategy
    samples: int = 100
    refine_limit: int = 10
    breadth: int = 5
    temperature: Fraction = Fraction(0)
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.samples < 1 or self.breadth < 1 or self.refine_limit < 1:
            raise ValueError("samples, breadth, and refine_limit must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        # Single-query property: AoT variants never fan out over samples.
        if self.strategy in AOT_VARIANTS and self.samples != 1:
            object.__setattr__(self, "samples", 1)


@dataclass(frozen=True)
class Outcome:
    """Result of running one method on one instance.

    ``score`` carries a task-specific scalar where success alone is too
    coarse: the crossword word success rate, or the mean coherency score of a
    passage. ``error_class`` is the string value of the task's error enum.
    """

    success: bool
    manual_resolution_success: bool
    usage: TokenUsage
    queries: int
    answer: Optional[str] = None
    error_class: Optional[str] = None
    score: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if self.queries < 1:
            raise ValueError("an attempted instance costs at least one query")
        if self.success and not self.manual_resolution_success:
            raise ValueError("success implies manual_resolution_success")


@dataclass(frozen=True)
class ReportRow:
    """Aggregates over a homogeneous list of outcomes (one method, one task)."""

    count: int
    success_rate: Fraction
    manual_resolution_rate: Fraction
    mean_queries: Fraction
    mean_prompt_tokens: Fraction
    mean_completion_tokens: Fraction
    exactness: Exactness
    error_histogram: dict[str, int] = field(default_factory=dict)
    mean_score: Optional[Fraction] = None


def aggregate(outcomes: Sequence[Outcome]) -> ReportRow:
    """Fold outcomes into rates and means.

    Rates are exact rationals; an empty input is an error rather than a NaN
    row. The usage exactness flag propagates: one Approximate outcome marks
    the whole row Approximate.
    """
    if not outcomes:
        raise ValueError("aggregate requires at least one outcome")
    n = len(outcomes)
    successes = sum(1 for o in outcomes if o.success)
    manual = sum(1 for o in outcomes if o.manual_resolution_success)
    total_usage = ZERO_USAGE
    for o in outcomes:
        total_usage = total_usage + o.usage
    histogram = Counter(o.error_class for o in outcomes if o.error_class is not None)
    scores = [o.score for o in outcomes if o.score is not None]
    return ReportRow(
        count=n,
        success_rate=Fraction(successes, n),
        manual_resolution_rate=Fraction(manual, n),
        mean_queries=Fraction(sum(o.queries for o in outcomes), n),
        mean_prompt_tokens=Fraction(total_usage.prompt_tokens, n),
        mean_completion_tokens=Fraction(total_usage.completion_tokens, n),
        exactness=total_usage.exactness,
        error_histogram=dict(histogram),
        mean_score=sum(scores, Fraction(0)) / len(scores) if scores else None,
    )


def percent(rate: Fraction) -> str:
    """Render a rate in [0, 1] as a percentage with one decimal place."""
    tenths = round(rate * 1000)
    return f"{tenths // 10}.{tenths % 10}%"


def render_mean(value: Fraction) -> str:
    """Render a mean: bare integer when exact, else one decimal place."""
    if value.denominator == 1:
        return str(value.numerator)
    tenths = round(value * 10)
    return f"{tenths // 10}.{tenths % 10}"

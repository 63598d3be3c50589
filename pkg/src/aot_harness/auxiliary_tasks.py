"""Oracles and verifiers for the secondary benchmarks: coin change, edit
distance, creative-writing passage checks, and the arithmetic bias probe."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .game24 import eval_expr, parse_expr


@dataclass(frozen=True)
class CoinChange:
    coins: tuple[int, ...]
    amount: int

    def __post_init__(self) -> None:
        if not self.coins:
            raise ValueError("coins must be non-empty")
        if any(c < 1 for c in self.coins):
            raise ValueError("coins must be positive")
        if self.amount < 0:
            raise ValueError("amount must be non-negative")


@dataclass(frozen=True)
class EditDistance:
    a: str
    b: str


DPProblem = Union[CoinChange, EditDistance]


@dataclass(frozen=True)
class DPInstance:
    problem: DPProblem
    expected: Optional[int]

    @staticmethod
    def from_problem(problem: DPProblem) -> "DPInstance":
        if isinstance(problem, CoinChange):
            return DPInstance(problem, coin_change_oracle(problem.coins, problem.amount))
        return DPInstance(problem, edit_distance_oracle(problem.a, problem.b))


def coin_change_oracle(coins: Sequence[int], amount: int) -> Optional[int]:
    """Minimum number of coins summing to amount, None if unreachable.

    This is the minimum-coin variant; counting the number of ways to make
    change is a different problem and out of scope. Classic tabulation.
    """
    if not coins or any(c < 1 for c in coins):
        raise ValueError("coins must be non-empty positive integers")
    if amount < 0:
        raise ValueError("amount must be non-negative")
    unreached = amount + 1
    table = [0] + [unreached] * amount
    for value in range(1, amount + 1):
        for coin in coins:
            if coin <= value and table[value - coin] + 1 < table[value]:
                table[value] = table[value - coin] + 1
    return None if table[amount] == unreached else table[amount]


def edit_distance_oracle(a: str, b: str) -> int:
    """Levenshtein distance: unit-cost insert, delete, substitute."""
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[len(b)]


_LAST_INT = re.compile(r"-?\d+")


def extract_final_integer(text: str) -> Optional[int]:
    """Last integer in a completion; DP answers are matched this way because
    no answer format is imposed on the model."""
    matches = _LAST_INT.findall(text)
    return int(matches[-1]) if matches else None


@dataclass(frozen=True)
class WritingInstance:
    end_sentences: tuple[str, str, str, str]

    def __post_init__(self) -> None:
        if len(self.end_sentences) != 4:
            raise ValueError("need exactly 4 end sentences")
        if any(not s.strip() for s in self.end_sentences):
            raise ValueError("end sentences must be non-empty")
        if len(set(self.end_sentences)) != 4:
            raise ValueError("end sentences must be distinct")


@dataclass(frozen=True)
class PassageCheck:
    passed: bool
    paragraph: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


PASSAGE_OK = PassageCheck(True)

_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")


def split_paragraphs(text: str) -> list[str]:
    return [p for p in (part.strip() for part in _PARAGRAPH_SPLIT.split(text)) if p]


def check_passage(text: str, instance: WritingInstance) -> PassageCheck:
    """Pass iff the text has exactly 4 paragraphs (split on blank lines) and
    paragraph k ends with end_sentences[k] after trimming trailing
    whitespace. Comparison is exact; a missing period is a failure."""
    paragraphs = split_paragraphs(text)
    if len(paragraphs) != 4:
        return PassageCheck(False, None, f"expected 4 paragraphs, found {len(paragraphs)}")
    for k, (paragraph, sentence) in enumerate(zip(paragraphs, instance.end_sentences), start=1):
        if not paragraph.rstrip().endswith(sentence):
            return PassageCheck(False, k, "paragraph does not end with the required sentence")
    return PASSAGE_OK


class ScoreParseError(ValueError):
    pass


_SCORE = re.compile(r"the coherency score is\s*(\d+)", re.IGNORECASE)


def parse_coherency_score(judge_text: str) -> int:
    """Extract the integer from the final "Thus the coherency score is s"
    statement. Raises ScoreParseError when absent or out of 1..10."""
    matches = _SCORE.findall(judge_text)
    if not matches:
        raise ScoreParseError("no coherency score statement found")
    score = int(matches[-1])
    if not 1 <= score <= 10:
        raise ScoreParseError(f"score {score} outside 1..10")
    return score


@dataclass(frozen=True)
class BiasProbeInstance:
    prefix_equations: tuple[str, ...]
    query: str
    correct_answer: int

    def __post_init__(self) -> None:
        shared: Optional[Fraction] = None
        for equation in self.prefix_equations:
            value, claimed = _split_equation(equation)
            if value != claimed:
                raise ValueError(f"prefix equation is false: {equation!r}")
            if shared is None:
                shared = value
            elif value != shared:
                raise ValueError("prefix equations must share one result value")
        true_answer = eval_expr(parse_expr(self.query.rstrip(" =")))
        if true_answer != self.correct_answer:
            raise ValueError("correct_answer must be the query's true value")
        if shared is not None and self.correct_answer == shared:
            raise ValueError("the query's answer must differ from the shared value")


def _split_equation(equation: str) -> tuple[Fraction, Fraction]:
    lhs, sep, rhs = equation.partition("=")
    if not sep:
        raise ValueError(f"not an equation: {equation!r}")
    return eval_expr(parse_expr(lhs)), Fraction(int(rhs.strip()))


def make_bias_probe(k: int, rng_seed: int) -> BiasProbeInstance:
    """Build k in-context equations that all evaluate to one shared value,
    plus a query whose true answer differs. Deterministic under the seed."""
    if k < 0:
        raise ValueError("k must be non-negative")
    rng = random.Random(rng_seed)
    shared = rng.randint(6, 20)
    equations = []
    for _ in range(k):
        if rng.random() < 0.5:
            b = rng.randint(1, shared - 1)
            equations.append(f"{shared - b} + {b} = {shared}")
        else:
            b = rng.randint(1, 10)
            equations.append(f"{shared + b} - {b} = {shared}")
    answer = shared
    while answer == shared:
        answer = rng.randint(2, 20)
    if rng.random() < 0.5:
        b = rng.randint(1, answer - 1)
        query = f"{answer - b} + {b} ="
    else:
        b = rng.randint(1, 10)
        query = f"{answer + b} - {b} ="
    return BiasProbeInstance(tuple(equations), query, answer)

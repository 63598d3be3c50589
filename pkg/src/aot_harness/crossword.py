"""5x5 mini-crossword board model: geometry, patterns, placement, scoring.

Boards are immutable; ``place`` returns a new board and is the only
constructor that guarantees the crossing-letter invariant. Scoring accepts
arbitrary boards on purpose: the words being scored are model claims, which
may be geometrically inconsistent, and the score must still be defined.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Optional

WILDCARD = "_"
SIZE = 5

_WORD = re.compile(r"^[a-z]{5}$")


@dataclass(frozen=True)
class Slot:
    """A horizontal (h1..h5) or vertical (v1..v5) word slot, 1-indexed."""

    direction: str
    index: int

    def __post_init__(self) -> None:
        if self.direction not in ("h", "v"):
            raise ValueError(f"direction must be 'h' or 'v', got {self.direction!r}")
        if not 1 <= self.index <= SIZE:
            raise ValueError(f"slot index must be in 1..{SIZE}, got {self.index}")

    def __str__(self) -> str:
        return f"{self.direction}{self.index}"

    @staticmethod
    def parse(text: str) -> "Slot":
        m = re.fullmatch(r"([hv])([1-5])", text.strip().lower())
        if m is None:
            raise ValueError(f"not a slot name: {text!r}")
        return Slot(m.group(1), int(m.group(2)))


def all_slots() -> Iterator[Slot]:
    for direction in ("h", "v"):
        for index in range(1, SIZE + 1):
            yield Slot(direction, index)


@dataclass(frozen=True)
class CrosswordInstance:
    clues_h: tuple[str, str, str, str, str]
    clues_v: tuple[str, str, str, str, str]
    solution: tuple[str, str, str, str, str]

    def __post_init__(self) -> None:
        if len(self.clues_h) != SIZE or len(self.clues_v) != SIZE:
            raise ValueError("need exactly 5 horizontal and 5 vertical clues")
        for row in self.solution:
            if not _WORD.fullmatch(row):
                raise ValueError(f"solution rows must be 5 lowercase letters: {row!r}")

    def solution_word(self, slot: Slot) -> str:
        if slot.direction == "h":
            return self.solution[slot.index - 1]
        return "".join(row[slot.index - 1] for row in self.solution)

    def clue(self, slot: Slot) -> str:
        clues = self.clues_h if slot.direction == "h" else self.clues_v
        return clues[slot.index - 1]


def clue_lines(instance: CrosswordInstance) -> list[str]:
    """The ten "h1. <clue>" lines in the canonical order."""
    return [f"{slot}. {instance.clue(slot)}" for slot in all_slots()]


def parse_instance(text: str) -> CrosswordInstance:
    """Parse the instance file format: ten "h1. <clue>" lines followed by a
    5-line solution grid of lowercase letters."""
    clues: dict[str, str] = {}
    grid: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        m = re.fullmatch(r"([hv][1-5])\.\s*(.+)", line)
        if m:
            clues[m.group(1)] = m.group(2).strip()
        else:
            grid.append(line.lower())
    missing = [str(s) for s in all_slots() if str(s) not in clues]
    if missing:
        raise ValueError(f"missing clues: {', '.join(missing)}")
    if len(grid) != SIZE:
        raise ValueError(f"expected a {SIZE}-line solution grid, got {len(grid)} lines")
    return CrosswordInstance(
        clues_h=tuple(clues[f"h{i}"] for i in range(1, SIZE + 1)),
        clues_v=tuple(clues[f"v{j}"] for j in range(1, SIZE + 1)),
        solution=tuple(grid),
    )


_EMPTY: tuple[Optional[str], ...] = (None,) * SIZE


@dataclass(frozen=True)
class BoardState:
    h_words: tuple[Optional[str], ...] = _EMPTY
    v_words: tuple[Optional[str], ...] = _EMPTY

    def word(self, slot: Slot) -> Optional[str]:
        words = self.h_words if slot.direction == "h" else self.v_words
        return words[slot.index - 1]

    def filled(self) -> list[Slot]:
        return [slot for slot in all_slots() if self.word(slot) is not None]


def board_from_words(words: dict[Slot, str]) -> BoardState:
    """Build a board directly from claimed words, without geometry checks."""
    h: list[Optional[str]] = list(_EMPTY)
    v: list[Optional[str]] = list(_EMPTY)
    for slot, word in words.items():
        target = h if slot.direction == "h" else v
        target[slot.index - 1] = word.lower()
    return BoardState(tuple(h), tuple(v))


def _cross_letter(word: Optional[str], position: int) -> str:
    # Claimed words of the wrong length contribute nothing to the pattern.
    if word is not None and len(word) == SIZE:
        return word[position]
    return WILDCARD


def extract_pattern(board: BoardState, slot: Slot) -> str:
    """Letters imposed on a slot by the filled words crossing it.

    Position k of h_i is constrained by letter i of v_k, and dually; an
    unfilled crossing contributes a wildcard. The slot's own current word
    does not participate.
    """
    if slot.direction == "h":
        return "".join(
            _cross_letter(self_v, slot.index - 1) for self_v in board.v_words
        )
    return "".join(_cross_letter(self_h, slot.index - 1) for self_h in board.h_words)


def fits(word: str, pattern: str) -> bool:
    """True iff the word matches every non-wildcard slot of the pattern."""
    if len(word) != SIZE:
        raise ValueError(f"words are {SIZE} letters, got {word!r}")
    if len(pattern) != SIZE:
        raise ValueError(f"patterns are {SIZE} slots, got {pattern!r}")
    word = word.lower()
    return all(p == WILDCARD or p == c for p, c in zip(pattern, word))


def pattern_spaced(pattern: str) -> str:
    """Render "lem__" in the spaced "l e m _ _" notation used in prompts."""
    return " ".join(pattern)


class PlacementError(ValueError):
    def __init__(self, slot: Slot, word: str, position: int, expected: str) -> None:
        if slot.direction == "h":
            row, col = slot.index, position + 1
        else:
            row, col = position + 1, slot.index
        super().__init__(
            f"cannot place {word!r} at {slot}: cell ({row}, {col}) "
            f"requires {expected!r}, word has {word[position]!r}"
        )
        self.slot = slot
        self.cell = (row, col)


def place(board: BoardState, slot: Slot, word: str) -> BoardState:
    """Fill a slot, enforcing agreement with every crossing word."""
    word = word.lower()
    pattern = extract_pattern(board, slot)
    if not fits(word, pattern):
        position = next(
            k for k, (p, c) in enumerate(zip(pattern, word)) if p != WILDCARD and p != c
        )
        raise PlacementError(slot, word, position, pattern[position])
    words = list(board.h_words if slot.direction == "h" else board.v_words)
    words[slot.index - 1] = word
    if slot.direction == "h":
        return replace(board, h_words=tuple(words))
    return replace(board, v_words=tuple(words))


def consistency_violations(board: BoardState) -> list[tuple[int, int, str, str]]:
    """Crossing-cell disagreements as (row i, col j, h letter, v letter)."""
    violations = []
    for i, h_word in enumerate(board.h_words, start=1):
        if h_word is None or len(h_word) != SIZE:
            continue
        for j, v_word in enumerate(board.v_words, start=1):
            if v_word is None or len(v_word) != SIZE:
                continue
            if h_word[j - 1] != v_word[i - 1]:
                violations.append((i, j, h_word[j - 1], v_word[i - 1]))
    return violations


def is_consistent(board: BoardState) -> bool:
    return not consistency_violations(board)


def claimed_word(board: BoardState, slot: Slot) -> Optional[str]:
    """The word a board claims for a slot: the stored word when present,
    otherwise the one spelled by the five crossing cells when all five are
    filled, otherwise nothing."""
    stored = board.word(slot)
    if stored is not None:
        return stored
    derived = extract_pattern(board, slot)
    if WILDCARD in derived:
        return None
    return derived


def word_success_rate(board: BoardState, instance: CrosswordInstance) -> Fraction:
    """Correct words out of the 10 slots.

    A slot counts only on exact match with the reference solution; a slot
    with neither a stored word nor fully-determined crossings is incorrect.
    The board is scored as claimed, even if geometrically inconsistent.
    """
    correct = sum(
        1
        for slot in all_slots()
        if claimed_word(board, slot) == instance.solution_word(slot)
    )
    return Fraction(correct, 10)

"""Tests for crossword geometry, placement, and scoring."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aot_harness.crossword import (
    BoardState,
    CrosswordInstance,
    PlacementError,
    Slot,
    all_slots,
    board_from_words,
    claimed_word,
    clue_lines,
    consistency_violations,
    extract_pattern,
    fits,
    is_consistent,
    parse_instance,
    pattern_spaced,
    place,
    word_success_rate,
)

# Worked solved grid: rows and the columns they induce.
ROWS = ("sawer", "uredo", "rater", "grama", "earal")
COLS = ("surge", "arara", "wetar", "edema", "roral")

INSTANCE = CrosswordInstance(
    clues_h=("one", "two", "three", "four", "five"),
    clues_v=("six", "seven", "eight", "nine", "ten"),
    solution=ROWS,
)


def full_board():
    board = BoardState()
    for i, word in enumerate(ROWS, start=1):
        board = place(board, Slot("h", i), word)
    for j, word in enumerate(COLS, start=1):
        board = place(board, Slot("v", j), word)
    return board


class TestSlot:
    def test_parse_and_str(self):
        assert str(Slot.parse("h2")) == "h2"
        assert Slot.parse(" V3 ") == Slot("v", 3)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            Slot.parse("h6")
        with pytest.raises(ValueError):
            Slot("x", 1)


class TestExtractPattern:
    def test_worked_column_pattern(self):
        board = board_from_words(
            {Slot("h", 1): "rille", Slot("h", 2): "olein", Slot("h", 3): "tempt"}
        )
        assert extract_pattern(board, Slot("v", 3)) == "lem__"
        assert pattern_spaced("lem__") == "l e m _ _"

    def test_empty_board(self):
        assert extract_pattern(BoardState(), Slot("h", 4)) == "_____"

    def test_full_board_pattern_is_solution(self):
        board = full_board()
        for slot in all_slots():
            assert extract_pattern(board, slot) == INSTANCE.solution_word(slot)

    def test_own_word_does_not_constrain(self):
        board = board_from_words({Slot("h", 2): "olein"})
        assert extract_pattern(board, Slot("h", 2)) == "_____"


class TestFits:
    def test_prompt_examples(self):
        assert fits("leman", "lem__")
        assert not fits("olive", "_l__n")

    def test_all_wildcards(self):
        assert fits("qqqqq", "_____")

    def test_uppercase_normalized(self):
        assert fits("LEMAN", "lem__")

    def test_length_checked(self):
        with pytest.raises(ValueError):
            fits("long words", "_____")


class TestPlace:
    def test_appendix_order_builds_consistent_board(self):
        board = BoardState()
        for i, word in enumerate(ROWS, start=1):
            board = place(board, Slot("h", i), word)
        for j, word in enumerate(COLS[:4], start=1):
            board = place(board, Slot("v", j), word)
        assert is_consistent(board)
        assert board.word(Slot("v", 5)) is None

    def test_misfit_names_conflicting_cell(self):
        board = board_from_words({Slot("v", 1): "lipsd"})
        # h1 crosses v1 at cell (1, 1): pattern is "l____".
        with pytest.raises(PlacementError) as exc:
            place(board, Slot("h", 1), "sawer")
        assert exc.value.cell == (1, 1)

    def test_empty_board_always_accepts(self):
        assert place(BoardState(), Slot("v", 5), "roral").word(Slot("v", 5)) == "roral"

    def test_overwrite_must_still_fit_crossings(self):
        board = place(BoardState(), Slot("h", 1), "sawer")
        board = place(board, Slot("v", 1), "surge")
        board = place(board, Slot("h", 1), "socko")
        assert board.word(Slot("h", 1)) == "socko"
        with pytest.raises(PlacementError):
            place(board, Slot("h", 1), "axxxx")


class TestConsistency:
    def test_solved_grid_passes(self):
        assert consistency_violations(full_board()) == []

    def test_violation_reported_with_cell(self):
        board = board_from_words({Slot("h", 1): "sawer", Slot("v", 1): "turge"})
        assert consistency_violations(board) == [(1, 1, "s", "t")]


class TestScoring:
    def test_full_board(self):
        assert word_success_rate(full_board(), INSTANCE) == 1

    def test_empty_board(self):
        assert word_success_rate(BoardState(), INSTANCE) == 0

    def test_missing_word_derived_from_crossings(self):
        words = {Slot("h", i): w for i, w in enumerate(ROWS, start=1)}
        words.update({Slot("v", j): w for j, w in enumerate(COLS[:4], start=1)})
        board = board_from_words(words)
        assert claimed_word(board, Slot("v", 5)) == "roral"
        assert word_success_rate(board, INSTANCE) == 1

    def test_underdetermined_missing_word_is_incorrect(self):
        words = {Slot("h", i): w for i, w in enumerate(ROWS[:4], start=1)}
        board = board_from_words(words)
        # v slots have only 4 of 5 crossing letters; all count incorrect.
        assert word_success_rate(board, INSTANCE) == Fraction(4, 10)

    def test_single_mutation_scores_nine_of_ten(self):
        words = {Slot("h", i): w for i, w in enumerate(ROWS, start=1)}
        words.update({Slot("v", j): w for j, w in enumerate(COLS[:4], start=1)})
        words[Slot("h", 3)] = "qater"
        board = board_from_words(words)
        assert word_success_rate(board, INSTANCE) == Fraction(9, 10)

    def test_stored_word_wins_over_crossings(self):
        words = {Slot("h", i): w for i, w in enumerate(ROWS, start=1)}
        words.update({Slot("v", j): w for j, w in enumerate(COLS, start=1)})
        words[Slot("v", 5)] = "qoral"
        board = board_from_words(words)
        # The crossings spell the correct word, but the claim is scored.
        assert word_success_rate(board, INSTANCE) == Fraction(9, 10)


class TestInstanceParsing:
    TEXT = "\n".join(
        [f"h{i}. clue {i}" for i in range(1, 6)]
        + [f"v{j}. clue v{j}" for j in range(1, 6)]
        + list(ROWS)
    )

    def test_round_trip(self):
        instance = parse_instance(self.TEXT)
        assert instance.solution == ROWS
        assert instance.clue(Slot("v", 2)) == "clue v2"
        assert instance.solution_word(Slot("v", 5)) == "roral"
        assert clue_lines(instance)[0] == "h1. clue 1"

    def test_missing_clue_rejected(self):
        with pytest.raises(ValueError):
            parse_instance(self.TEXT.replace("v5. clue v5\n", ""))

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            parse_instance(self.TEXT.replace("earal", "ear4l"))


letters = st.sampled_from("abcdefghijklmnopqrstuvwxyz")
grids = st.lists(st.text(letters, min_size=5, max_size=5), min_size=5, max_size=5)


@st.composite
def grid_and_order(draw):
    grid = draw(grids)
    slots = list(all_slots())
    order = draw(st.permutations(slots))
    prefix = draw(st.integers(min_value=0, max_value=len(slots)))
    return grid, order[:prefix]


class TestProperties:
    @given(grid_and_order())
    def test_placement_sequences_stay_consistent(self, case):
        grid, order = case
        instance_words = {slot: _grid_word(grid, slot) for slot in all_slots()}
        board = BoardState()
        for slot in order:
            board = place(board, slot, instance_words[slot])
        assert is_consistent(board)

    @given(grid_and_order())
    def test_patterns_only_gain_letters(self, case):
        grid, order = case
        instance_words = {slot: _grid_word(grid, slot) for slot in all_slots()}
        board = BoardState()
        for slot in order:
            before = {s: extract_pattern(board, s) for s in all_slots()}
            board = place(board, slot, instance_words[slot])
            for s in all_slots():
                after = extract_pattern(board, s)
                for p, q in zip(before[s], after):
                    assert p == "_" or p == q

    @given(grid_and_order(), st.text(letters, min_size=5, max_size=5))
    def test_fits_iff_place_succeeds(self, case, word):
        grid, order = case
        instance_words = {slot: _grid_word(grid, slot) for slot in all_slots()}
        board = BoardState()
        for slot in order:
            board = place(board, slot, instance_words[slot])
        for slot in all_slots():
            should_fit = fits(word, extract_pattern(board, slot))
            try:
                place(board, slot, word)
                placed = True
            except PlacementError:
                placed = False
            assert placed == should_fit


def _grid_word(grid, slot):
    if slot.direction == "h":
        return grid[slot.index - 1]
    return "".join(row[slot.index - 1] for row in grid)

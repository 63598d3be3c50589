"""Tests for the Game of 24 oracle, validator, and reference solvers."""

import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aot_harness.game24 import (
    DfsPolicy,
    ExprParseError,
    InvalidReason,
    Leaf,
    Node,
    Op,
    count_distinct_expressions,
    eval_expr,
    expr_leaves,
    operation_steps,
    oracle_solve,
    parse_expr,
    reference_bfs,
    reference_dfs,
    render_expr,
    strip_target,
    two_number_check,
    validate_answer,
)

APPENDIX_GAMES = [
    (14, 8, 8, 2),
    (9, 5, 5, 5),
    (8, 6, 4, 4),
    (13, 10, 9, 4),
    (8, 8, 5, 4),
    (11, 11, 1, 1),
    (11, 7, 4, 1),
    (11, 5, 4, 3),
    (13, 12, 5, 2),
    (9, 8, 2, 1),
]


def solvable_by_enumeration(numbers):
    """Independent ground truth: try every leaf order, tree shape, and
    operator assignment. Shares no code with oracle_solve."""

    def all_trees(values):
        if len(values) == 1:
            yield Fraction(values[0])
            return
        for split in range(1, len(values)):
            for lv in all_trees(values[:split]):
                for rv in all_trees(values[split:]):
                    yield lv + rv
                    yield lv - rv
                    yield lv * rv
                    if rv != 0:
                        yield lv / rv

    for perm in set(itertools.permutations(numbers)):
        for value in all_trees(list(perm)):
            if value == 24:
                return True
    return False


class TestParse:
    def test_answer_line_shape(self):
        e = parse_expr("(14 - 8) * (8 / 2) = 24")
        assert e == Node(
            Op.MUL,
            Node(Op.SUB, Leaf(Fraction(14)), Leaf(Fraction(8))),
            Node(Op.DIV, Leaf(Fraction(8)), Leaf(Fraction(2))),
        )

    def test_single_leaf(self):
        assert parse_expr("24") == Leaf(Fraction(24))

    def test_nested(self):
        e = parse_expr("8 * (5 - (8 / 4)) = 24")
        assert e == Node(
            Op.MUL,
            Leaf(Fraction(8)),
            Node(Op.SUB, Leaf(Fraction(5)), Node(Op.DIV, Leaf(Fraction(8)), Leaf(Fraction(4)))),
        )

    def test_precedence(self):
        assert eval_expr(parse_expr("2 + 3 * 4")) == 14

    def test_left_associative(self):
        assert eval_expr(parse_expr("8 - 2 - 1")) == 5
        assert eval_expr(parse_expr("24 / 4 / 2")) == 3

    def test_trailing_period_without_target_rejected(self):
        with pytest.raises(ExprParseError):
            parse_expr("8 + 8.")

    def test_error_carries_offset(self):
        with pytest.raises(ExprParseError) as exc:
            parse_expr("8 + ")
        assert exc.value.offset == 4

    def test_unbalanced_paren(self):
        with pytest.raises(ExprParseError):
            parse_expr("(8 + 8")

    def test_strip_target(self):
        assert strip_target("6 * 4 = 24.") == ("6 * 4", True)
        assert strip_target("6 * 4") == ("6 * 4", False)


class TestEval:
    def test_exact_fraction(self):
        assert eval_expr(Node(Op.DIV, Leaf(Fraction(5)), Leaf(Fraction(2)))) == Fraction(5, 2)

    def test_prompt_line(self):
        e = Node(Op.SUB, Leaf(Fraction(5)), Node(Op.DIV, Leaf(Fraction(8)), Leaf(Fraction(4))))
        assert eval_expr(e) == 3

    def test_division_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            eval_expr(Node(Op.DIV, Leaf(Fraction(8)), Leaf(Fraction(0))))


class TestValidateAnswer:
    def test_appendix_answers(self):
        assert validate_answer("(4 + (8 - 6)) * 4 = 24", (8, 6, 4, 4)).valid
        assert validate_answer("(6 - 4) * (4 + 8) = 24", (4, 4, 6, 8)).valid

    def test_wrong_numbers(self):
        v = validate_answer("(14 - 8) * (8 / 2) = 24", (14, 8, 2, 2))
        assert not v.valid and v.reason is InvalidReason.WRONG_NUMBERS

    def test_wrong_value(self):
        v = validate_answer("8 + 6 + 4 + 4", (8, 6, 4, 4))
        assert not v.valid and v.reason is InvalidReason.WRONG_VALUE

    def test_parse_error(self):
        v = validate_answer("8 + * 6", (8, 6, 4, 4))
        assert not v.valid and v.reason is InvalidReason.PARSE_ERROR

    def test_division_by_zero(self):
        v = validate_answer("24 / (4 - 4) + 8", (24, 4, 4, 8))
        assert not v.valid and v.reason is InvalidReason.DIVISION_BY_ZERO

    def test_accepts_full_answer_line(self):
        assert validate_answer("answer: (14 - 8) * (8 / 2) = 24.", (14, 8, 8, 2)).valid

    def test_requires_four_numbers(self):
        with pytest.raises(ValueError):
            validate_answer("24", (24,))


class TestTwoNumberCheck:
    def test_system_prompt_examples(self):
        assert two_number_check(21, 2) is None
        hit = two_number_check(30, 6)
        assert hit is not None and hit.op is Op.SUB and str(hit) == "30 - 6 = 24"
        hit = two_number_check(48, 2)
        assert hit is not None and hit.op is Op.DIV and str(hit) == "48 / 2 = 24"

    def test_multiplication(self):
        hit = two_number_check(8, 3)
        assert hit is not None and hit.op is Op.MUL

    def test_candidate_order_is_fixed(self):
        # 12 + 12 and 12 * 2 both reach 24 from (12, 12)? No: use (12, 2):
        # neither + nor - hits, * hits before /.
        hit = two_number_check(12, 2)
        assert hit is not None and hit.op is Op.MUL
        # (48, 24): 48 - 24 hits before 48 / 2... division would too (48/2
        # is not this pair); subtraction is checked first.
        hit = two_number_check(48, 24)
        assert hit is not None and hit.op is Op.SUB and str(hit) == "48 - 24 = 24"

    def test_zero_divisor_skipped(self):
        # Both divisions are undefined here; the check skips them quietly.
        assert two_number_check(0, 0) is None
        hit = two_number_check(Fraction(0), Fraction(24))
        assert hit is not None and hit.op is Op.ADD

    @given(
        st.fractions(min_value=-100, max_value=100, max_denominator=12),
        st.fractions(min_value=-100, max_value=100, max_denominator=12),
    )
    def test_hit_presence_symmetric_under_swap(self, a, b):
        assert (two_number_check(a, b) is None) == (two_number_check(b, a) is None)


class TestOracle:
    def test_appendix_games_all_solvable(self):
        for game in APPENDIX_GAMES:
            solution = oracle_solve(game)
            assert solution is not None, game
            assert validate_answer(render_expr(solution), game).valid

    def test_unsolvable(self):
        assert oracle_solve((1, 1, 1, 1)) is None

    def test_worked_example(self):
        assert oracle_solve((8, 8, 5, 4)) is not None

    def test_agrees_with_independent_enumeration(self):
        rng = random.Random(7)
        games = [tuple(rng.randint(1, 13) for _ in range(4)) for _ in range(40)]
        for game in games:
            assert (oracle_solve(game) is not None) == solvable_by_enumeration(game), game

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            oracle_solve((1, 2, 3))
        with pytest.raises(ValueError):
            oracle_solve((-1, 2, 3, 4))


class TestReferenceDfs:
    def test_appendix_game_found(self):
        stats = reference_dfs((8, 6, 4, 4))
        assert stats.found and stats.solution is not None
        assert validate_answer(render_expr(stats.solution), (8, 6, 4, 4)).valid

    def test_unsolvable_counts_nodes(self):
        stats = reference_dfs((1, 1, 1, 1))
        assert not stats.found and stats.solution is None
        assert stats.nodes_visited > 0

    def test_deterministic(self):
        for game in APPENDIX_GAMES:
            first = reference_dfs(game)
            second = reference_dfs(game)
            assert first == second

    def test_pruning_off_matches_oracle(self):
        rng = random.Random(24)
        policy = DfsPolicy(prune_negative=False, prune_fractional=False)
        for _ in range(50):
            game = tuple(rng.randint(1, 13) for _ in range(4))
            stats = reference_dfs(game, policy)
            assert stats.found == (oracle_solve(game) is not None), game
            if stats.found:
                assert validate_answer(render_expr(stats.solution), game).valid

    def test_pruned_run_never_beats_oracle(self):
        rng = random.Random(11)
        for _ in range(30):
            game = tuple(rng.randint(1, 13) for _ in range(4))
            if reference_dfs(game).found:
                assert oracle_solve(game) is not None


class TestReferenceBfs:
    def test_exhaustive_matches_oracle(self):
        stats = reference_bfs((9, 5, 5, 5), math.inf)
        assert stats.found
        rng = random.Random(3)
        for _ in range(15):
            game = tuple(rng.randint(1, 13) for _ in range(4))
            stats = reference_bfs(game, math.inf)
            assert stats.found == (oracle_solve(game) is not None), game

    def test_beam_five_solves_worked_example(self):
        stats = reference_bfs((8, 8, 5, 4), 5)
        assert stats.found
        assert validate_answer(render_expr(stats.solution), (8, 8, 5, 4)).valid

    def test_narrow_beam_can_miss(self):
        rng = random.Random(5)
        missed = 0
        for _ in range(40):
            game = tuple(rng.randint(1, 13) for _ in range(4))
            if oracle_solve(game) is not None and not reference_bfs(game, 1).found:
                missed += 1
        assert missed > 0

    def test_counts_all_generated_children(self):
        wide = reference_bfs((8, 6, 4, 4), math.inf)
        narrow = reference_bfs((8, 6, 4, 4), 1)
        assert 0 < narrow.nodes_visited < wide.nodes_visited

    def test_rejects_bad_breadth(self):
        with pytest.raises(ValueError):
            reference_bfs((8, 6, 4, 4), 0)


class TestCountDistinctExpressions:
    def test_single_number(self):
        assert count_distinct_expressions(1) == 1

    def test_two_numbers(self):
        assert count_distinct_expressions(2) == 8

    def test_four_numbers_in_documented_band(self):
        assert 10_000 <= count_distinct_expressions(4) <= 20_000

    def test_matches_closed_forms(self):
        # Sequential-combination count: ordered pair * op at each level.
        assert count_distinct_expressions(4, "complete") == (4 * 3 * 4) * (3 * 2 * 4) * (2 * 1 * 4)
        assert count_distinct_expressions(4, "all") == 48 + 48 * 24 + 48 * 24 * 8
        # Tree count: leaf permutations * Catalan(3) shapes * op assignments.
        assert count_distinct_expressions(4, "trees") == math.factorial(4) * 5 * 4**3

    def test_conventions_ordered(self):
        for n in (2, 3, 4):
            trees = count_distinct_expressions(n, "trees")
            complete = count_distinct_expressions(n, "complete")
            assert trees <= complete <= count_distinct_expressions(n, "all")

    def test_rejects_unknown_convention(self):
        with pytest.raises(ValueError):
            count_distinct_expressions(4, "ordered")


class TestOperationSteps:
    def test_post_order(self):
        e = parse_expr("(14 - 8) * (8 / 2)")
        steps = [str(s) for s in operation_steps(e)]
        assert steps == ["14 - 8 = 6", "8 / 2 = 4", "6 * 4 = 24"]


integers = st.integers(min_value=1, max_value=13)


@st.composite
def expr_trees(draw, depth=0):
    if depth >= 3 or draw(st.booleans()):
        return Leaf(Fraction(draw(integers)))
    op = draw(st.sampled_from(list(Op)))
    left = draw(expr_trees(depth=depth + 1))
    right = draw(expr_trees(depth=depth + 1))
    return Node(op, left, right)


class TestProperties:
    @given(expr_trees())
    def test_print_parse_round_trip(self, e):
        parsed = parse_expr(render_expr(e))
        assert parsed == e
        assert expr_leaves(parsed) == expr_leaves(e)

    @given(st.lists(integers, min_size=4, max_size=4))
    @settings(max_examples=60, deadline=None)
    def test_oracle_solution_always_validates(self, numbers):
        solution = oracle_solve(numbers)
        if solution is not None:
            assert validate_answer(render_expr(solution) + " = 24", numbers).valid

    @given(st.lists(integers, min_size=4, max_size=4))
    @settings(max_examples=30, deadline=None)
    def test_dfs_solution_validates_and_is_deterministic(self, numbers):
        stats = reference_dfs(numbers)
        assert stats == reference_dfs(numbers)
        if stats.found:
            assert validate_answer(render_expr(stats.solution), numbers).valid

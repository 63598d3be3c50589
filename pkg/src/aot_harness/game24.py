"""Game of 24: exact arithmetic, answer validation, and reference solvers.

Everything here is pure and exact. Values are ``fractions.Fraction`` so that
"equals 24" and "is fractional" are decided by arithmetic, never by epsilon
comparison. The module provides three solvers with different contracts:

* ``oracle_solve`` is the ground truth: exhaustive, allows fractional and
  negative intermediates, finds a solution iff one exists.
* ``reference_dfs`` mirrors the depth-first strategy described to the model:
  by default it refuses operations that produce negative or fractional
  numbers, and it counts the states it enters.
* ``reference_bfs`` is a beam search over the same state space with a
  closeness-to-24 heuristic, for query-free breadth comparisons.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence, Union

RationalLike = Union[int, Fraction]


class Op(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"

    def apply(self, a: Fraction, b: Fraction) -> Fraction:
        if self is Op.ADD:
            return a + b
        if self is Op.SUB:
            return a - b
        if self is Op.MUL:
            return a * b
        return a / b


@dataclass(frozen=True)
class Leaf:
    value: Fraction

    def __str__(self) -> str:
        return _format_rational(self.value)


@dataclass(frozen=True)
class Node:
    op: Op
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} {self.op.value} {_wrap(self.right)}"


Expr = Union[Leaf, Node]


def _format_rational(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _wrap(e: Expr) -> str:
    return f"({e})" if isinstance(e, Node) else str(e)


def render_expr(e: Expr) -> str:
    """Print an expression with every compound subterm parenthesized."""
    return str(e)


def expr_leaves(e: Expr) -> list[Fraction]:
    """Leaf values in left-to-right order."""
    if isinstance(e, Leaf):
        return [e.value]
    return expr_leaves(e.left) + expr_leaves(e.right)


@dataclass(frozen=True)
class OperationStep:
    left: Fraction
    op: Op
    right: Fraction
    value: Fraction

    def __str__(self) -> str:
        return (
            f"{_format_rational(self.left)} {self.op.value} "
            f"{_format_rational(self.right)} = {_format_rational(self.value)}"
        )


def operation_steps(e: Expr) -> list[OperationStep]:
    """Post-order list of the arithmetic steps an expression performs."""
    steps: list[OperationStep] = []

    def walk(node: Expr) -> Fraction:
        if isinstance(node, Leaf):
            return node.value
        a = walk(node.left)
        b = walk(node.right)
        v = node.op.apply(a, b)
        steps.append(OperationStep(a, node.op, b, v))
        return v

    walk(e)
    return steps


def answer_line(solution: Expr) -> str:
    """The closing "answer: <expression> = 24." line for a solved game."""
    return f"answer: {render_expr(solution)} = 24."


def _render_collapsed(e: Expr, collapsed: frozenset[int]) -> str:
    """Render ``e`` with the subtrees whose ids appear in ``collapsed``
    replaced by their numeric values."""

    def walk(node: Expr) -> tuple[str, bool]:
        if isinstance(node, Leaf):
            return str(node), True
        if id(node) in collapsed:
            return _format_rational(eval_expr(node)), True
        left_text, left_atomic = walk(node.left)
        right_text, right_atomic = walk(node.right)
        left_text = left_text if left_atomic else f"({left_text})"
        right_text = right_text if right_atomic else f"({right_text})"
        return f"{left_text} {node.op.value} {right_text}", False

    text, _ = walk(e)
    return text


def considering_chain(solution: Expr, executed: Sequence[Expr]) -> str:
    """The one-line summary that rewrites 24 back into the full expression,
    expanding one executed operation per hop, last operation first.

    ``executed`` lists the internal nodes of ``solution`` (the same objects)
    in the order the operations were performed; the final entry is the root.
    Every hop is itself a valid expression equal to 24.
    """
    if not executed:
        raise ValueError("need at least one executed operation")
    if executed[-1] is not solution:
        raise ValueError("the last executed operation must be the root")
    items = [
        _render_collapsed(solution, frozenset(map(id, executed[: len(executed) - 1 - j])))
        for j in range(len(executed))
    ]
    return f"Considering these steps: 24 = {' = '.join(items)} = 24."


class ExprParseError(ValueError):
    """Malformed expression text; ``offset`` is the failing position."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_TARGET_SUFFIX = re.compile(r"\s*=\s*24\s*\.?\s*$")
_ANSWER_PREFIX = re.compile(r"^\s*answer:\s*", re.IGNORECASE)


def strip_target(text: str) -> tuple[str, bool]:
    """Remove a trailing "= 24" (with optional final period) if present."""
    m = _TARGET_SUFFIX.search(text)
    if m:
        return text[: m.start()], True
    return text, False


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self) -> Expr:
        node = self.term()
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == "+" or ch == "-":
                self.pos += 1
                node = Node(Op.ADD if ch == "+" else Op.SUB, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == "*" or ch == "/":
                self.pos += 1
                node = Node(Op.MUL if ch == "*" else Op.DIV, node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        self.skip_ws()
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.skip_ws()
            if self.peek() != ")":
                raise ExprParseError("expected ')'", self.pos)
            self.pos += 1
            return node
        if "0" <= ch <= "9":  # str.isdigit admits superscripts that int rejects
            start = self.pos
            while self.pos < len(self.text) and "0" <= self.text[self.pos] <= "9":
                self.pos += 1
            return Leaf(Fraction(int(self.text[start : self.pos])))
        raise ExprParseError("expected integer or '('", self.pos)


def parse_expr(text: str) -> Expr:
    """Parse infix arithmetic over integers, ``+ - * /`` and parentheses.

    A trailing "= 24" (optionally followed by a period) is accepted and
    stripped. Raises ExprParseError with the failing offset otherwise.
    """
    body, _ = strip_target(text)
    parser = _Parser(body)
    node = parser.expr()
    parser.skip_ws()
    if parser.pos != len(body):
        raise ExprParseError("unexpected trailing input", parser.pos)
    return node


def eval_expr(e: Expr) -> Fraction:
    """Exact value of an expression. Division by zero raises ZeroDivisionError."""
    if isinstance(e, Leaf):
        return e.value
    return e.op.apply(eval_expr(e.left), eval_expr(e.right))


class InvalidReason(enum.Enum):
    PARSE_ERROR = "ParseError"
    WRONG_NUMBERS = "WrongNumbers"
    WRONG_VALUE = "WrongValue"
    DIVISION_BY_ZERO = "DivisionByZero"


@dataclass(frozen=True)
class Validation:
    valid: bool
    reason: Optional[InvalidReason] = None

    def __bool__(self) -> bool:
        return self.valid


VALID = Validation(True)


def validate_answer(text: str, numbers: Sequence[int]) -> Validation:
    """Check an answer expression against the instance's four numbers.

    Valid iff the text parses, its leaves are exactly ``numbers`` as a
    multiset, and it evaluates to 24. Accepts either the bare expression or
    a full "answer: ..." line; the "= 24" suffix is optional either way.
    """
    if len(numbers) != 4:
        raise ValueError("a Game of 24 instance has exactly 4 numbers")
    body = _ANSWER_PREFIX.sub("", text)
    try:
        expr = parse_expr(body)
    except ExprParseError:
        return Validation(False, InvalidReason.PARSE_ERROR)
    if sorted(expr_leaves(expr)) != sorted(Fraction(n) for n in numbers):
        return Validation(False, InvalidReason.WRONG_NUMBERS)
    try:
        value = eval_expr(expr)
    except ZeroDivisionError:
        return Validation(False, InvalidReason.DIVISION_BY_ZERO)
    if value != 24:
        return Validation(False, InvalidReason.WRONG_VALUE)
    return VALID


@dataclass(frozen=True)
class TwoNumberHit:
    op: Op
    left: Fraction
    right: Fraction

    def __str__(self) -> str:
        return (
            f"{_format_rational(self.left)} {self.op.value} "
            f"{_format_rational(self.right)} = 24"
        )


def two_number_check(a: RationalLike, b: RationalLike) -> Optional[TwoNumberHit]:
    """First of a+b, a-b, b-a, a*b, a/b, b/a equal to 24, else None.

    The candidate order is fixed; zero-divisor divisions are skipped rather
    than errors.
    """
    fa, fb = Fraction(a), Fraction(b)
    candidates = [
        (Op.ADD, fa, fb),
        (Op.SUB, fa, fb),
        (Op.SUB, fb, fa),
        (Op.MUL, fa, fb),
        (Op.DIV, fa, fb),
        (Op.DIV, fb, fa),
    ]
    for op, x, y in candidates:
        if op is Op.DIV and y == 0:
            continue
        if op.apply(x, y) == 24:
            return TwoNumberHit(op, x, y)
    return None


_Item = tuple[Fraction, Expr]


def _check_game_numbers(numbers: Sequence[int]) -> list[Fraction]:
    if len(numbers) != 4:
        raise ValueError("a Game of 24 instance has exactly 4 numbers")
    if any(n < 0 for n in numbers):
        raise ValueError("instance numbers must be non-negative")
    return [Fraction(n) for n in numbers]


def _pair_candidates(
    a: Fraction, b: Fraction, *, prune_negative: bool, prune_fractional: bool
) -> Iterator[tuple[Op, Fraction, Fraction, Fraction]]:
    """Operations on an ordered pair a >= b, in the fixed candidate order.

    Yields (op, left, right, value). With both prunes off this is complete:
    every value reachable from the pair appears (zero divisors excluded).
    Swapped subtraction/division are omitted when a == b since they would
    duplicate a candidate already yielded.
    """
    yield (Op.ADD, a, b, a + b)
    yield (Op.SUB, a, b, a - b)
    if not prune_negative and a != b:
        yield (Op.SUB, b, a, b - a)
    yield (Op.MUL, a, b, a * b)
    if b != 0:
        q = a / b
        if not prune_fractional or q.denominator == 1:
            yield (Op.DIV, a, b, q)
    if a != 0 and a != b:
        q = b / a
        if not prune_fractional or q.denominator == 1:
            yield (Op.DIV, b, a, q)


def _sorted_state(items: Iterable[_Item]) -> list[_Item]:
    return sorted(items, key=lambda it: it[0], reverse=True)


def _combine(
    state: list[_Item], i: int, j: int, op: Op, left: Fraction, right: Fraction, value: Fraction
) -> tuple[list[_Item], Node]:
    (va, ea), (vb, eb) = state[i], state[j]
    # The candidate's operand order may be (a, b) or the swapped (b, a).
    if left == va:
        node = Node(op, ea, eb)
    else:
        node = Node(op, eb, ea)
    rest = [state[k] for k in range(len(state)) if k not in (i, j)]
    return _sorted_state(rest + [(value, node)]), node


def _resolve_pair(state: list[_Item]) -> Optional[Expr]:
    (va, ea), (vb, eb) = state
    hit = two_number_check(va, vb)
    if hit is None:
        return None
    if hit.left == va:
        return Node(hit.op, ea, eb)
    return Node(hit.op, eb, ea)


@dataclass(frozen=True)
class SolverStats:
    nodes_visited: int
    found: bool
    solution: Optional[Expr] = None

    def __post_init__(self) -> None:
        if self.nodes_visited < 0:
            raise ValueError("nodes_visited must be non-negative")
        if self.found != (self.solution is not None):
            raise ValueError("found must match the presence of a solution")


def oracle_solve(numbers: Sequence[int]) -> Optional[Expr]:
    """Ground-truth solver: exhaustive, fractional and negative
    intermediates allowed. Returns some solution iff one exists."""
    values = _check_game_numbers(numbers)
    state: list[_Item] = [(v, Leaf(v)) for v in values]

    def search(items: list[_Item]) -> Optional[Expr]:
        if len(items) == 1:
            value, expr = items[0]
            return expr if value == 24 else None
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                (va, ea), (vb, eb) = items[i], items[j]
                rest = [items[k] for k in range(len(items)) if k not in (i, j)]
                for op, x, y, ex, ey in (
                    (Op.ADD, va, vb, ea, eb),
                    (Op.SUB, va, vb, ea, eb),
                    (Op.SUB, vb, va, eb, ea),
                    (Op.MUL, va, vb, ea, eb),
                    (Op.DIV, va, vb, ea, eb),
                    (Op.DIV, vb, va, eb, ea),
                ):
                    if op is Op.DIV and y == 0:
                        continue
                    candidate = rest + [(op.apply(x, y), Node(op, ex, ey))]
                    found = search(candidate)
                    if found is not None:
                        return found
        return None

    return search(state)


@dataclass(frozen=True)
class DfsPolicy:
    """Pruning switches for reference_dfs; both ON mirrors the instruction
    not to create negative or fractional numbers."""

    prune_negative: bool = True
    prune_fractional: bool = True


@dataclass(frozen=True)
class DfsStep:
    """One candidate operation considered by the reference depth-first search.

    ``pruned`` names the policy's reason for skipping the candidate
    ("negative" or "fractional"); it is None for candidates that were entered.
    Entered candidates carry the child state values (descending) and, when the
    child has two numbers, the arithmetic check results as (op, value) pairs
    in + - * / order, truncated at the first 24. ``expr`` is the subexpression
    the operation builds; ``solution`` is the full solved tree on the step
    that closes the game, which is also the last step of the stream.
    """

    depth: int
    left: Fraction
    op: Op
    right: Fraction
    value: Fraction
    swapped: bool
    pruned: Optional[str] = None
    state_after: tuple[Fraction, ...] = ()
    checks: tuple[tuple[Op, Fraction], ...] = ()
    hit: Optional[TwoNumberHit] = None
    expr: Optional[Expr] = None
    solution: Optional[Expr] = None


def _two_number_display(u: Fraction, v: Fraction) -> tuple[tuple[Op, Fraction], ...]:
    results = []
    for op in (Op.ADD, Op.SUB, Op.MUL, Op.DIV):
        if op is Op.DIV and v == 0:
            continue
        results.append((op, op.apply(u, v)))
    return tuple(results)


def dfs_events(numbers: Sequence[int], policy: Optional[DfsPolicy] = None) -> Iterator[DfsStep]:
    """Every candidate the reference depth-first search considers, pruned
    ones included, in visit order. reference_dfs and the trace renderer both
    consume this stream, so node counts and rendered text agree by
    construction. The stream stops right after the solving step."""
    if policy is None:
        policy = DfsPolicy()
    values = _check_game_numbers(numbers)
    root = _sorted_state((v, Leaf(v)) for v in values)

    def prune_reason(value: Fraction) -> Optional[str]:
        if policy.prune_negative and value < 0:
            return "negative"
        if policy.prune_fractional and value.denominator != 1:
            return "fractional"
        return None

    def search(state: list[_Item], depth: int) -> Iterator[DfsStep]:
        for i in range(len(state)):
            for j in range(i + 1, len(state)):
                a, b = state[i][0], state[j][0]
                for op, left, right, value in _pair_candidates(
                    a, b, prune_negative=False, prune_fractional=False
                ):
                    reason = prune_reason(value)
                    if reason is not None:
                        yield DfsStep(depth, left, op, right, value, left != a, pruned=reason)
                        continue
                    child, node = _combine(state, i, j, op, left, right, value)
                    child_values = tuple(v for v, _ in child)
                    if len(child) == 2:
                        checks = _two_number_display(child_values[0], child_values[1])
                        cut = next((k for k, (_, r) in enumerate(checks) if r == 24), None)
                        if cut is not None:
                            checks = checks[:cut]
                        solution = _resolve_pair(child)
                        yield DfsStep(
                            depth,
                            left,
                            op,
                            right,
                            value,
                            left != a,
                            state_after=child_values,
                            checks=checks,
                            hit=two_number_check(child_values[0], child_values[1]),
                            expr=node,
                            solution=solution,
                        )
                        if solution is not None:
                            return True
                    else:
                        yield DfsStep(
                            depth,
                            left,
                            op,
                            right,
                            value,
                            left != a,
                            state_after=child_values,
                            expr=node,
                        )
                        if (yield from search(child, depth + 1)):
                            return True
        return False

    yield from search(root, 1)


def reference_dfs(numbers: Sequence[int], policy: Optional[DfsPolicy] = None) -> SolverStats:
    """Deterministic depth-first search with node accounting.

    States keep their values in descending order; candidate pairs are
    enumerated in index order (so operands come out larger-first) and
    operations in the fixed order +, -, *, /. Two-number states are resolved
    via two_number_check. ``nodes_visited`` counts every state entered, the
    root excluded; revisits of equal states count again (no memoization).
    Pruned candidates are never entered, so they do not count.
    """
    visited = 0
    solution: Optional[Expr] = None
    for step in dfs_events(numbers, policy):
        if step.pruned is None:
            visited += 1
        if step.solution is not None:
            solution = step.solution
    return SolverStats(visited, solution is not None, solution)


def _heuristic(state: list[_Item]) -> Fraction:
    """Mean distance to 24 over every pairwise combination in the state.

    Averaging rather than taking the best single combination matters: a
    state like (32, 8, 5) contains one exact hit (32 - 8) that strands the
    5, and ranking by the lone best pair would flood the beam with such
    dead ends.
    """
    distances: list[Fraction] = []
    for i in range(len(state)):
        for j in range(i + 1, len(state)):
            a, b = state[i][0], state[j][0]
            for _, _, _, value in _pair_candidates(
                a, b, prune_negative=False, prune_fractional=False
            ):
                distances.append(abs(value - 24))
    assert distances
    return sum(distances, Fraction(0)) / len(distances)


def reference_bfs(numbers: Sequence[int], breadth: Union[int, float]) -> SolverStats:
    """Breadth-first beam search keeping the `breadth` most promising states
    per level, promise measured by closeness of any pairwise combination to
    24. Every generated child counts as a visited node, kept or not.

    Selection details, fixed for reproducibility: states with equal value
    multisets collapse to the earliest-generated one, and heuristic ties are
    broken toward the smaller state sum (large leftovers are rarely
    recoverable), then generation order. With breadth = inf the search is
    exhaustive and agrees with oracle_solve on solvability.
    """
    if breadth < 1:
        raise ValueError("breadth must be at least 1")
    values = _check_game_numbers(numbers)
    frontier = [_sorted_state((v, Leaf(v)) for v in values)]
    visited = 0

    for _ in range(2):
        children: list[list[_Item]] = []
        seen: set[tuple[Fraction, ...]] = set()
        for state in frontier:
            for i in range(len(state)):
                for j in range(i + 1, len(state)):
                    a, b = state[i][0], state[j][0]
                    for op, left, right, value in _pair_candidates(
                        a, b, prune_negative=False, prune_fractional=False
                    ):
                        child, _ = _combine(state, i, j, op, left, right, value)
                        visited += 1
                        key = tuple(v for v, _ in child)
                        if key not in seen:
                            seen.add(key)
                            children.append(child)
        # Stable sort: remaining ties keep generation order.
        children.sort(key=lambda s: (_heuristic(s), sum(v for v, _ in s)))
        if breadth != float("inf"):
            children = children[: int(breadth)]
        frontier = children

    solution: Optional[Expr] = None
    for state in frontier:
        solution = _resolve_pair(state)
        if solution is not None:
            break
    return SolverStats(visited, solution is not None, solution)


def count_distinct_expressions(n: int = 4, convention: str = "all") -> int:
    """Count syntactically distinct expressions over ``n`` ordered slots.

    Conventions (documented because "how many expressions" admits several
    readings; all are computed by direct enumeration, not closed formulas):

    * "all" (default): every expression produced at any point while
      repeatedly combining two remaining items with one of the four
      operations. Partial combinations count, so for 4 slots this includes
      the two-number and three-number expressions formed along the way.
    * "complete": only derivations that consume all ``n`` slots.
    * "trees": distinct full expression trees (leaf permutations x binary
      tree shapes x operator assignments); this collapses derivation order.

    For a single slot every convention counts the bare number itself, 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if convention not in ("all", "complete", "trees"):
        raise ValueError(f"unknown convention: {convention!r}")
    if n == 1:
        return 1

    if convention in ("all", "complete"):
        total = 0

        def derive(k: int) -> int:
            """Complete derivations from k items; counts partials via total."""
            nonlocal total
            if k == 1:
                return 1
            complete = 0
            for i in range(k):
                for j in range(k):
                    if i == j:
                        continue
                    for _ in Op:
                        total += 1
                        complete += derive(k - 1)
            return complete

        # Items are abstract slots: only the pair choice and operator matter,
        # so the recursion over k is uniform across states.
        full = derive(n)
        return total if convention == "all" else full

    def trees(k: int) -> int:
        if k == 1:
            return 1
        count = 0
        for split in range(1, k):
            count += len(Op) * trees(split) * trees(k - split)
        return count

    return math.factorial(n) * trees(n)

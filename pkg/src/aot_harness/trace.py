"""Parsers and renderers for search-style generations.

Game of 24 generations walk a tree in prose: first-operation blocks with
dash-prefixed child candidates, or breadth-first levels of numbered states.
``parse_trace24`` is total and lossless over that family of shapes; lines it
cannot classify are kept verbatim as opaque lines with a diagnostic instead
of raising, because sampled generations deviate freely. ``render_trace24``
produces a canonical depth-first transcript for a solvable game, suitable as
a fine-tuning target; it round-trips through the parser.

Crossword generations are reduced to an ordered event list and replayed
against the true grid by ``classify_xword``, which pins the blame for a
failed puzzle on the first step that diverges from ground truth.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .game24 import (
    DfsPolicy,
    ExprParseError,
    Op,
    answer_line,
    considering_chain,
    dfs_events,
    eval_expr,
    parse_expr,
)
from .crossword import (
    SIZE,
    BoardState,
    CrosswordInstance,
    Slot,
    all_slots,
    extract_pattern,
    fits,
    place,
    word_success_rate,
)

__all__ = [
    "LineKind",
    "TraceLine",
    "ChildLine",
    "FirstOp",
    "FoundMarker",
    "SearchTrace",
    "parse_trace24",
    "count_nodes",
    "render_trace",
    "render_trace24",
    "ErrorClass24",
    "classify24",
    "manual_resolution_success",
    "ConsiderSlot",
    "PatternClaim",
    "CandidateCheck",
    "Placement",
    "AnswerBlock",
    "XwordEvent",
    "parse_trace_xword",
    "ErrorClassXword",
    "classify_xword",
]


class LineKind(enum.Enum):
    BLANK = "blank"
    HEADER = "header"
    NUMBERED = "numbered"
    CHILD = "child"
    BACKTRACK = "backtrack"
    STEP_HEADER = "step_header"
    STEP_BODY = "step_body"
    CHAIN = "chain"
    ANSWER = "answer"
    ATTEMPT = "attempt"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class TraceLine:
    kind: LineKind
    text: str


@dataclass(frozen=True)
class ChildLine:
    """One dash-prefixed candidate under a first operation.

    ``state`` is None when the candidate was rejected without showing the
    resulting numbers ("- 14 / 8: fractional") or when its parenthesis never
    closes. ``results`` are the raw check tokens: integers, "fractional",
    "undefined", "big". ``found`` carries the winning expression when the
    token list ends in a found marker.
    """

    left: str
    op: Optional[Op]
    right: str
    state: Optional[tuple[str, ...]]
    results: tuple[str, ...]
    found: Optional[str]
    raw: str


@dataclass(frozen=True)
class FirstOp:
    """A numbered tree node, or a single-line solution attempt.

    Numbered lines carry ``label``; attempt lines carry only ``expression``.
    A synthetic FirstOp with empty ``raw`` anchors child lines that appear
    before any numbered line; it does not count as a node.
    """

    label: Optional[int]
    left: Optional[str]
    op: Optional[Op]
    right: Optional[str]
    state: Optional[tuple[str, ...]]
    result: Optional[str]
    expression: Optional[str]
    children: tuple[ChildLine, ...]
    raw: str


@dataclass(frozen=True)
class FoundMarker:
    expression: str
    raw: str
    op_index: int
    child_index: Optional[int]


@dataclass(frozen=True)
class SearchTrace:
    """Lossless structure of one game of 24 generation."""

    lines: tuple[TraceLine, ...]
    first_ops: tuple[FirstOp, ...]
    found_marker: Optional[FoundMarker]
    backtrack_steps: tuple[str, ...]
    chain_line: Optional[str]
    answer_line: Optional[str]
    truncated: bool
    diagnostics: tuple[str, ...]


_HEADER_DFS = re.compile(r"^Trying (?:a|another) promising first operation:$")
_HEADER_BFS = re.compile(r"^Let.?s consider the most promising\b.*:$")
_BACKTRACK = re.compile(r"^Backtracking the solution:$")
_CHAIN_PREFIX = re.compile(r"^Considering these steps:\s*(.*)$")
_STEP_HEADER = re.compile(r"^Step\s+(\d+)\s*:$")
_ANSWER = re.compile(r"^answer:\s*(.*)$")
_NUMBERED = re.compile(r"^(\d+)\.\s+(.*)$")
_CHILD = re.compile(r"^-\s+(\S+)\s*([+*/-])\s+(\S+):\s*(.*)$")
_OP_STATE = re.compile(r"^(\S+)\s*([+*/-])\s+(\S+):\s*(.*)$")
_OP_EQUALS = re.compile(r"^(\S+)\s*([+*/-])\s+(\S+)\s*=\s*(\S+)$")
_BARE_STATE = re.compile(r"^\((.*)\)$")
_FOUND = re.compile(r"^24\s*=\s*(.+?)\s*->\s*found it!$")
_BARE_CHAIN = re.compile(r"^24\s*=\s*.+=\s*24\.?$")

_OPS = {op.value: op for op in Op}


def _state_tokens(inner: str) -> tuple[str, ...]:
    parts = inner.split(",") if "," in inner else inner.split()
    return tuple(p.strip() for p in parts if p.strip())


class _OpBuilder:
    def __init__(self, **kw: object) -> None:
        self.kw = kw
        self.children: list[ChildLine] = []

    def freeze(self) -> FirstOp:
        return FirstOp(children=tuple(self.children), **self.kw)  # type: ignore[arg-type]


def _blank_op() -> _OpBuilder:
    return _OpBuilder(
        label=None, left=None, op=None, right=None,
        state=None, result=None, expression=None, raw="",
    )


def parse_trace24(text: str, *, truncated: bool = False) -> SearchTrace:
    """Parse a game of 24 generation. Total: never raises on any input."""
    lines: list[TraceLine] = []
    ops: list[_OpBuilder] = []
    found: Optional[FoundMarker] = None
    steps: list[str] = []
    chain: Optional[str] = None
    answer: Optional[str] = None
    diagnostics: list[str] = []
    pending_body = False

    def note(i: int, msg: str) -> None:
        diagnostics.append(f"line {i}: {msg}")

    def record_found(expr: str, raw: str, child_index: Optional[int], i: int) -> None:
        nonlocal found
        if found is None:
            found = FoundMarker(expr, raw, len(ops) - 1, child_index)
        else:
            note(i, "found marker repeats; keeping the first")

    def current_op(i: int) -> _OpBuilder:
        if not ops:
            note(i, "child line before any first operation")
            ops.append(_blank_op())
        return ops[-1]

    for i, raw_line in enumerate(text.splitlines(), start=1):
        raw = raw_line.strip()
        if not raw:
            lines.append(TraceLine(LineKind.BLANK, ""))
            continue
        if _HEADER_DFS.match(raw) or _HEADER_BFS.match(raw):
            pending_body = False
            lines.append(TraceLine(LineKind.HEADER, raw))
            continue
        if _BACKTRACK.match(raw):
            pending_body = False
            lines.append(TraceLine(LineKind.BACKTRACK, raw))
            continue
        m = _CHAIN_PREFIX.match(raw)
        if m:
            pending_body = False
            tail = m.group(1).strip()
            if tail.startswith("24"):
                if chain is not None:
                    note(i, "chain line repeats; keeping the first")
                else:
                    chain = tail
            elif tail:
                note(i, "chain line carries no chain; expecting it on its own line")
            lines.append(TraceLine(LineKind.CHAIN, raw))
            continue
        m = _STEP_HEADER.match(raw)
        if m:
            if pending_body:
                note(i, "step header without a body before it")
            pending_body = True
            lines.append(TraceLine(LineKind.STEP_HEADER, raw))
            continue
        m = _ANSWER.match(raw)
        if m:
            pending_body = False
            tail = m.group(1).strip()
            if tail.endswith("."):
                tail = tail[:-1].rstrip()
            if answer is not None:
                note(i, "answer line repeats; keeping the last")
            answer = tail
            lines.append(TraceLine(LineKind.ANSWER, raw))
            continue
        m = _NUMBERED.match(raw)
        if m:
            pending_body = False
            self_done = _parse_numbered(int(m.group(1)), m.group(2), raw, ops, i, note)
            if self_done is not None:
                record_found(*self_done, None, i)
            lines.append(TraceLine(LineKind.NUMBERED, raw))
            continue
        m = _CHILD.match(raw)
        if m:
            pending_body = False
            op_b = current_op(i)
            child = _parse_child(m, raw, i, note)
            op_b.children.append(child)
            if child.found is not None:
                record_found(child.found, raw, len(op_b.children) - 1, i)
            lines.append(TraceLine(LineKind.CHILD, raw))
            continue
        if pending_body:
            pending_body = False
            steps.append(raw)
            lines.append(TraceLine(LineKind.STEP_BODY, raw))
            continue
        if _BARE_CHAIN.match(raw):
            if chain is not None:
                note(i, "chain line repeats; keeping the first")
            else:
                chain = raw
            lines.append(TraceLine(LineKind.CHAIN, raw))
            continue
        attempt = _parse_attempt(raw)
        if attempt is not None:
            ops.append(_OpBuilder(
                label=None, left=None, op=None, right=None,
                state=None, result=None, expression=attempt, raw=raw,
            ))
            lines.append(TraceLine(LineKind.ATTEMPT, raw))
            continue
        note(i, f"opaque line: {raw!r}")
        lines.append(TraceLine(LineKind.OPAQUE, raw))

    return SearchTrace(
        lines=tuple(lines),
        first_ops=tuple(b.freeze() for b in ops),
        found_marker=found,
        backtrack_steps=tuple(steps),
        chain_line=chain,
        answer_line=answer,
        truncated=truncated,
        diagnostics=tuple(diagnostics),
    )


def _parse_numbered(label, tail, raw, ops, i, note):
    """Append a FirstOp for a numbered line. Returns (expr, raw) on a found
    marker embedded in the tail, else None."""
    m = _OP_STATE.match(tail)
    if m and m.group(4).startswith("("):
        left, op_ch, right, rest = m.groups()
        state, after, ok = _split_state(rest)
        if not ok:
            note(i, "unclosed state parenthesis")
        if after:
            note(i, f"trailing text after state: {after!r}")
        ops.append(_OpBuilder(
            label=label, left=left, op=_OPS[op_ch], right=right,
            state=state, result=None, expression=None, raw=raw,
        ))
        return None
    m = _BARE_STATE.match(tail)
    if m:
        ops.append(_OpBuilder(
            label=label, left=None, op=None, right=None,
            state=_state_tokens(m.group(1)), result=None, expression=None, raw=raw,
        ))
        return None
    m = _OP_EQUALS.match(tail)
    if m:
        left, op_ch, right, value = m.groups()
        ops.append(_OpBuilder(
            label=label, left=left, op=_OPS[op_ch], right=right,
            state=None, result=value, expression=None, raw=raw,
        ))
        return None
    note(i, f"numbered line with unrecognized tail: {tail!r}")
    ops.append(_OpBuilder(
        label=label, left=None, op=None, right=None,
        state=None, result=None, expression=None, raw=raw,
    ))
    return None


def _split_state(rest: str):
    """Split "(a, b) tail" into (tokens, tail, closed)."""
    close = rest.find(")")
    if close < 0:
        return None, "", False
    tokens = _state_tokens(rest[1:close])
    after = rest[close + 1:].lstrip()
    if after.startswith(":"):
        after = after[1:].lstrip()
    return tokens, after, True


def _parse_child(m: re.Match, raw: str, i: int, note) -> ChildLine:
    left, op_ch, right, tail = m.groups()
    state: Optional[tuple[str, ...]] = None
    if tail.startswith("("):
        state, tail, ok = _split_state(tail)
        if not ok:
            note(i, "unclosed state parenthesis")
            tail = ""
    results: list[str] = []
    found: Optional[str] = None
    if tail:
        for token in tail.split(","):
            token = token.strip()
            if not token:
                continue
            fm = _FOUND.match(token)
            if fm:
                found = fm.group(1)
                results.append(token)
                break
            results.append(token)
    return ChildLine(
        left=left, op=_OPS[op_ch], right=right,
        state=state, results=tuple(results), found=found, raw=raw,
    )


def _parse_attempt(raw: str) -> Optional[str]:
    """Recognize a single-line solution attempt like "(4 + 4) * 6 - 8 = 40."
    Returns the expression part, or None if the line is not an attempt."""
    body = raw[:-1].rstrip() if raw.endswith(".") else raw
    if not body:
        return None
    head, sep, value = body.rpartition(" = ")
    if sep and head:
        try:
            float(value)
            body = head.strip()
        except ValueError:
            pass
    try:
        parse_expr(body)
    except ExprParseError:
        return None
    return body


def count_nodes(trace: SearchTrace) -> int:
    """Visited tree nodes: numbered lines plus dash children. The root state
    is not a node; repeated states count every time they appear."""
    total = 0
    for op in trace.first_ops:
        if op.raw:
            total += 1
        total += len(op.children)
    return total


def render_trace(trace: SearchTrace) -> str:
    """Reassemble the recognized lines. Identity on traces with no opaque
    lines; otherwise the opaque lines are dropped."""
    return "\n".join(
        line.text for line in trace.lines if line.kind is not LineKind.OPAQUE
    )


def _fmt(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return str(value)


_CHECK_ORDER = (Op.ADD, Op.SUB, Op.MUL, Op.DIV)


def render_trace24(numbers: Sequence[int]) -> str:
    """Render the canonical depth-first transcript for a solvable game.

    Follows the pruning walk (no negatives, no fractions), so a commuted or
    repeated candidate never has to be shown: an equal-valued twin is always
    searched first, and the walk stops at the first solution. Raises
    ValueError when the walk finds no solution; games solvable only through
    negative or fractional intermediates count as unsolvable here.
    """
    lines: list[str] = []
    block = 0
    suppressed = False
    seen_first: set[tuple] = set()
    seen_children: set[tuple] = set()
    block_expr = None
    solved = False

    for step in dfs_events(numbers, DfsPolicy()):
        if step.depth == 1:
            if step.pruned is not None:
                continue
            key = (step.left, step.op, step.right)
            if step.swapped or key in seen_first:
                suppressed = True
                continue
            seen_first.add(key)
            seen_children = set()
            suppressed = False
            block += 1
            block_expr = step.expr
            if lines:
                lines.append("")
            lines.append(
                "Trying a promising first operation:" if block == 1
                else "Trying another promising first operation:"
            )
            state = ", ".join(_fmt(v) for v in step.state_after)
            lines.append(f"{block}. {_fmt(step.left)} {step.op.value} {_fmt(step.right)}: ({state})")
            continue
        # depth 2: the walk's first solution cannot hide under a commuted or
        # repeated candidate, so skipping them never loses the found line
        if suppressed or step.swapped:
            continue
        key = (step.left, step.op, step.right)
        if key in seen_children:
            continue
        seen_children.add(key)
        if step.pruned is not None:
            lines.append(f"- {_fmt(step.left)} {step.op.value} {_fmt(step.right)}: {step.pruned}")
            continue
        u, v = step.state_after
        tokens: list[str] = []
        for op in _CHECK_ORDER:
            if op is Op.DIV and v == 0:
                tokens.append("undefined")
                continue
            value = op.apply(u, v)
            if value == 24:
                tokens.append(f"24 = {_fmt(u)} {op.value} {_fmt(v)} -> found it!")
                break
            tokens.append(_fmt(value) if value.denominator == 1 else "fractional")
        lines.append(
            f"- {_fmt(step.left)} {step.op.value} {_fmt(step.right)}: "
            f"({_fmt(u)}, {_fmt(v)}) {', '.join(tokens)}"
        )
        if step.op is Op.MUL and step.right == 0 and step.solution is None:
            # the walk never proposes division by zero; show why
            div_key = (step.left, Op.DIV, step.right)
            if div_key not in seen_children:
                seen_children.add(div_key)
                lines.append(f"- {_fmt(step.left)} / 0: undefined")
        if step.solution is not None:
            path = (block_expr, step.expr, step.solution)
            lines.append("Backtracking the solution:")
            for k, node in enumerate(path, start=1):
                a = eval_expr(node.left)
                b = eval_expr(node.right)
                lines.append(f"Step {k}:")
                lines.append(f"{_fmt(a)} {node.op.value} {_fmt(b)} = {_fmt(node.op.apply(a, b))}")
            lines.append(considering_chain(step.solution, list(path)))
            lines.append(answer_line(step.solution))
            solved = True
            break

    if not solved:
        raise ValueError(f"the pruning walk finds no solution for {tuple(numbers)}")
    return "\n".join(lines)


class ErrorClass24(enum.Enum):
    OUT_OF_TOKEN = "OutOfToken"
    EXPRESSION_MISSTEP = "ExpressionMisstep"
    NON_FINALIZATION = "NonFinalization"
    OTHER = "Other"


def classify24(trace: SearchTrace, validation, *, search_found: bool = False) -> Optional[ErrorClass24]:
    """Sort a failed generation into one error class; None means success.

    ``validation`` is the checked final answer. ``search_found`` marks games
    where the search portion reached 24 even though no found marker parsed.
    """
    if validation.valid:
        return None
    found = trace.found_marker is not None or search_found
    has_answer = trace.answer_line is not None
    if trace.truncated and not has_answer:
        return ErrorClass24.OUT_OF_TOKEN
    if found and not has_answer:
        return ErrorClass24.NON_FINALIZATION
    if found and has_answer:
        return ErrorClass24.EXPRESSION_MISSTEP
    return ErrorClass24.OTHER


def manual_resolution_success(trace: SearchTrace) -> bool:
    """True when the search found a working expression, whatever became of
    the final answer: the found marker's expression evaluates to 24."""
    if trace.found_marker is None:
        return False
    try:
        return eval_expr(parse_expr(trace.found_marker.expression)) == 24
    except (ExprParseError, ZeroDivisionError):
        return False


@dataclass(frozen=True)
class ConsiderSlot:
    slot: Slot


@dataclass(frozen=True)
class PatternClaim:
    slot: Optional[Slot]
    pattern: str


@dataclass(frozen=True)
class CandidateCheck:
    word: str
    pattern: str
    claimed_fit: bool


@dataclass(frozen=True)
class Placement:
    slot: Slot
    word: str
    implicit: bool = False


@dataclass(frozen=True)
class AnswerBlock:
    words: tuple[tuple[Slot, str], ...]


XwordEvent = Union[ConsiderSlot, PatternClaim, CandidateCheck, Placement, AnswerBlock]

_X_CONSIDER = re.compile(r"\bwhich is ([hv][1-5])\b")
_X_PLACE = re.compile(r"\bWe add the word ([A-Za-z]+) for ([hv][1-5])\b")
_X_CLAIM = re.compile(r"letters:\s*([a-z_](?:\s+[a-z_])*)\s*\.")
_X_CHECK = re.compile(
    r"^-\s+([a-z]+)\s+\(([a-z](?:\s+[a-z])*),\s*([a-z_](?:\s+[a-z_])*)\)\s+"
    r"(fits|doesn't fit)\.?$"
)
_X_ANSWER = re.compile(r"^answer:\s*$")
_X_WORD = re.compile(r"^([hv][1-5])\.\s+([A-Za-z]+)\.?$")


def parse_trace_xword(
    text: str,
    found: Optional[Mapping[Slot, str]] = None,
) -> list[XwordEvent]:
    """Reduce a crossword generation to its claims and actions.

    ``found`` names the slots already filled before the generation started.
    Answer-block words for slots neither in ``found`` nor explicitly added in
    the text become implicit Placement events, so the generation is charged
    for every word it introduced.
    """
    events: list[XwordEvent] = []
    last_slot: Optional[Slot] = None
    placed: set[Slot] = set()
    answer_mode = False
    answer_words: list[tuple[Slot, str]] = []

    for raw_line in text.splitlines():
        raw = raw_line.strip()
        if not raw:
            continue
        if answer_mode:
            m = _X_WORD.match(raw)
            if m:
                answer_words.append((Slot.parse(m.group(1)), m.group(2).lower()))
                continue
            answer_mode = False
        if _X_ANSWER.match(raw):
            answer_mode = True
            continue
        m = _X_CHECK.match(raw)
        if m:
            word, spelled, pattern, verdict = m.groups()
            events.append(CandidateCheck(
                word=word.lower(),
                pattern=pattern.replace(" ", ""),
                claimed_fit=verdict == "fits",
            ))
            continue
        m = _X_CONSIDER.search(raw)
        if m:
            last_slot = Slot.parse(m.group(1))
            events.append(ConsiderSlot(last_slot))
        m = _X_CLAIM.search(raw)
        if m:
            events.append(PatternClaim(slot=last_slot, pattern=m.group(1).replace(" ", "")))
        m = _X_PLACE.search(raw)
        if m:
            slot = Slot.parse(m.group(2))
            placed.add(slot)
            events.append(Placement(slot=slot, word=m.group(1).lower()))

    if answer_words:
        known = set(placed)
        if found:
            known |= set(found)
        by_slot = dict(answer_words)
        for slot in all_slots():
            if slot in by_slot and slot not in known:
                events.append(Placement(slot=slot, word=by_slot[slot], implicit=True))
        events.append(AnswerBlock(words=tuple(answer_words)))
    return events


class ErrorClassXword(enum.Enum):
    NO_PRESELECTIONS = "NoPreselections"
    EXPRESSION_MISSTEP = "ExpressionMisstep"
    INCORRECT_PATTERN_EXTRACTION = "IncorrectPatternExtraction"
    ERRONEOUS_WORD_PLACEMENT = "ErroneousWordPlacement"


def classify_xword(
    events: Iterable[XwordEvent],
    instance: CrosswordInstance,
    preselected: Optional[Mapping[Slot, str]] = None,
) -> Optional[ErrorClassXword]:
    """Replay a generation against the true grid; None means success.

    The first divergence from ground truth decides the class: a board that
    starts empty or inconsistent, a pattern read off the board wrongly, a
    word that is wrong or does not fit where it goes, or an answer word that
    contradicts the solution. A replay with no divergence still fails as an
    expression misstep when the finished board leaves any word wrong.
    """
    board = BoardState()
    seeded = False
    for slot in all_slots():
        word = (preselected or {}).get(slot)
        if word is None:
            continue
        word = word.lower()
        if len(word) != SIZE or not fits(word, extract_pattern(board, slot)):
            return ErrorClassXword.NO_PRESELECTIONS
        board = place(board, slot, word)
        seeded = True
    if not seeded:
        return ErrorClassXword.NO_PRESELECTIONS

    for event in events:
        if isinstance(event, PatternClaim):
            if event.slot is None:
                continue
            if event.pattern != extract_pattern(board, event.slot):
                return ErrorClassXword.INCORRECT_PATTERN_EXTRACTION
        elif isinstance(event, Placement):
            if len(event.word) != SIZE:
                return ErrorClassXword.ERRONEOUS_WORD_PLACEMENT
            if event.word != instance.solution_word(event.slot):
                return ErrorClassXword.ERRONEOUS_WORD_PLACEMENT
            if not fits(event.word, extract_pattern(board, event.slot)):
                return ErrorClassXword.ERRONEOUS_WORD_PLACEMENT
            board = place(board, event.slot, event.word)
        elif isinstance(event, AnswerBlock):
            for slot, word in event.words:
                if word != instance.solution_word(slot):
                    return ErrorClassXword.EXPRESSION_MISSTEP

    if word_success_rate(board, instance) == 1:
        return None
    return ErrorClassXword.EXPRESSION_MISSTEP

"""Method drivers and experiment orchestration.

One driver per prompting strategy, all sharing the same shape: build the
dialogue, call the backend, verify the answer, and account for every query
and token. ``run_experiment`` fans instances out over a thread pool and
``emit_report`` writes the records, the summary table, and the node-count
histograms that compare parsed search traces against the reference solver.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .auxiliary_tasks import (
    CoinChange,
    DPInstance,
    EditDistance,
    ScoreParseError,
    WritingInstance,
    check_passage,
    extract_final_integer,
    make_bias_probe,
    parse_coherency_score,
)
from .backends import (
    AuthenticationError,
    Backend,
    BackendError,
    BackendRequest,
    BackendResponse,
    FinishReason,
    RetriesExhaustedError,
)
from .core import (
    AOT_VARIANTS,
    ChatMessage,
    Exactness,
    MethodConfig,
    Outcome,
    ReportRow,
    Role,
    Strategy,
    TaskInstance,
    TaskKind,
    TokenUsage,
    ZERO_USAGE,
    aggregate,
    percent,
    render_mean,
)
from .crossword import (
    SIZE,
    CrosswordInstance,
    Slot,
    all_slots,
    board_from_words,
    word_success_rate,
)
from .game24 import reference_dfs, two_number_check, validate_answer
from .prompts import build_messages, format_numbers
from .trace import (
    AnswerBlock,
    ErrorClass24,
    Placement,
    classify24,
    classify_xword,
    count_nodes,
    manual_resolution_success,
    parse_trace24,
    parse_trace_xword,
)

_log = logging.getLogger(__name__)

__all__ = [
    "RunnerError",
    "run_io",
    "run_cot",
    "run_cot_sc",
    "run_io_refine",
    "run_zero_shot",
    "run_aot",
    "run_tot",
    "run_method",
    "parse_word_proposals",
    "select_starting_words",
    "run_bias_probe",
    "write_probe_csv",
    "load_manifest",
    "ExperimentSpec",
    "InstanceRecord",
    "ExperimentReport",
    "run_experiment",
    "emit_report",
]


class RunnerError(RuntimeError):
    """A method cannot run as configured (wrong task kind, bad manifest)."""


# ------------------------------------------------------------- query plumbing


class _Tally:
    """Per-instance accounting: one sampled completion = one query."""

    def __init__(self) -> None:
        self.queries = 0
        self.usage = ZERO_USAGE

    def add(self, response: BackendResponse, n: int) -> None:
        self.queries += n
        self.usage = self.usage + response.usage


def _call(
    backend: Backend,
    model: str,
    messages: Sequence[ChatMessage],
    config: MethodConfig,
    tally: Optional[_Tally],
    *,
    n: int = 1,
    seed: Optional[int] = None,
) -> BackendResponse:
    response = backend.complete(
        BackendRequest(
            model=model,
            messages=tuple(messages),
            temperature=config.temperature,
            max_tokens=config.max_tokens,
            n=n,
            seed=seed,
        )
    )
    if tally is not None:
        tally.add(response, n)
    return response


def _last_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def _truncated(response: BackendResponse, index: int = 0) -> bool:
    return response.finish_reasons[index] is FinishReason.LENGTH


_IO_TEMPLATES = {
    TaskKind.GAME24: "io",
    TaskKind.COIN_CHANGE: "dp_io",
    TaskKind.EDIT_DISTANCE: "dp_io",
}
_COT_TEMPLATES = {
    TaskKind.GAME24: "cot",
    TaskKind.COIN_CHANGE: "dp_cot",
    TaskKind.EDIT_DISTANCE: "dp_cot",
}
_AOT_TEMPLATES = {
    Strategy.AOT: "aot_dfs",
    Strategy.AOT_SHORT: "aot_short",
    Strategy.AOT_LONG: "aot_long",
    Strategy.AOT_RANDOM: "aot_random",
    Strategy.AOT_BFS: "aot_bfs",
}


def _template_for(instance: TaskInstance, table: dict[TaskKind, str], what: str) -> str:
    name = table.get(instance.kind)
    if name is None:
        raise RunnerError(f"{what} prompting is not configured for {instance.kind.value}")
    return name


def _verify(instance: TaskInstance, answer: str) -> tuple[bool, Optional[str]]:
    """Success plus an error label for a bare final answer.

    An absent or unreadable answer is Other; a readable but wrong one is
    ExpressionMisstep. Search-trace outcomes use the richer classifiers.
    """
    if not answer:
        return False, ErrorClass24.OTHER.value
    if instance.kind is TaskKind.GAME24:
        if validate_answer(answer, instance.payload).valid:
            return True, None
        return False, ErrorClass24.EXPRESSION_MISSTEP.value
    if instance.kind in (TaskKind.COIN_CHANGE, TaskKind.EDIT_DISTANCE):
        value = extract_final_integer(answer)
        if value is None:
            return False, ErrorClass24.OTHER.value
        if value == instance.payload.expected:
            return True, None
        return False, ErrorClass24.EXPRESSION_MISSTEP.value
    raise RunnerError(f"no answer verifier for {instance.kind.value}")


def _single_query(
    backend: Backend,
    instance: TaskInstance,
    config: MethodConfig,
    model: str,
    template: str,
    **extra: Any,
) -> Outcome:
    tally = _Tally()
    response = _call(
        backend, model, build_messages(template, instance, **extra), config, tally
    )
    answer = _last_line(response.completions[0])
    success, error = _verify(instance, answer)
    return Outcome(
        success=success,
        manual_resolution_success=success,
        usage=tally.usage,
        queries=tally.queries,
        answer=answer or None,
        error_class=error,
    )


# ------------------------------------------------------------------- baselines


def run_io(backend: Backend, instance: TaskInstance, config: MethodConfig, model: str) -> Outcome:
    """Few-shot input-output prompting: one query, answer on the last line."""
    return _single_query(
        backend, instance, config, model, _template_for(instance, _IO_TEMPLATES, "IO")
    )


def run_cot(backend: Backend, instance: TaskInstance, config: MethodConfig, model: str) -> Outcome:
    """Chain-of-thought prompting: intermediate steps, answer on the last line."""
    return _single_query(
        backend, instance, config, model, _template_for(instance, _COT_TEMPLATES, "CoT")
    )


def run_zero_shot(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    """Zero-shot strategy selection: the model plans its own approach first."""
    if instance.kind is TaskKind.GAME24:
        question = (
            f"Use the numbers {format_numbers(instance.payload)} and basic arithmetic "
            "operations (+ - * /) to obtain 24. Each of the four numbers must be used "
            "exactly once."
        )
    elif instance.kind in (TaskKind.COIN_CHANGE, TaskKind.EDIT_DISTANCE):
        question = build_messages("dp_io", instance)[-1].content
    else:
        raise RunnerError(
            f"zero-shot strategy prompting is not configured for {instance.kind.value}"
        )
    return _single_query(
        backend, instance, config, model, "zero_shot_strategy", question=question
    )


def run_cot_sc(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    """Self-consistency: sample ``config.samples`` chains, majority-vote the answer.

    Answers are compared whitespace-collapsed; a tied vote goes to the
    lexicographically smallest answer so reruns agree.
    """
    tally = _Tally()
    template = _template_for(instance, _COT_TEMPLATES, "CoT")
    response = _call(
        backend, model, build_messages(template, instance), config, tally, n=config.samples
    )
    votes = Counter(" ".join(_last_line(text).split()) for text in response.completions)
    top = max(votes.values())
    winner = min(answer for answer, count in votes.items() if count == top)
    success, error = _verify(instance, winner)
    return Outcome(
        success=success,
        manual_resolution_success=success,
        usage=tally.usage,
        queries=tally.queries,
        answer=winner or None,
        error_class=error,
    )


def run_io_refine(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    """IO with feedback: re-ask with the verifier's reason, up to the refine limit."""
    if instance.kind is not TaskKind.GAME24:
        raise RunnerError(f"refinement is not configured for {instance.kind.value}")
    tally = _Tally()
    dialogue = list(build_messages("io", instance))
    response = _call(backend, model, dialogue, config, tally)
    text = response.completions[0]
    answer = _last_line(text)
    validation = validate_answer(answer, instance.payload)
    refinements = 0
    while not validation.valid and refinements < config.refine_limit:
        dialogue.append(ChatMessage(Role.ASSISTANT, text if text.strip() else "(no answer)"))
        reason = validation.reason.value if validation.reason else "invalid"
        dialogue.append(build_messages("refine", instance, reason=reason)[-1])
        response = _call(backend, model, dialogue, config, tally)
        text = response.completions[0]
        answer = _last_line(text)
        validation = validate_answer(answer, instance.payload)
        refinements += 1
    if validation.valid:
        success, error = True, None
    else:
        success, error = _verify(instance, answer)
    return Outcome(
        success=success,
        manual_resolution_success=success,
        usage=tally.usage,
        queries=tally.queries,
        answer=answer or None,
        error_class=error,
    )


# ----------------------------------------------------------------- AoT drivers


def run_aot(backend: Backend, instance: TaskInstance, config: MethodConfig, model: str) -> Outcome:
    """Run an in-context-search prompt: the single-query family.

    Arithmetic games take exactly one query; crosswords exactly two (propose
    words, then solve seeded with the most compatible ones); writing takes
    one query plus judge calls that score the passage without counting
    against the method.
    """
    if config.strategy not in AOT_VARIANTS:
        raise RunnerError(f"run_aot got non-AoT strategy {config.strategy.value}")
    if instance.kind is TaskKind.GAME24:
        return _aot_game24(backend, instance, config, model)
    if instance.kind is TaskKind.CROSSWORD:
        return _aot_crossword(backend, instance, config, model)
    if instance.kind is TaskKind.CREATIVE_WRITING:
        return _aot_writing(backend, instance, config, model)
    raise RunnerError(f"AoT is not configured for {instance.kind.value}")


def _aot_game24(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    tally = _Tally()
    template = _AOT_TEMPLATES[config.strategy]
    response = _call(backend, model, build_messages(template, instance), config, tally)
    assert tally.queries == 1, "a game24 search prompt costs exactly one query"
    trace = parse_trace24(response.completions[0], truncated=_truncated(response))
    answer = trace.answer_line
    validation = validate_answer(answer or "", instance.payload)
    success = validation.valid
    error = classify24(trace, validation)
    return Outcome(
        success=success,
        manual_resolution_success=success or manual_resolution_success(trace),
        usage=tally.usage,
        queries=tally.queries,
        answer=answer,
        error_class=error.value if error else None,
    )


_PROPOSAL_LINE = re.compile(r"^([hv])([1-5])\.\s*(.+)$")


def parse_word_proposals(text: str) -> dict[Slot, tuple[str, ...]]:
    """Read "h1. WORD, WORD, ..." candidate lines from a propose completion."""
    proposals: dict[Slot, tuple[str, ...]] = {}
    for raw in text.splitlines():
        match = _PROPOSAL_LINE.match(raw.strip())
        if match is None:
            continue
        slot = Slot(match.group(1), int(match.group(2)))
        words = tuple(
            w.strip().lower() for w in match.group(3).split(",") if w.strip().isalpha()
        )
        if words:
            proposals[slot] = proposals.get(slot, ()) + words
    return proposals


def _cross_compatible(a: tuple[Slot, str], b: tuple[Slot, str]) -> bool:
    (slot_a, word_a), (slot_b, word_b) = a, b
    if slot_a.direction == slot_b.direction:
        return slot_a != slot_b
    if slot_a.direction == "h":
        horizontal, vertical = (slot_a, word_a), (slot_b, word_b)
    else:
        horizontal, vertical = (slot_b, word_b), (slot_a, word_a)
    return horizontal[1][vertical[0].index - 1] == vertical[1][horizontal[0].index - 1]


def select_starting_words(
    proposals: Mapping[Slot, Sequence[str]], limit: int = 4
) -> dict[Slot, str]:
    """Choose up to ``limit`` mutually consistent words to seed the grid.

    Candidates are ranked by how many other proposed words they agree with
    at the crossing cells, then taken greedily; ranking ties keep proposal
    order. Words of the wrong length never qualify.
    """
    candidates: list[tuple[Slot, str]] = []
    for slot in all_slots():
        for word in proposals.get(slot, ()):
            if len(word) == SIZE and (slot, word) not in candidates:
                candidates.append((slot, word))
    degree = {
        pair: sum(_cross_compatible(pair, other) for other in candidates if other != pair)
        for pair in candidates
    }
    order = sorted(range(len(candidates)), key=lambda i: (-degree[candidates[i]], i))
    chosen: dict[Slot, str] = {}
    for i in order:
        slot, word = candidates[i]
        if slot in chosen:
            continue
        if all(_cross_compatible((slot, word), pair) for pair in chosen.items()):
            chosen[slot] = word
            if len(chosen) == limit:
                break
    return chosen


def _aot_crossword(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    tally = _Tally()
    propose = _call(backend, model, build_messages("xword_propose", instance), config, tally)
    found = select_starting_words(parse_word_proposals(propose.completions[0]))
    solve = _call(
        backend, model, build_messages("xword_aot", instance, found=found), config, tally
    )
    assert tally.queries == 2, "a crossword run costs exactly two queries"
    events = parse_trace_xword(solve.completions[0], found=found)
    error = classify_xword(events, instance.payload, preselected=found)
    words = {slot: word for slot, word in found.items() if len(word) == SIZE}
    for event in events:
        if isinstance(event, Placement) and len(event.word) == SIZE:
            words[event.slot] = event.word
        elif isinstance(event, AnswerBlock):
            for slot, word in event.words:
                if len(word) == SIZE:
                    words[slot] = word
    board = board_from_words(words)
    rate = word_success_rate(board, instance.payload)
    success = rate == 1
    return Outcome(
        success=success,
        manual_resolution_success=success,
        usage=tally.usage,
        queries=tally.queries,
        answer=" / ".join(word if word else "_" * SIZE for word in board.h_words),
        error_class=error.value if error else None,
        score=rate,
    )


_JUDGE_SAMPLES = 5


def _aot_writing(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    tally = _Tally()
    response = _call(backend, model, build_messages("writing_aot", instance), config, tally)
    passage = response.completions[0]
    if not passage.strip():
        return Outcome(
            success=False,
            manual_resolution_success=False,
            usage=tally.usage,
            queries=tally.queries,
            error_class=ErrorClass24.OTHER.value,
        )
    check = check_passage(passage, instance.payload)
    # Judge calls measure the passage, not the method: they are left out of
    # the query and token accounting.
    judge_messages = build_messages("score", instance, passage=passage)
    score = _judge_score(backend, judge_messages, config, model)
    return Outcome(
        success=check.passed,
        manual_resolution_success=check.passed,
        usage=tally.usage,
        queries=tally.queries,
        answer=passage,
        score=score,
    )


def _judge_score(
    backend: Backend,
    messages: Sequence[ChatMessage],
    config: MethodConfig,
    model: str,
) -> Optional[Fraction]:
    for seed in (None, 1):
        response = _call(backend, model, messages, config, None, n=_JUDGE_SAMPLES, seed=seed)
        try:
            scores = [parse_coherency_score(text) for text in response.completions]
        except ScoreParseError:
            continue
        return Fraction(sum(scores), len(scores))
    _log.warning("judge output stayed unparsable after a retry; passage left unscored")
    return None


# ------------------------------------------------------------------------ ToT


_TOT_LEVELS = 3
_TOT_STEP = re.compile(r"^(.+?=\s*\S+)\s*\(left:\s*([^)]*)\)\s*$")
_TOT_SCORE = re.compile(r"score:\s*(\d+)", re.IGNORECASE)


def _state_values(text: str) -> Optional[list[Fraction]]:
    values = []
    for token in text.split():
        try:
            values.append(Fraction(token))
        except (ValueError, ZeroDivisionError):
            return None
    return values or None


def run_tot(backend: Backend, instance: TaskInstance, config: MethodConfig, model: str) -> Outcome:
    """Breadth-limited tree search driven by propose and evaluate queries.

    Three levels deep (four numbers need three combining steps); each level
    expands every kept state with one propose query, scores each candidate
    with one evaluate query, and keeps the best ``config.breadth``.
    """
    if instance.kind is not TaskKind.GAME24:
        raise RunnerError(f"tree search is not configured for {instance.kind.value}")
    tally = _Tally()
    states: list[tuple[str, tuple[str, ...]]] = [(format_numbers(instance.payload), ())]
    for _ in range(_TOT_LEVELS):
        candidates: list[tuple[str, tuple[str, ...]]] = []
        for left, history in states:
            reply = _call(
                backend,
                model,
                build_messages("tot_propose", instance, numbers=left),
                config,
                tally,
            )
            for raw in reply.completions[0].splitlines():
                match = _TOT_STEP.match(raw.strip())
                if match is not None:
                    candidates.append(
                        (match.group(2).strip(), history + (match.group(1).strip(),))
                    )
        if not candidates:
            break
        scored: list[tuple[int, tuple[str, tuple[str, ...]]]] = []
        for left, history in candidates:
            reply = _call(
                backend,
                model,
                build_messages("tot_evaluate", instance, numbers=left),
                config,
                tally,
            )
            match = _TOT_SCORE.search(reply.completions[0])
            scored.append((int(match.group(1)) if match else 0, (left, history)))
        scored.sort(key=lambda pair: -pair[0])
        states = [state for _, state in scored[: config.breadth]]
    winner: Optional[tuple[str, ...]] = None
    for left, history in states:
        values = _state_values(left)
        if values is None:
            continue
        if len(values) == 1 and values[0] == 24:
            winner = history
            break
        if len(values) == 2 and two_number_check(values[0], values[1]) is not None:
            winner = history
            break
    return Outcome(
        success=winner is not None,
        manual_resolution_success=winner is not None,
        usage=tally.usage,
        queries=tally.queries,
        answer="; ".join(winner) if winner else None,
    )


_DRIVERS = {
    Strategy.IO: run_io,
    Strategy.COT: run_cot,
    Strategy.COT_SC: run_cot_sc,
    Strategy.IO_REFINE: run_io_refine,
    Strategy.TOT: run_tot,
    Strategy.ZERO_SHOT_STRATEGY: run_zero_shot,
}


def run_method(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> Outcome:
    if config.strategy in AOT_VARIANTS:
        return run_aot(backend, instance, config, model)
    return _DRIVERS[config.strategy](backend, instance, config, model)


# ------------------------------------------------------------------ bias probe


def run_bias_probe(
    backend: Backend,
    model: str,
    k_values: Iterable[int],
    samples_per_k: int,
    *,
    config: Optional[MethodConfig] = None,
    rng_seed: int = 0,
) -> list[tuple[int, Fraction]]:
    """Accuracy per in-context bias length k; k=0 is always measured."""
    if samples_per_k < 1:
        raise RunnerError("samples_per_k must be >= 1")
    config = config or MethodConfig(Strategy.IO)
    rows: list[tuple[int, Fraction]] = []
    for k in sorted(set(k_values) | {0}):
        correct = 0
        for i in range(samples_per_k):
            probe = make_bias_probe(k, rng_seed=rng_seed + 1009 * k + i)
            instance = TaskInstance(
                id=f"probe-k{k}-{i}", kind=TaskKind.BIAS_PROBE, payload=probe
            )
            reply = _call(
                backend, model, build_messages("bias_probe", instance), config, None
            )
            if extract_final_integer(reply.completions[0]) == probe.correct_answer:
                correct += 1
        rows.append((k, Fraction(correct, samples_per_k)))
    return rows


def write_probe_csv(rows: Sequence[tuple[int, Fraction]], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "accuracy"])
        for k, accuracy in rows:
            writer.writerow([k, f"{float(accuracy):.4f}"])


# ----------------------------------------------------------------- experiments


def _decode_payload(kind: TaskKind, payload: Any) -> Any:
    if kind is TaskKind.GAME24:
        return tuple(int(n) for n in payload)
    if kind is TaskKind.CROSSWORD:
        return CrosswordInstance(
            clues_h=tuple(payload["clues_h"]),
            clues_v=tuple(payload["clues_v"]),
            solution=tuple(payload["solution"]),
        )
    if kind is TaskKind.CREATIVE_WRITING:
        return WritingInstance(end_sentences=tuple(payload["end_sentences"]))
    if kind is TaskKind.COIN_CHANGE:
        problem = CoinChange(tuple(payload["coins"]), payload["amount"])
    elif kind is TaskKind.EDIT_DISTANCE:
        problem = EditDistance(payload["a"], payload["b"])
    else:
        raise RunnerError(f"manifests cannot carry {kind.value} instances")
    if "expected" in payload:
        return DPInstance(problem, payload["expected"])
    return DPInstance.from_problem(problem)


def load_manifest(path: Path | str) -> list[TaskInstance]:
    """Read task instances from a JSONL manifest.

    Each line holds {"id", "kind", "payload"} with an optional "source";
    the payload shape depends on the kind.
    """
    instances: list[TaskInstance] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
            kind = TaskKind(record["kind"])
            instances.append(
                TaskInstance(
                    id=str(record["id"]),
                    kind=kind,
                    payload=_decode_payload(kind, record["payload"]),
                    source=record.get("source", ""),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RunnerError(f"{path} line {lineno}: {exc}") from exc
    if not instances:
        raise RunnerError(f"{path} holds no instances")
    return instances


@dataclass(frozen=True)
class ExperimentSpec:
    manifest: Path
    methods: tuple[MethodConfig, ...]
    model: str
    output_dir: Path
    concurrency: int = 1
    exclude_errors: bool = False

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("an experiment needs at least one method")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


@dataclass(frozen=True)
class InstanceRecord:
    instance_id: str
    method: str
    outcome: Outcome
    errored: bool = False
    nodes_visited: Optional[int] = None
    reference_nodes: Optional[int] = None


@dataclass(frozen=True)
class ExperimentReport:
    records: tuple[InstanceRecord, ...]
    rows: dict[str, ReportRow]
    methods: tuple[MethodConfig, ...]
    model: str


class _Recording:
    """Pass-through wrapper that keeps completions for trace post-processing."""

    def __init__(self, inner: Backend) -> None:
        self._inner = inner
        self.responses: list[BackendResponse] = []

    def complete(self, request: BackendRequest) -> BackendResponse:
        response = self._inner.complete(request)
        self.responses.append(response)
        return response


_ERROR_OUTCOME = Outcome(
    success=False,
    manual_resolution_success=False,
    usage=ZERO_USAGE,
    queries=1,
    error_class=ErrorClass24.OTHER.value,
)


def _run_one(
    backend: Backend, instance: TaskInstance, config: MethodConfig, model: str
) -> InstanceRecord:
    recorder = _Recording(backend)
    method = config.strategy.value
    try:
        outcome = run_method(recorder, instance, config, model)
    except (AuthenticationError, RetriesExhaustedError):
        raise
    except BackendError as exc:
        _log.warning("instance %s errored under %s: %s", instance.id, method, exc)
        return InstanceRecord(instance.id, method, _ERROR_OUTCOME, errored=True)
    record = InstanceRecord(instance.id, method, outcome)
    if config.strategy in AOT_VARIANTS and instance.kind is TaskKind.GAME24:
        trace = parse_trace24(recorder.responses[0].completions[0])
        record = InstanceRecord(
            instance.id,
            method,
            outcome,
            nodes_visited=count_nodes(trace),
            reference_nodes=reference_dfs(instance.payload).nodes_visited,
        )
    return record


def run_experiment(spec: ExperimentSpec, backend: Backend) -> ExperimentReport:
    """Run every method over every manifest instance and aggregate.

    Instances run concurrently up to the configured limit; records keep
    submission order so a rerun against a warmed cache emits identical
    bytes. Systemic backend failures abort; per-instance ones do not.
    """
    instances = load_manifest(spec.manifest)
    with ThreadPoolExecutor(max_workers=spec.concurrency) as pool:
        futures = [
            pool.submit(_run_one, backend, instance, config, spec.model)
            for config in spec.methods
            for instance in instances
        ]
        records = tuple(future.result() for future in futures)
    rows: dict[str, ReportRow] = {}
    for config in spec.methods:
        method = config.strategy.value
        outcomes = [
            record.outcome
            for record in records
            if record.method == method and not (spec.exclude_errors and record.errored)
        ]
        if not outcomes:
            raise RunnerError(f"every instance errored under {method}")
        rows[method] = aggregate(outcomes)
    return ExperimentReport(records=records, rows=rows, methods=spec.methods, model=spec.model)


# ---------------------------------------------------------------- report files


def _record_json(record: InstanceRecord) -> dict[str, Any]:
    outcome = record.outcome
    return {
        "instance": record.instance_id,
        "method": record.method,
        "success": outcome.success,
        "manual_resolution_success": outcome.manual_resolution_success,
        "queries": outcome.queries,
        "prompt_tokens": outcome.usage.prompt_tokens,
        "completion_tokens": outcome.usage.completion_tokens,
        "exactness": outcome.usage.exactness.value,
        "answer": outcome.answer,
        "error_class": outcome.error_class,
        "score": str(outcome.score) if outcome.score is not None else None,
        "errored": record.errored,
        "nodes_visited": record.nodes_visited,
        "reference_nodes": record.reference_nodes,
    }


def record_from_json(body: Mapping[str, Any]) -> InstanceRecord:
    """Inverse of the records.jsonl line format, for re-aggregation."""
    score = body.get("score")
    return InstanceRecord(
        instance_id=body["instance"],
        method=body["method"],
        outcome=Outcome(
            success=body["success"],
            manual_resolution_success=body["manual_resolution_success"],
            usage=TokenUsage(
                body["prompt_tokens"],
                body["completion_tokens"],
                Exactness(body["exactness"]),
            ),
            queries=body["queries"],
            answer=body.get("answer"),
            error_class=body.get("error_class"),
            score=Fraction(score) if score is not None else None,
        ),
        errored=body.get("errored", False),
        nodes_visited=body.get("nodes_visited"),
        reference_nodes=body.get("reference_nodes"),
    )


def _write_summary(rows: Mapping[str, ReportRow], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["Method", "Success", "Queries", "PTs", "CTs"])
        for method, row in rows.items():
            writer.writerow(
                [
                    method,
                    percent(row.success_rate),
                    render_mean(row.mean_queries),
                    render_mean(row.mean_prompt_tokens),
                    render_mean(row.mean_completion_tokens),
                ]
            )


def _write_histogram(records: Sequence[InstanceRecord], path: Path) -> None:
    parsed = Counter(r.nodes_visited for r in records if r.nodes_visited is not None)
    reference = Counter(r.reference_nodes for r in records if r.reference_nodes is not None)
    lowest = min(min(parsed), min(reference))
    highest = max(max(parsed), max(reference))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["nodes", "traces", "reference"])
        for nodes in range(lowest, highest + 1):
            writer.writerow([nodes, parsed.get(nodes, 0), reference.get(nodes, 0)])


def emit_report(report: ExperimentReport, out_dir: Path | str) -> None:
    """Write records.jsonl, summary.csv, the run manifest, and histograms."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as handle:
        for record in report.records:
            handle.write(json.dumps(_record_json(record), sort_keys=True) + "\n")
    _write_summary(report.rows, out / "summary.csv")
    manifest = {
        "model": report.model,
        "instances": sorted({record.instance_id for record in report.records}),
        "methods": [
            {
                "strategy": config.strategy.value,
                "samples": config.samples,
                "refine_limit": config.refine_limit,
                "breadth": config.breadth,
                "temperature": str(config.temperature),
                "max_tokens": config.max_tokens,
            }
            for config in report.methods
        ],
    }
    with open(out / "run_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    by_method: dict[str, list[InstanceRecord]] = {}
    for record in report.records:
        if record.nodes_visited is not None or record.reference_nodes is not None:
            by_method.setdefault(record.method, []).append(record)
    if by_method:
        (out / "histograms").mkdir(exist_ok=True)
        for method, records in by_method.items():
            _write_histogram(records, out / "histograms" / f"{method}.csv")

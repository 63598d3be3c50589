"""Prompt template registry.

Templates live in plain-text fixture files under ``fixtures/``. Dialogue
files use role markers (``System:``/``User:``/``Assistant:``) at column 0,
message bodies indented by a uniform margin, and runs of ``~`` as shot
separators; files without markers are a single body. The files under
``fixtures/local/`` were written for this harness; the rest are the
protocol's exemplar dialogues kept byte-for-byte, quirks included.

Besides the loader this module holds the builders that turn task instances
into chat message lists and the finetune-dataset exporter.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

from ..auxiliary_tasks import BiasProbeInstance, CoinChange, DPInstance, DPProblem
from ..core import ChatMessage, Role, TaskInstance, TaskKind
from ..game24 import (
    Expr,
    Leaf,
    answer_line,
    considering_chain,
    operation_steps,
    oracle_solve,
)
from ..crossword import Slot, all_slots, clue_lines

_log = logging.getLogger(__name__)


class PromptError(ValueError):
    """Unknown template, incompatible task kind, or unbound hole."""


# --------------------------------------------------------------- fixtures

_ROLE_MARKERS = {
    "System:": Role.SYSTEM,
    "User:": Role.USER,
    "Assistant:": Role.ASSISTANT,
}


def _is_separator(line: str) -> bool:
    stripped = line.strip()
    return bool(stripped) and set(stripped) == {"~"}


def _common_indent(lines: Sequence[str]) -> int:
    widths = [len(line) - len(line.lstrip(" ")) for line in lines if line.strip()]
    return min(widths, default=0)


def _dedent(lines: Sequence[str], indent: int) -> str:
    # Whitespace-only lines flatten to empty; deeper indentation is content.
    body = "\n".join(line[indent:] if line.strip() else "" for line in lines)
    return body.strip("\n")


def parse_dialogue(text: str) -> list[tuple[Role, str]]:
    """Parse the dialogue fixture format into (role, content) messages.

    A role marker starts a message, a separator ends one (indented
    separators included), and bodies are dedented by the file-wide margin
    of the content lines.
    """
    lines = text.splitlines()
    content = [ln for ln in lines if ln.rstrip() not in _ROLE_MARKERS and not _is_separator(ln)]
    indent = _common_indent(content)
    messages: list[tuple[Role, str]] = []
    role: Optional[Role] = None
    buffer: list[str] = []

    def flush() -> None:
        nonlocal role, buffer
        if role is None:
            return
        body = _dedent(buffer, indent)
        if not body:
            raise PromptError(f"empty {role.value} message in fixture")
        messages.append((role, body))
        role, buffer = None, []

    for line in lines:
        if line.rstrip() in _ROLE_MARKERS:
            flush()
            role = _ROLE_MARKERS[line.rstrip()]
        elif _is_separator(line):
            flush()
        elif role is not None:
            buffer.append(line)
        elif line.strip():
            raise PromptError(f"content before any role marker: {line.strip()!r}")
    flush()
    return messages


def parse_body(text: str) -> str:
    """Parse a marker-free fixture: one dedented text block."""
    lines = text.splitlines()
    return _dedent(lines, _common_indent(lines))


@lru_cache(maxsize=None)
def _fixture_text(relative: str) -> str:
    return (resources.files(__package__) / "fixtures" / relative).read_text(encoding="utf-8")


def _split_dialogue(
    messages: Sequence[tuple[Role, str]], where: str
) -> tuple[Optional[str], tuple[tuple[str, str], ...]]:
    system: Optional[str] = None
    rest = list(messages)
    if rest and rest[0][0] is Role.SYSTEM:
        system = rest[0][1]
        rest = rest[1:]
    if len(rest) % 2:
        raise PromptError(f"{where}: unpaired trailing message")
    shots: list[tuple[str, str]] = []
    for k in range(0, len(rest), 2):
        (user_role, user_text), (assistant_role, assistant_text) = rest[k], rest[k + 1]
        if user_role is not Role.USER or assistant_role is not Role.ASSISTANT:
            raise PromptError(f"{where}: shots must alternate user/assistant")
        shots.append((user_text, assistant_text))
    return system, tuple(shots)


# --------------------------------------------------------------- templates


@dataclass(frozen=True)
class PromptTemplate:
    """A system preamble, worked user/assistant shots, and a final user
    query with format-string holes.

    Positional holes like ``{0}`` draw from ``render_params`` order, named
    holes from keyword arguments; doubled braces reach the model as literal
    braces.
    """

    name: str
    query_template: str
    system: Optional[str] = None
    shots: tuple[tuple[str, str], ...] = ()
    render_params: tuple[str, ...] = ()

    def render_query(self, **params: str) -> str:
        positional = []
        for hole in self.render_params:
            if hole not in params:
                raise PromptError(f"template {self.name!r}: missing value for {hole!r}")
            positional.append(params[hole])
        try:
            return self.query_template.format(*positional, **params)
        except (IndexError, KeyError) as exc:
            raise PromptError(f"template {self.name!r}: missing value for {exc}") from exc

    def render(self, **params: str) -> list[ChatMessage]:
        messages: list[ChatMessage] = []
        if self.system is not None:
            messages.append(ChatMessage(Role.SYSTEM, self.system))
        for user, assistant in self.shots:
            messages.append(ChatMessage(Role.USER, user))
            messages.append(ChatMessage(Role.ASSISTANT, assistant))
        messages.append(ChatMessage(Role.USER, self.render_query(**params)))
        return messages


@dataclass(frozen=True)
class _TemplateSpec:
    fixture: Optional[str]  # None: no file, query string only
    query: Optional[str]  # None: the fixture body IS the query template
    params: tuple[str, ...]
    kinds: tuple[TaskKind, ...]  # empty: not bound to a task kind


_GAME24 = (TaskKind.GAME24,)
_CROSSWORD = (TaskKind.CROSSWORD,)
_WRITING = (TaskKind.CREATIVE_WRITING,)
_DP = (TaskKind.COIN_CHANGE, TaskKind.EDIT_DISTANCE)

_SPECS: dict[str, _TemplateSpec] = {
    "aot_dfs": _TemplateSpec("game24/aot_dfs.txt", "{numbers}", ("numbers",), _GAME24),
    "aot_short": _TemplateSpec("game24/aot_short.txt", "{numbers}", ("numbers",), _GAME24),
    "aot_long": _TemplateSpec("game24/aot_long.txt", "{numbers}", ("numbers",), _GAME24),
    "aot_random": _TemplateSpec("game24/aot_random.txt", "{numbers}.", ("numbers",), _GAME24),
    "aot_bfs": _TemplateSpec("game24/aot_bfs.txt", "{numbers}", ("numbers",), _GAME24),
    "io": _TemplateSpec("local/game24_io.txt", "{numbers}", ("numbers",), _GAME24),
    "cot": _TemplateSpec("local/game24_cot.txt", "{numbers}", ("numbers",), _GAME24),
    "refine": _TemplateSpec("local/game24_refine.txt", None, ("reason",), _GAME24),
    "tot_propose": _TemplateSpec("local/tot_propose.txt", "Input: {numbers}", ("numbers",), _GAME24),
    "tot_evaluate": _TemplateSpec("local/tot_evaluate.txt", "{numbers}", ("numbers",), _GAME24),
    "xword_propose": _TemplateSpec("crossword/propose_words.txt", "{clues}", ("clues",), _CROSSWORD),
    "xword_aot": _TemplateSpec(
        "crossword/aot.txt",
        "{clues}\n\nThe words I already found are:\n{found}",
        ("clues", "found"),
        _CROSSWORD,
    ),
    "writing_aot": _TemplateSpec("writing/aot.txt", None, ("sentences",), _WRITING),
    "score": _TemplateSpec("writing/score.txt", None, ("passage",), _WRITING),
    "zero_shot_strategy": _TemplateSpec("local/zero_shot_strategy.txt", None, ("question",), ()),
    "dp_io": _TemplateSpec("local/dp_io.txt", None, ("problem",), _DP),
    "dp_cot": _TemplateSpec("local/dp_cot.txt", None, ("problem",), _DP),
    "bias_probe": _TemplateSpec(None, "{probe}", ("probe",), (TaskKind.BIAS_PROBE,)),
}


def template_names() -> tuple[str, ...]:
    return tuple(_SPECS)


@lru_cache(maxsize=None)
def get_template(name: str) -> PromptTemplate:
    spec = _SPECS.get(name)
    if spec is None:
        raise PromptError(f"unknown template {name!r}")
    system: Optional[str] = None
    shots: tuple[tuple[str, str], ...] = ()
    query = spec.query
    if spec.fixture is not None:
        text = _fixture_text(spec.fixture)
        if any(line.rstrip() in _ROLE_MARKERS for line in text.splitlines()):
            system, shots = _split_dialogue(parse_dialogue(text), spec.fixture)
        elif query is None:
            query = parse_body(text)
    if query is None:
        raise PromptError(f"template {name!r}: dialogue fixture needs an explicit query")
    return PromptTemplate(name, query, system, shots, spec.params)


# ---------------------------------------------------------------- builders


def format_numbers(numbers: Sequence[int]) -> str:
    """The space-separated query form of a game, e.g. "14 8 8 2"."""
    return " ".join(str(n) for n in numbers)


def found_words_block(found: Mapping[Slot, str]) -> str:
    """The "h1. sawer" lines for the already-placed words, horizontal slots
    first, each group in slot order."""
    return "\n".join(f"{slot}. {found[slot]}" for slot in all_slots() if slot in found)


def describe_problem(problem: DPProblem) -> str:
    if isinstance(problem, CoinChange):
        coins = ", ".join(str(c) for c in problem.coins)
        return (
            f"You have an unlimited supply of coins of denominations {coins}. "
            f"What is the minimum number of coins that sum to exactly {problem.amount}? "
            "If it cannot be done, the answer is -1."
        )
    return (
        "What is the minimum number of single-character insertions, deletions, "
        f'or substitutions needed to turn "{problem.a}" into "{problem.b}"?'
    )


def render_probe(probe: BiasProbeInstance) -> str:
    """The prefix equations, one per line, then the bare query line."""
    return "\n".join((*probe.prefix_equations, probe.query))


def _instance_params(instance: TaskInstance) -> dict[str, str]:
    kind, payload = instance.kind, instance.payload
    if kind is TaskKind.GAME24:
        return {"numbers": format_numbers(payload)}
    if kind is TaskKind.CROSSWORD:
        return {"clues": "\n".join(clue_lines(payload))}
    if kind is TaskKind.CREATIVE_WRITING:
        return {"sentences": "\n".join(payload.end_sentences)}
    if kind in _DP:
        problem = payload.problem if isinstance(payload, DPInstance) else payload
        return {"problem": describe_problem(problem)}
    if kind is TaskKind.BIAS_PROBE:
        return {"probe": render_probe(payload)}
    return {}


def build_messages(template_name: str, instance: TaskInstance, **extra: Any) -> list[ChatMessage]:
    """Assemble the full chat message list for one instance.

    Holes derived from the instance (numbers, clues, sentences, ...) are
    filled automatically; anything the caller knows better (the crossword
    ``found`` words, the writing ``passage`` under judgement) comes through
    ``extra``. ``found`` accepts a Slot-to-word mapping.
    """
    template = get_template(template_name)
    spec = _SPECS[template_name]
    if spec.kinds and instance.kind not in spec.kinds:
        raise PromptError(
            f"template {template_name!r} does not apply to {instance.kind.value} instances"
        )
    params = _instance_params(instance)
    for key, value in extra.items():
        if key == "found" and isinstance(value, Mapping):
            value = found_words_block(value)
        params[key] = value
    return template.render(**params)


# ---------------------------------------------------------- finetune export


class FinetuneStyle(enum.Enum):
    COT = "cot"
    AOT = "aot"


def _postorder_nodes(e: Expr) -> list[Expr]:
    nodes: list[Expr] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Leaf):
            return
        walk(node.left)
        walk(node.right)
        nodes.append(node)

    walk(e)
    return nodes


def _cot_completion(solution: Expr) -> str:
    lines: list[str] = []
    for k, step in enumerate(operation_steps(solution), start=1):
        lines.append(f"Step {k}:")
        lines.append(str(step))
    lines.append(considering_chain(solution, _postorder_nodes(solution)))
    lines.append(answer_line(solution))
    return "\n".join(lines)


def export_finetune_dataset(
    instances: Iterable[TaskInstance], style: FinetuneStyle
) -> Iterator[dict[str, Any]]:
    """One JSONL-ready record per solvable game: the system and user
    messages a tuned model would see, plus the assistant text it should
    produce (a three-step linear solution for COT, a rendered search trace
    for AOT). Unsolvable games are skipped with a warning."""
    template = get_template("cot" if style is FinetuneStyle.COT else "aot_dfs")
    for instance in instances:
        if instance.kind is not TaskKind.GAME24:
            raise PromptError("finetune export covers Game of 24 instances only")
        solution = oracle_solve(instance.payload)
        if solution is None:
            _log.warning("skipping unsolvable game %s", instance.id or instance.payload)
            continue
        if style is FinetuneStyle.COT:
            target = _cot_completion(solution)
        else:
            from ..trace import render_trace24

            try:
                target = render_trace24(instance.payload)
            except ValueError:
                # Solvable only through negative or fractional intermediates,
                # which the rendered walk never enters.
                _log.warning(
                    "skipping game %s: not solvable under pruning",
                    instance.id or instance.payload,
                )
                continue
        messages = []
        if template.system is not None:
            messages.append({"role": "system", "content": template.system})
        messages.append(
            {
                "role": "user",
                "content": template.render_query(numbers=format_numbers(instance.payload)),
            }
        )
        yield {"messages": messages, "target": target}

"""Tests for prompt templates, fixture dialogues, and the finetune export."""

import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aot_harness.auxiliary_tasks import (
    CoinChange,
    DPInstance,
    EditDistance,
    WritingInstance,
    make_bias_probe,
)
from aot_harness.core import Role, TaskInstance, TaskKind
from aot_harness.crossword import CrosswordInstance, Slot
from aot_harness.game24 import eval_expr, parse_expr, validate_answer
from aot_harness.prompts import (
    FinetuneStyle,
    PromptError,
    PromptTemplate,
    build_messages,
    describe_problem,
    export_finetune_dataset,
    format_numbers,
    found_words_block,
    get_template,
    parse_body,
    parse_dialogue,
    render_probe,
    template_names,
)
from aot_harness.trace import LineKind, parse_trace24

EXPECTED_SHOTS = {
    "aot_dfs": 10,
    "aot_short": 10,
    "aot_long": 4,
    "aot_random": 5,
    "aot_bfs": 10,
    "io": 5,
    "cot": 5,
    "refine": 0,
    "tot_propose": 2,
    "tot_evaluate": 3,
    "xword_propose": 1,
    "xword_aot": 3,
    "writing_aot": 0,
    "score": 0,
    "zero_shot_strategy": 0,
    "dp_io": 0,
    "dp_cot": 0,
    "bias_probe": 0,
}


def game(numbers, id="g"):
    return TaskInstance(id=id, kind=TaskKind.GAME24, payload=tuple(numbers))


XWORD = TaskInstance(
    id="x",
    kind=TaskKind.CROSSWORD,
    payload=CrosswordInstance(
        clues_h=("one", "two", "three", "four", "five"),
        clues_v=("six", "seven", "eight", "nine", "ten"),
        solution=("sawer", "uredo", "rater", "grama", "earal"),
    ),
)

WRITING = TaskInstance(
    id="w",
    kind=TaskKind.CREATIVE_WRITING,
    payload=WritingInstance(
        end_sentences=("First end.", "Second end.", "Third end.", "Fourth end.")
    ),
)


def test_every_template_loads():
    assert set(template_names()) == set(EXPECTED_SHOTS)
    for name in template_names():
        template = get_template(name)
        assert template.name == name
        assert template.query_template
    with pytest.raises(PromptError):
        get_template("no_such_template")


def test_shot_counts():
    assert {name: len(get_template(name).shots) for name in template_names()} == EXPECTED_SHOTS


def test_dfs_dialogue_shape():
    template = get_template("aot_dfs")
    assert template.system is not None
    assert "(12 8) no" in template.system
    assert template.system.endswith("has indeed a solution.")
    assert template.shots[0][0] == "14 8 8 2"
    for user, assistant in template.shots:
        numbers = tuple(int(n) for n in user.split())
        assert len(numbers) == 4
        assert "answer:" in assistant


def test_build_messages_game24():
    messages = build_messages("aot_dfs", game((11, 5, 4, 3)))
    assert len(messages) == 22
    assert messages[0].role is Role.SYSTEM
    assert [m.role for m in messages[1:]] == [Role.USER, Role.ASSISTANT] * 10 + [Role.USER]
    assert messages[-1].content == "11 5 4 3"

    messages = build_messages("aot_random", game((9, 5, 5, 5)))
    assert messages[-1].content == "9 5 5 5."


def test_template_holes():
    with pytest.raises(PromptError):
        get_template("aot_dfs").render_query()
    with pytest.raises(PromptError):
        get_template("xword_aot").render_query(clues="c")  # found missing
    # Unused extras are fine.
    text = get_template("io").render_query(numbers="1 2 3 4", unused="x")
    assert text == "1 2 3 4"


def test_brace_escaping():
    rendered = get_template("score").render_query(passage="THE PASSAGE")
    assert 'the coherency score is {s}' in rendered.lower()
    assert rendered.endswith("THE PASSAGE")

    template = PromptTemplate("t", "{{left}} {0}", render_params=("value",))
    assert template.render_query(value="v") == "{left} v"


def test_writing_templates():
    template = get_template("writing_aot")
    assert template.query_template.startswith('"Write a coherent passage')
    messages = build_messages("writing_aot", WRITING)
    assert len(messages) == 1
    assert "First end.\nSecond end.\nThird end.\nFourth end." in messages[0].content

    judged = build_messages("score", WRITING, passage="A short passage.")
    assert judged[0].content.endswith("A short passage.")


def test_wrong_kind_is_rejected():
    with pytest.raises(PromptError):
        build_messages("aot_dfs", XWORD)
    with pytest.raises(PromptError):
        build_messages("xword_aot", game((1, 2, 3, 4)), found="")


def test_found_words_block_orders_h_then_v():
    found = {
        Slot.parse("v1"): "surge",
        Slot.parse("h3"): "rater",
        Slot.parse("h1"): "sawer",
    }
    assert found_words_block(found) == "h1. sawer\nh3. rater\nv1. surge"


def test_xword_aot_messages():
    found = {Slot.parse("h1"): "sawer", Slot.parse("v4"): "edema"}
    messages = build_messages("xword_aot", XWORD, found=found)
    query = messages[-1].content
    assert "h1. one" in query and "v5. ten" in query
    assert query.endswith("The words I already found are:\nh1. sawer\nv4. edema")


def test_describe_problem():
    coins = describe_problem(CoinChange(coins=(1, 5, 10), amount=17))
    assert coins == (
        "You have an unlimited supply of coins of denominations 1, 5, 10. "
        "What is the minimum number of coins that sum to exactly 17? "
        "If it cannot be done, the answer is -1."
    )
    edits = describe_problem(EditDistance(a="kitten", b="sitting"))
    assert '"kitten"' in edits and '"sitting"' in edits
    assert "insertions, deletions, or substitutions" in edits


def test_dp_messages_accept_instance_or_problem():
    problem = CoinChange(coins=(2, 3), amount=7)
    wrapped = TaskInstance(
        id="d", kind=TaskKind.COIN_CHANGE, payload=DPInstance.from_problem(problem)
    )
    bare = TaskInstance(id="d", kind=TaskKind.COIN_CHANGE, payload=problem)
    assert build_messages("dp_io", wrapped) == build_messages("dp_io", bare)
    assert describe_problem(problem) in build_messages("dp_cot", bare)[-1].content


def test_bias_probe_messages():
    probe = make_bias_probe(3, rng_seed=7)
    messages = build_messages(
        "bias_probe", TaskInstance(id="p", kind=TaskKind.BIAS_PROBE, payload=probe)
    )
    assert len(messages) == 1
    assert messages[0].role is Role.USER
    assert messages[0].content == render_probe(probe)
    assert messages[0].content.endswith(probe.query)
    for equation in probe.prefix_equations:
        assert equation in messages[0].content


def test_zero_shot_strategy_is_kind_agnostic():
    for instance in (game((1, 2, 3, 4)), WRITING):
        messages = build_messages("zero_shot_strategy", instance, question="Why?")
        assert messages[-1].content.startswith("Why?")


def test_templates_are_cached_and_deterministic():
    assert get_template("aot_dfs") is get_template("aot_dfs")
    once = build_messages("aot_bfs", game((13, 12, 5, 2)))
    again = build_messages("aot_bfs", game((13, 12, 5, 2)))
    assert once == again


@settings(max_examples=30, deadline=None)
@given(st.tuples(*[st.integers(1, 13)] * 4))
def test_game24_query_is_the_numbers_line(numbers):
    messages = build_messages("aot_dfs", game(numbers))
    assert len(messages) == 22
    assert messages[-1].content == format_numbers(numbers)


# ------------------------------------------------------------------ fixtures


def test_parse_dialogue_rejects_garbage():
    with pytest.raises(PromptError):
        parse_dialogue("stray text\nUser:\n  hi")
    with pytest.raises(PromptError):
        parse_dialogue("User:\nAssistant:\n  reply")  # empty user message


def test_parse_dialogue_separators_and_indent():
    text = "User:\n    line one\n    ~~~~\nAssistant:\n    line two\n      deeper"
    messages = parse_dialogue(text)
    assert messages == [
        (Role.USER, "line one"),
        (Role.ASSISTANT, "line two\n  deeper"),
    ]


def test_parse_body_dedents():
    assert parse_body("  a\n\n   b\n") == "a\n\n b"


# ------------------------------------------------------------------- export


def test_export_cot_records():
    records = list(export_finetune_dataset([game((8, 6, 4, 4), id="g1")], FinetuneStyle.COT))
    assert len(records) == 1
    (record,) = records
    roles = [m["role"] for m in record["messages"]]
    assert roles in (["user"], ["system", "user"])
    assert record["messages"][-1]["content"] == "8 6 4 4"

    target = record["target"].splitlines()
    step_headers = [line for line in target if line.startswith("Step ")]
    assert step_headers == ["Step 1:", "Step 2:", "Step 3:"]

    chain = next(line for line in target if line.startswith("Considering these steps: "))
    hops = chain.removeprefix("Considering these steps: ").rstrip(".").split(" = ")
    assert hops[0] == "24" and hops[-1] == "24"
    assert len(hops) >= 4
    for hop in hops[1:-1]:
        assert eval_expr(parse_expr(hop)) == 24

    assert validate_answer(target[-1], (8, 6, 4, 4)).valid


def test_export_aot_records_round_trip():
    records = list(export_finetune_dataset([game((8, 6, 4, 4))], FinetuneStyle.AOT))
    (record,) = records
    trace = parse_trace24(record["target"])
    assert not any(line.kind is LineKind.OPAQUE for line in trace.lines)
    assert trace.diagnostics == ()
    assert trace.found_marker is not None
    assert validate_answer(trace.answer_line, (8, 6, 4, 4)).valid


def test_export_skips_unsolvable_games(caplog):
    with caplog.at_level(logging.WARNING, logger="aot_harness.prompts"):
        records = list(export_finetune_dataset([game((1, 1, 1, 1))], FinetuneStyle.COT))
    assert records == []
    assert any("unsolvable" in message for message in caplog.messages)


def test_export_aot_skips_games_needing_fractions(caplog):
    # 6 / (1 - 3/4) reaches 24 only through a fractional intermediate, which
    # the rendered walk never enters; the linear style still covers it.
    pruning_blind = game((1, 3, 4, 6))
    with caplog.at_level(logging.WARNING, logger="aot_harness.prompts"):
        aot_records = list(export_finetune_dataset([pruning_blind], FinetuneStyle.AOT))
    assert aot_records == []
    assert any("pruning" in message for message in caplog.messages)
    assert len(list(export_finetune_dataset([pruning_blind], FinetuneStyle.COT))) == 1


def test_export_rejects_other_tasks():
    with pytest.raises(PromptError):
        list(export_finetune_dataset([XWORD], FinetuneStyle.COT))

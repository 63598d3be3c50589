"""Tests for shared types: usage arithmetic, config invariants, aggregation."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aot_harness.core import (
    ChatMessage,
    Exactness,
    MethodConfig,
    Outcome,
    Role,
    Strategy,
    TokenUsage,
    aggregate,
    percent,
    render_mean,
)


def outcome(success=True, queries=1, pt=100, ct=50, **kw):
    usage = TokenUsage(pt, ct, kw.pop("exactness", Exactness.REPORTED))
    return Outcome(
        success=success,
        manual_resolution_success=kw.pop("manual", success),
        usage=usage,
        queries=queries,
        **kw,
    )


class TestTokenUsage:
    def test_addition_sums_and_stays_reported(self):
        total = TokenUsage(100, 20) + TokenUsage(50, 30)
        assert (total.prompt_tokens, total.completion_tokens) == (150, 50)
        assert total.exactness is Exactness.REPORTED

    def test_approximate_is_contagious(self):
        total = TokenUsage(100, 20) + TokenUsage(1, 1, Exactness.APPROXIMATE)
        assert total.exactness is Exactness.APPROXIMATE

    def test_approximate_estimator_rounds_up(self):
        usage = TokenUsage.approximate(9, 4)
        assert (usage.prompt_tokens, usage.completion_tokens) == (3, 1)
        assert usage.exactness is Exactness.APPROXIMATE

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            TokenUsage(-1, 0)


class TestMethodConfig:
    def test_aot_forces_single_sample(self):
        cfg = MethodConfig(Strategy.AOT, samples=100)
        assert cfg.samples == 1

    def test_aot_bfs_also_single(self):
        assert MethodConfig(Strategy.AOT_BFS, samples=7).samples == 1

    def test_cot_sc_keeps_samples(self):
        assert MethodConfig(Strategy.COT_SC, samples=100).samples == 100

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            MethodConfig(Strategy.IO, samples=0)
        with pytest.raises(ValueError):
            MethodConfig(Strategy.IO, max_tokens=0)
        with pytest.raises(ValueError):
            MethodConfig(Strategy.IO, temperature=Fraction(-1))


class TestOutcome:
    def test_success_implies_manual(self):
        with pytest.raises(ValueError):
            Outcome(
                success=True,
                manual_resolution_success=False,
                usage=TokenUsage(1, 1),
                queries=1,
            )

    def test_queries_at_least_one(self):
        with pytest.raises(ValueError):
            outcome(queries=0)


class TestChatMessage:
    def test_rejects_empty_content(self):
        with pytest.raises(ValueError):
            ChatMessage(Role.USER, "")


class TestAggregate:
    def test_rates_are_exact(self):
        rows = [outcome(True), outcome(False), outcome(False)]
        report = aggregate(rows)
        assert report.success_rate == Fraction(1, 3)
        assert report.manual_resolution_rate == Fraction(1, 3)
        assert report.count == 3

    def test_means(self):
        rows = [outcome(queries=1, pt=100, ct=40), outcome(queries=3, pt=200, ct=60)]
        report = aggregate(rows)
        assert report.mean_queries == 2
        assert report.mean_prompt_tokens == 150
        assert report.mean_completion_tokens == 50

    def test_error_histogram(self):
        rows = [
            outcome(False, error_class="OutOfToken"),
            outcome(False, error_class="OutOfToken"),
            outcome(False, error_class="Other"),
            outcome(True),
        ]
        assert aggregate(rows).error_histogram == {"OutOfToken": 2, "Other": 1}

    def test_exactness_propagates(self):
        rows = [outcome(), outcome(exactness=Exactness.APPROXIMATE)]
        assert aggregate(rows).exactness is Exactness.APPROXIMATE
        assert aggregate([outcome()]).exactness is Exactness.REPORTED

    def test_mean_score(self):
        rows = [outcome(score=Fraction(8)), outcome(score=Fraction(7)), outcome()]
        assert aggregate(rows).mean_score == Fraction(15, 2)
        assert aggregate([outcome()]).mean_score is None

    def test_empty_is_an_error(self):
        with pytest.raises(ValueError):
            aggregate([])

    @given(st.lists(st.booleans(), min_size=1, max_size=12), st.randoms())
    def test_permutation_invariant(self, flags, rng):
        rows = [outcome(success=f, queries=i + 1, pt=i * 10, ct=i) for i, f in enumerate(flags)]
        shuffled = rows[:]
        rng.shuffle(shuffled)
        assert aggregate(rows) == aggregate(shuffled)


class TestRendering:
    def test_percent_one_decimal(self):
        assert percent(Fraction(71, 100)) == "71.0%"
        assert percent(Fraction(1, 3)) == "33.3%"
        assert percent(Fraction(1)) == "100.0%"
        assert percent(Fraction(0)) == "0.0%"

    def test_render_mean(self):
        assert render_mean(Fraction(1)) == "1"
        assert render_mean(Fraction(1091, 10)) == "109.1"
        assert render_mean(Fraction(2, 3)) == "0.7"

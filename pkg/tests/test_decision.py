import json
import random

import pytest

from stepchat import actions
from stepchat.actions import SessionPhase, render_action, scope_for
from stepchat.decision import (
    DatasetProblem,
    DecisionContext,
    DecisionRecord,
    decide_pattern,
    decide_remote,
    evaluate,
    load_dataset,
    record_from_dict,
    record_to_dict,
    save_dataset,
)
from stepchat.gateway import Gateway, GenRequest, MockBackend


def ctx(utterance, phase=SessionPhase.SEARCH, has_task=False, visible=0, previous=""):
    return DecisionContext(
        utterance=utterance,
        previous_system_response=previous,
        scope=scope_for(phase, has_task, visible),
    )


EXECUTION = dict(phase=SessionPhase.EXECUTION, has_task=True)
RESULTS = dict(phase=SessionPhase.RESULTS, visible=3)


class TestPatternCascade:
    def test_exact_navigation_keyword(self):
        assert decide_pattern(ctx("next", **EXECUTION)) == actions.NEXT

    def test_keyword_requires_exact_match(self):
        # "what's next" is not token-exact; the question rule catches it instead
        assert decide_pattern(ctx("what's next", **EXECUTION)) == actions.ASK_QUESTION

    def test_question_lead_word(self):
        assert (
            decide_pattern(ctx("how do I julienne carrots?", **EXECUTION))
            == actions.ASK_QUESTION
        )

    def test_default_to_search(self):
        assert decide_pattern(ctx("vegan lasagna")) == actions.search("vegan lasagna")

    def test_unknown_when_search_out_of_scope(self):
        assert decide_pattern(ctx("sing me a song", **EXECUTION)) == actions.unknown(
            "sing me a song"
        )

    def test_ordinal_selection(self):
        assert decide_pattern(ctx("the second one", **RESULTS)) == actions.select(2)
        assert decide_pattern(ctx("number 3", **RESULTS)) == actions.select(3)
        assert decide_pattern(ctx("select 2", **RESULTS)) == actions.select(2)
        assert decide_pattern(ctx("1", **RESULTS)) == actions.select(1)

    def test_ordinal_out_of_scope_falls_through_to_search(self):
        # no visible results: "number 3" cannot select, lands on search
        assert decide_pattern(ctx("number 3")) == actions.search("number 3")

    def test_step_reference(self):
        assert decide_pattern(ctx("step 3", **EXECUTION)) == actions.step_select(3)
        assert decide_pattern(ctx("go to step 2", **EXECUTION)) == actions.step_select(2)

    def test_timer_phrasings(self):
        assert decide_pattern(
            ctx("set a timer for 10 minutes", **EXECUTION)
        ) == actions.set_timer("10 minutes")
        assert decide_pattern(ctx("set timer", **EXECUTION)) == actions.set_timer()

    def test_requirements_phrasings(self):
        assert (
            decide_pattern(ctx("what do I need", **EXECUTION))
            == actions.SHOW_REQUIREMENTS
        )
        assert (
            decide_pattern(ctx("show requirements", **EXECUTION))
            == actions.SHOW_REQUIREMENTS
        )
        assert decide_pattern(ctx("ingredients", **EXECUTION)) == actions.SHOW_REQUIREMENTS

    def test_more_results_and_details(self):
        assert decide_pattern(ctx("more results", **RESULTS)) == actions.SHOW_MORE_RESULTS
        assert decide_pattern(ctx("more options", **RESULTS)) == actions.SHOW_MORE_RESULTS
        assert (
            decide_pattern(ctx("tell me more", **EXECUTION)) == actions.SHOW_MORE_DETAILS
        )
        assert (
            decide_pattern(ctx("more details", **EXECUTION)) == actions.SHOW_MORE_DETAILS
        )

    def test_trailing_question_mark(self):
        assert decide_pattern(ctx("is this oven-safe?", **EXECUTION)) == actions.ASK_QUESTION

    def test_determinism(self):
        c = ctx("set a timer for 5 minutes", **EXECUTION)
        assert decide_pattern(c) == decide_pattern(c)

    def test_never_out_of_scope(self):
        rng = random.Random(11)
        corpus_words = ["next", "what", "3", "step 2", "more results", "fix the door",
                        "ingredients", "set a timer for 2 minutes", "blah blah", "yes"]
        for _ in range(500):
            utterance = rng.choice(corpus_words)
            phase = rng.choice(list(SessionPhase))
            has_task = rng.random() < 0.5
            visible = rng.choice([0, 1, 3, 5])
            code = decide_pattern(ctx(utterance, phase=phase, has_task=has_task, visible=visible))
            if not code.is_unknown:
                assert code in scope_for(phase, has_task, visible)


class TestRemote:
    def _gateway(self, reply):
        mock = MockBackend()
        mock.add_canned("decide", reply)
        return Gateway(backend=mock)

    def test_valid_in_scope_code(self):
        gw = self._gateway("select(2)")
        code = decide_remote(ctx("the second", **RESULTS), gw)
        assert code == actions.select(2)

    def test_out_of_grammar_sinks(self):
        gw = self._gateway("fly_to_moon()")
        code = decide_remote(ctx("to the moon"), gw)
        assert code == actions.unknown("fly_to_moon()")

    def test_out_of_scope_sinks(self):
        # scope table says next needs an active task
        gw = self._gateway("next")
        assert "next" not in scope_for(SessionPhase.SEARCH, False, 0)
        code = decide_remote(ctx("continue"), gw)
        assert code == actions.unknown("next")

    def test_first_line_only(self):
        gw = self._gateway("next\nsome rambling")
        code = decide_remote(ctx("keep going", **EXECUTION), gw)
        assert code == actions.NEXT

    def test_gateway_error_degrades_with_annotation(self):
        class Exploding(MockBackend):
            def generate(self, prompt, request, timeout_ms=5000):
                from stepchat.gateway import TransportError

                raise TransportError("downed")

        errors = []
        gw = Gateway(backend=Exploding())
        code = decide_remote(ctx("hello there"), gw, on_error=errors.append)
        assert code == actions.unknown("hello there")
        assert errors and "TransportError" in errors[0]

    def test_prompt_embeds_scope_and_context(self):
        mock = MockBackend()
        mock.add_canned("decide", "yes")
        gw = Gateway(backend=mock)
        decide_remote(ctx("sure", previous="Shall I start?", **EXECUTION), gw)
        slots = mock.calls[-1].slots
        assert "step_select(int)" in slots["actions"]
        assert "search(query: string)" not in slots["actions"]  # not in execution scope
        assert slots["previous_response"] == "Shall I start?"
        assert slots["utterance"] == "sure"


class TestDatasetAndEvaluate:
    def _record(self, utterance, gold, **scope_kwargs):
        return DecisionRecord(context=ctx(utterance, **scope_kwargs), gold_action=gold)

    def test_record_round_trip(self, tmp_path):
        records = [
            self._record("next", actions.NEXT, **EXECUTION),
            self._record("vegan lasagna", actions.search("vegan lasagna")),
        ]
        path = tmp_path / "dataset.jsonl"
        assert save_dataset(records, path) == 2
        loaded = [r for r in load_dataset(path)]
        assert all(isinstance(r, DecisionRecord) for r in loaded)
        assert [render_action(r.gold_action) for r in loaded] == [
            "next",
            'search(query: "vegan lasagna")',
        ]

    def test_gold_must_be_in_scope(self):
        with pytest.raises(ValueError, match="not in scope"):
            self._record("next", actions.NEXT)  # no active task -> next out of scope

    def test_malformed_lines_become_problems(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            "\n".join(
                [
                    json.dumps(
                        {
                            "utterance": "next",
                            "previous_system_response": "",
                            "scope_phase": "execution",
                            "has_active_task": True,
                            "visible_results": 0,
                            "gold_action": "next",
                        }
                    ),
                    "{not json",
                    json.dumps({"utterance": "x"}),  # missing fields
                ]
            ),
            encoding="utf-8",
        )
        items = list(load_dataset(path))
        assert isinstance(items[0], DecisionRecord)
        assert isinstance(items[1], DatasetProblem)
        assert isinstance(items[2], DatasetProblem)

    def test_evaluate_empty(self):
        report = evaluate([], decide_pattern)
        assert report.total == 0
        assert report.accuracy is None
        assert report.to_dict()["accuracy"] is None

    def test_evaluate_gold_oracle_hits_one(self):
        records = [
            self._record("next", actions.NEXT, **EXECUTION),
            self._record("how long?", actions.ASK_QUESTION, **EXECUTION),
            self._record("2", actions.select(2), **RESULTS),
        ]
        report = evaluate(records, lambda c: decide_pattern(c))
        assert report.total == 3
        assert report.exact_match == 3
        assert report.accuracy == 1.0
        for stats in report.per_category.values():
            assert stats.accuracy == 1.0

    def test_evaluate_counts_and_confusion(self):
        records = [
            self._record("go back", actions.PREVIOUS, **EXECUTION),  # cascade misses
            self._record("next", actions.NEXT, **EXECUTION),
        ]
        report = evaluate(records, decide_pattern)
        assert report.total == 2
        assert report.exact_match == 1
        assert sum(n for _, _, n in report.confusion) == 2
        per_category_total = sum(s.total for s in report.per_category.values())
        assert per_category_total == report.total

    def test_order_permutation_keeps_counts(self):
        records = [
            self._record("next", actions.NEXT, **EXECUTION),
            self._record("stop", actions.STOP, **EXECUTION),
            self._record("go back", actions.PREVIOUS, **EXECUTION),
        ]
        a = evaluate(records, decide_pattern)
        b = evaluate(list(reversed(records)), decide_pattern)
        assert a.total == b.total and a.exact_match == b.exact_match
        assert sorted(map(tuple, a.confusion)) == sorted(map(tuple, b.confusion))

    def test_skipped_counted(self, tmp_path):
        path = tmp_path / "mixed.jsonl"
        path.write_text("{broken\n", encoding="utf-8")
        report = evaluate(load_dataset(path), decide_pattern)
        assert report.skipped == 1
        assert report.diagnostics

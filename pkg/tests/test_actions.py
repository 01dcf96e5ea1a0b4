import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepchat import actions
from stepchat.actions import (
    ActionCategory,
    SessionPhase,
    all_action_names,
    parse_action,
    render_action,
    scope_for,
)

NO_ARG_NAMES = [
    n for n in all_action_names() if n not in ("select", "step_select", "search", "set_timer")
]

indices = st.integers(min_value=1, max_value=9999)
queries = st.text(min_size=1, max_size=80).filter(lambda s: s.strip())
timer_specs = st.one_of(
    st.none(), st.text(min_size=1, max_size=40).filter(lambda s: s.strip())
)

action_codes = st.one_of(
    st.sampled_from(NO_ARG_NAMES).map(actions.ActionCode),
    indices.map(actions.select),
    indices.map(actions.step_select),
    queries.map(actions.search),
    timer_specs.map(actions.set_timer),
)


class TestParse:
    def test_select_int(self):
        assert parse_action("select(3)") == actions.select(3)

    def test_search_quoted_query(self):
        assert parse_action('search(query: "lasagna")') == actions.search("lasagna")

    def test_empty_string_is_unknown(self):
        assert parse_action("") == actions.unknown("")

    def test_out_of_grammar_is_unknown(self):
        assert parse_action("teleport_home()") == actions.unknown("teleport_home()")

    def test_case_and_whitespace_insensitive(self):
        assert parse_action("  NEXT ") == actions.NEXT
        assert parse_action("Select ( 12 )") == actions.select(12)
        assert parse_action('SEARCH( QUERY : "Tacos" )') == actions.search("Tacos")

    def test_zero_and_negative_indices_rejected(self):
        assert parse_action("select(0)").is_unknown
        assert parse_action("select(-2)").is_unknown

    def test_empty_query_rejected(self):
        assert parse_action('search(query: "")').is_unknown
        assert parse_action('search(query: "   ")').is_unknown

    def test_unquoted_query_rejected(self):
        assert parse_action("search(lasagna)").is_unknown

    def test_set_timer_forms(self):
        assert parse_action("set_timer") == actions.set_timer()
        assert parse_action("set_timer()") == actions.set_timer()
        assert parse_action('set_timer("10 minutes")') == actions.set_timer("10 minutes")
        assert parse_action("set_timer(10 minutes)") == actions.set_timer("10 minutes")

    def test_trailing_garbage_rejected(self):
        assert parse_action("next please").is_unknown
        assert parse_action('search(query: "x") extra').is_unknown


class TestRender:
    def test_plain_names(self):
        assert render_action(actions.NEXT) == "next"
        assert render_action(actions.RESTART) == "restart"
        assert render_action(actions.PREVIOUS) == "previous"

    def test_search_canonical_form(self):
        assert (
            render_action(actions.search("fix squeaky door"))
            == 'search(query: "fix squeaky door")'
        )

    def test_step_select(self):
        assert render_action(actions.step_select(1)) == "step_select(1)"

    def test_unknown_has_no_rendering(self):
        with pytest.raises(ValueError):
            render_action(actions.unknown("huh"))


class TestConstructors:
    def test_bad_index(self):
        with pytest.raises(ValueError):
            actions.select(0)

    def test_blank_query(self):
        with pytest.raises(ValueError):
            actions.search("   ")

    def test_blank_timer_spec_normalises_to_none(self):
        assert actions.set_timer("  ") == actions.set_timer()


@settings(max_examples=500)
@given(action_codes)
def test_round_trip(code):
    assert parse_action(render_action(code)) == code


@settings(max_examples=500)
@given(st.text(max_size=200))
def test_parse_total_on_arbitrary_text(text):
    code = parse_action(text)
    assert code is not None
    if code.is_unknown:
        assert code.raw == text


# Independent scope oracle: per-action predicates written out longhand,
# separately from the grouped implementation.
def _oracle_allows(name, phase, has_task, visible):
    if name in ("ask_question", "chit_chat", "inform_capabilities", "confused_user"):
        return True
    if name in ("yes", "no", "stop", "cancel", "repeat", "pause"):
        return True
    if name == "search":
        return phase is not SessionPhase.EXECUTION
    if name in ("select", "show_more_results"):
        return visible > 0
    if name in (
        "next",
        "previous",
        "restart",
        "step_select",
        "show_requirements",
        "set_timer",
        "show_more_details",
    ):
        return has_task
    if name == "start_task":
        return phase is SessionPhase.TASK_PREVIEW
    raise AssertionError(name)


ALL_COMBOS = [
    (phase, has_task, visible)
    for phase in SessionPhase
    for has_task in (False, True)
    for visible in (0, 1, 3)
]


@pytest.mark.parametrize("phase,has_task,visible", ALL_COMBOS)
def test_scope_matches_rule_table(phase, has_task, visible):
    scope = scope_for(phase, has_task, visible)
    expected = {
        name
        for name in all_action_names()
        if _oracle_allows(name, phase, has_task, visible)
    }
    assert scope.allowed == expected


def test_scope_examples():
    search_scope = scope_for(SessionPhase.SEARCH, False, 0)
    assert "select" not in search_scope
    assert "next" not in search_scope
    execution_scope = scope_for(SessionPhase.EXECUTION, True, 0)
    for name in ("next", "previous", "set_timer"):
        assert name in execution_scope


def test_scope_never_contains_unknown():
    for phase, has_task, visible in ALL_COMBOS:
        scope = scope_for(phase, has_task, visible)
        assert "unknown" not in scope.allowed
        assert not scope.admits(actions.unknown("x"))


def test_scope_monotonic_in_active_task():
    for phase in SessionPhase:
        for visible in (0, 2, 5):
            without = scope_for(phase, False, visible).allowed
            with_task = scope_for(phase, True, visible).allowed
            assert with_task >= without


def test_every_action_reachable_from_some_scope():
    reachable = set()
    for phase, has_task, visible in ALL_COMBOS:
        reachable |= scope_for(phase, has_task, visible).allowed
    assert reachable == set(all_action_names())


def test_categories_cover_grammar():
    by_category = {}
    for name in all_action_names():
        code = parse_action(name) if name not in ("select", "step_select", "search") else None
        if name == "select":
            code = actions.select(1)
        elif name == "step_select":
            code = actions.step_select(1)
        elif name == "search":
            code = actions.search("x")
        by_category.setdefault(code.category, []).append(name)
    assert set(by_category) == {
        ActionCategory.TASK_NAVIGATION,
        ActionCategory.CONVERSATIONAL,
        ActionCategory.GENERAL_NAVIGATION,
        ActionCategory.DOMAIN_SPECIFIC,
    }
    assert len(by_category[ActionCategory.TASK_NAVIGATION]) == 6
    assert len(by_category[ActionCategory.CONVERSATIONAL]) == 4
    assert len(by_category[ActionCategory.GENERAL_NAVIGATION]) == 7
    assert len(by_category[ActionCategory.DOMAIN_SPECIFIC]) == 4


def test_signatures():
    scope = scope_for(SessionPhase.RESULTS, False, 3)
    sigs = scope.signatures()
    assert "select(int)" in sigs
    assert "search(query: string)" in sigs
    assert sigs == [s for s in sigs]  # stable list

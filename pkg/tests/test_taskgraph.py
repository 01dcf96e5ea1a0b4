import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepchat.taskgraph import (
    KnowledgeChunk,
    MediaRef,
    Requirement,
    SchemaError,
    StepNode,
    TaskCursor,
    TaskGraph,
    TaskGraphError,
    append_step,
    deserialize_graph,
    graph_from_dict,
    remove_step,
    reschedule_step,
    serialize_graph,
    substitute_requirement,
    validate_graph,
)


def make_graph(n_steps=3, **overrides) -> TaskGraph:
    fields = dict(
        id="demo-task",
        title="Demo Task",
        domain="cooking",
        source_url="https://example.test/demo",
        steps=[StepNode(id=f"s{i}", text=f"do thing {i}") for i in range(n_steps)],
        requirements=[Requirement(name="butter", quantity="200g")],
    )
    fields.update(overrides)
    return TaskGraph(**fields)


class TestAppend:
    def test_insert_middle(self):
        g = make_graph(2)
        out = append_step(g, 0, StepNode(id="new", text="inserted"))
        assert [s.id for s in out.steps] == ["s0", "new", "s1"]
        assert [s.id for s in g.steps] == ["s0", "s1"]  # input untouched

    def test_prepend(self):
        g = make_graph(1)
        out = append_step(g, -1, StepNode(id="new", text="first now"))
        assert [s.id for s in out.steps] == ["new", "s0"]

    def test_append_at_end(self):
        g = make_graph(2)
        out = append_step(g, 1, StepNode(id="new", text="last"))
        assert [s.id for s in out.steps] == ["s0", "s1", "new"]

    def test_duplicate_id_rejected(self):
        g = make_graph(2)
        with pytest.raises(TaskGraphError, match="duplicate"):
            append_step(g, 0, StepNode(id="s1", text="clash"))

    def test_out_of_range(self):
        g = make_graph(2)
        with pytest.raises(TaskGraphError):
            append_step(g, 2, StepNode(id="new", text="x"))
        with pytest.raises(TaskGraphError):
            append_step(g, -2, StepNode(id="new", text="x"))


def _oracle_remove(ids, index, cursor_index):
    """Re-derive the post-removal cursor by naive re-indexing."""
    remaining = ids[:index] + ids[index + 1 :]
    if cursor_index is None:
        return remaining, None
    if cursor_index > index:
        return remaining, cursor_index - 1
    if cursor_index == index:
        return remaining, min(index, len(remaining) - 1)
    return remaining, cursor_index


class TestRemove:
    def test_spec_case_cursor_behind(self):
        g = make_graph(3)
        out, cursor = remove_step(g, 1, TaskCursor("demo-task", 2))
        assert [s.id for s in out.steps] == ["s0", "s2"]
        assert cursor.index == 1

    def test_spec_case_cursor_on_removed(self):
        g = make_graph(2)
        out, cursor = remove_step(g, 0, TaskCursor("demo-task", 0))
        assert [s.id for s in out.steps] == ["s1"]
        assert cursor.index == 0

    def test_cannot_remove_only_step(self):
        g = make_graph(1)
        with pytest.raises(TaskGraphError, match="only step"):
            remove_step(g, 0)

    def test_invalid_index(self):
        g = make_graph(3)
        with pytest.raises(TaskGraphError):
            remove_step(g, 3)

    def test_all_small_cases_match_oracle(self):
        for n in range(2, 5):
            for index in range(n):
                for cursor_index in [None] + list(range(n)):
                    g = make_graph(n)
                    cursor = (
                        TaskCursor("demo-task", cursor_index)
                        if cursor_index is not None
                        else None
                    )
                    out, out_cursor = remove_step(g, index, cursor)
                    want_ids, want_cursor = _oracle_remove(
                        [s.id for s in g.steps], index, cursor_index
                    )
                    assert [s.id for s in out.steps] == want_ids
                    got = out_cursor.index if out_cursor else None
                    assert got == want_cursor
                    if got is not None:
                        assert 0 <= got < len(out.steps)


class TestReschedule:
    def test_rotation(self):
        g = make_graph(3)
        out, _ = reschedule_step(g, 0, 2)
        assert [s.id for s in out.steps] == ["s1", "s2", "s0"]

    def test_noop(self):
        g = make_graph(3)
        out, cursor = reschedule_step(g, 1, 1, TaskCursor("demo-task", 2))
        assert [s.id for s in out.steps] == ["s0", "s1", "s2"]
        assert cursor.index == 2

    def test_spec_case_cursor_follows(self):
        g = make_graph(3)
        out, cursor = reschedule_step(g, 2, 0, TaskCursor("demo-task", 2))
        assert [s.id for s in out.steps] == ["s2", "s0", "s1"]
        assert cursor.index == 0

    def test_invalid_indices(self):
        g = make_graph(3)
        with pytest.raises(TaskGraphError):
            reschedule_step(g, 3, 0)
        with pytest.raises(TaskGraphError):
            reschedule_step(g, 0, -1)

    def test_all_small_cases_track_step_identity(self):
        # brute-force oracle: the cursor must end up wherever its step ended up
        for n in range(1, 5):
            for src in range(n):
                for dst in range(n):
                    for cursor_index in range(n):
                        g = make_graph(n)
                        tracked = g.steps[cursor_index].id
                        out, cursor = reschedule_step(
                            g, src, dst, TaskCursor("demo-task", cursor_index)
                        )
                        assert sorted(s.id for s in out.steps) == sorted(
                            s.id for s in g.steps
                        )
                        assert out.steps[cursor.index].id == tracked


class TestSubstitute:
    def test_replace(self):
        g = make_graph(2)
        out = substitute_requirement(
            g, "butter", Requirement(name="margarine", quantity="200g")
        )
        assert [r.name for r in out.requirements] == ["margarine"]
        assert [r.name for r in g.requirements] == ["butter"]

    def test_case_insensitive(self):
        g = make_graph(2, requirements=[Requirement(name="Butter")])
        out = substitute_requirement(g, "butter", Requirement(name="margarine"))
        assert out.requirements[0].name == "margarine"

    def test_missing_name(self):
        g = make_graph(2)
        with pytest.raises(TaskGraphError, match="spaceship"):
            substitute_requirement(g, "spaceship", Requirement(name="x"))

    def test_step_texts_untouched(self):
        g = make_graph(2)
        out = substitute_requirement(g, "butter", Requirement(name="margarine"))
        assert [s.text for s in out.steps] == [s.text for s in g.steps]


steps_strategy = st.lists(
    st.builds(
        StepNode,
        id=st.uuids().map(str),
        text=st.text(min_size=1, max_size=30),
        spoken_text=st.none() | st.text(min_size=1, max_size=30),
        duration_seconds=st.none() | st.integers(min_value=1, max_value=9000),
    ),
    min_size=1,
    max_size=6,
    unique_by=lambda s: s.id,
)

graphs_strategy = st.builds(
    TaskGraph,
    id=st.text(min_size=1, max_size=12),
    title=st.text(min_size=1, max_size=30),
    domain=st.sampled_from(["cooking", "diy", "other"]),
    source_url=st.text(max_size=30),
    author=st.none() | st.text(min_size=1, max_size=20),
    tags=st.lists(st.text(min_size=1, max_size=10), max_size=4),
    rating=st.none() | st.floats(min_value=0, max_value=5, allow_nan=False),
    requirements=st.lists(
        st.builds(
            Requirement,
            name=st.text(min_size=1, max_size=20),
            quantity=st.none() | st.text(min_size=1, max_size=10),
            optional_flag=st.booleans(),
        ),
        max_size=4,
    ),
    steps=steps_strategy,
    knowledge=st.lists(
        st.builds(
            KnowledgeChunk,
            text=st.text(min_size=1, max_size=50),
            source_url=st.text(max_size=20),
        ),
        max_size=3,
    ),
    hero_image=st.none()
    | st.builds(
        MediaRef,
        kind=st.sampled_from(["image", "video"]),
        url=st.text(min_size=1, max_size=30),
        caption=st.none() | st.text(min_size=1, max_size=20),
        step_offset_seconds=st.none() | st.integers(min_value=0, max_value=600),
    ),
)


@settings(max_examples=200)
@given(graphs_strategy)
def test_serialization_round_trip(g):
    assert deserialize_graph(serialize_graph(g)) == g


def test_missing_title_names_field():
    with pytest.raises(SchemaError, match="title"):
        graph_from_dict({"id": "x", "steps": []})


def test_unknown_extra_field_ignored():
    g = make_graph(1)
    import json

    obj = json.loads(serialize_graph(g))
    obj["future_field"] = {"anything": 1}
    assert graph_from_dict(obj) == g


def test_schema_error_paths_are_precise():
    with pytest.raises(SchemaError, match=r"steps\[0\]\.text"):
        graph_from_dict(
            {"id": "x", "title": "t", "steps": [{"id": "s0"}]}
        )


def test_validate_catches_problems():
    g = make_graph(2)
    g.steps[1] = StepNode(id="s0", text="dup id")
    problems = validate_graph(g)
    assert any("duplicate" in p for p in problems)
    g2 = make_graph(0)
    assert any("steps" in p for p in validate_graph(g2))
    g3 = make_graph(1, rating=7.5)
    assert any("rating" in p for p in validate_graph(g3))


def test_random_mutation_sequences_keep_invariants():
    rng = random.Random(52)
    for _ in range(300):
        n = rng.randint(1, 10)
        g = make_graph(n)
        cursor = TaskCursor("demo-task", rng.randrange(n))
        next_id = n
        for _ in range(rng.randint(1, 50)):
            op = rng.choice(["append", "remove", "reschedule"])
            size = len(g.steps)
            if op == "append" and size < 10:
                g = append_step(
                    g,
                    rng.randint(-1, size - 1),
                    StepNode(id=f"s{next_id}", text="added"),
                )
                next_id += 1
            elif op == "remove" and size >= 2:
                g, cursor = remove_step(g, rng.randrange(size), cursor)
            elif op == "reschedule":
                g, cursor = reschedule_step(
                    g, rng.randrange(size), rng.randrange(size), cursor
                )
            ids = [s.id for s in g.steps]
            assert len(ids) == len(set(ids))
            assert 0 <= cursor.index < len(g.steps)

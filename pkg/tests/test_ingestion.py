import json
from pathlib import Path

import pytest

from stepchat.gateway import Gateway, MockBackend, default_mock
from stepchat.ingestion import (
    RawDocument,
    augment_llm_rewrite,
    augment_spoken,
    load_documents,
    media_augmenter,
    parse_heuristic,
    parse_iso_duration,
    parse_structured,
    run_pipeline,
    spoken_augmenter,
)
from stepchat.taskgraph import StepNode, TaskGraph, read_corpus

from conftest import FIXTURE_PAGES


def load_fixture(name: str) -> RawDocument:
    return RawDocument(
        url=f"file://{name}", html=(FIXTURE_PAGES / name).read_text(encoding="utf-8")
    )


class TestStructuredParser:
    def test_recipe_counts_match_fixture(self):
        g = parse_structured(load_fixture("01-classic-vegan-lasagna.html"))
        assert g is not None
        assert len(g.steps) == 6
        assert len(g.requirements) == 9
        assert g.domain == "cooking"
        assert g.title == "Classic Vegan Lasagna"
        assert g.author == "Dana Romero"
        assert g.rating == 4.7
        assert g.source_url == "https://example.test/recipes/classic-vegan-lasagna"
        assert g.hero_image is not None

    def test_breadcrumbs_and_keywords_become_tags(self):
        g = parse_structured(load_fixture("01-classic-vegan-lasagna.html"))
        assert "Recipes" in g.tags and "Vegan" in g.tags
        assert "pasta" in g.tags  # from keywords, deduplicated case-insensitively
        assert g.tags.count("Vegan") == 1 and "vegan" not in g.tags

    def test_total_time_spread_over_steps(self):
        g = parse_structured(load_fixture("01-classic-vegan-lasagna.html"))
        assert sum(s.duration_seconds for s in g.steps) == 90 * 60

    def test_howto_supplies_and_tools(self):
        g = parse_structured(load_fixture("05-fix-squeaky-door.html"))
        assert g.domain == "diy"
        assert len(g.steps) == 4
        names = [r.name for r in g.requirements]
        assert "silicone spray lubricant" in names
        assert "flathead screwdriver" in names

    def test_step_level_images(self):
        g = parse_structured(load_fixture("05-fix-squeaky-door.html"))
        assert g.steps[1].media and g.steps[1].media[0].url.endswith("hinge-pin.jpg")

    def test_description_becomes_knowledge(self):
        g = parse_structured(load_fixture("02-easy-vegan-lasagna.html"))
        assert any("out of butter" in k.text for k in g.knowledge)

    def test_no_jsonld_gives_none(self):
        g = parse_structured(load_fixture("07-garden-compost-basics.html"))
        assert g is None

    def test_article_type_filtered(self):
        g = parse_structured(load_fixture("09-pasta-history.html"))
        assert g is None

    def test_malformed_jsonld_does_not_raise(self):
        doc = RawDocument(
            url="file://broken",
            html='<html><head><script type="application/ld+json">{oops</script></head>'
            "<body><h1>T</h1></body></html>",
        )
        assert parse_structured(doc) is None


class TestHeuristicParser:
    def test_compost_page(self):
        g = parse_heuristic(load_fixture("07-garden-compost-basics.html"))
        assert g is not None
        assert g.title == "Garden Compost Basics"
        assert len(g.steps) == 4
        assert [r.name for r in g.requirements][0] == "compost bin or wire enclosure"
        assert len(g.knowledge) == 2  # two long paragraphs

    def test_longest_ordered_list_wins(self):
        g = parse_heuristic(load_fixture("08-patch-drywall-holes.html"))
        assert len(g.steps) == 7
        assert g.steps[0].text.startswith("Sand the area")

    def test_prose_only_page_gives_none(self):
        assert parse_heuristic(load_fixture("09-pasta-history.html")) is None
        assert parse_heuristic(load_fixture("10-link-roundup.html")) is None

    def test_single_item_list_not_enough(self):
        doc = RawDocument(
            url="file://short",
            html="<html><body><h1>Too Short</h1><ol><li>only step</li></ol></body></html>",
        )
        assert parse_heuristic(doc) is None


def test_parse_iso_duration():
    assert parse_iso_duration("PT1H30M") == 5400
    assert parse_iso_duration("PT45M") == 2700
    assert parse_iso_duration("PT30S") == 30
    assert parse_iso_duration("P1DT2H") == 93600
    assert parse_iso_duration("nonsense") is None


class TestSpokenAugmenter:
    def _graph(self, n):
        return TaskGraph(
            id="g",
            title="T",
            steps=[StepNode(id=f"s{i}", text=f"Sentence one {i}. Sentence two. Three.") for i in range(n)],
        )

    def test_single_step_starts_with_first(self):
        g = augment_spoken(self._graph(1))
        assert g.steps[0].spoken_text.startswith("First,")

    def test_last_of_four_is_finally(self):
        g = augment_spoken(self._graph(4))
        assert g.steps[0].spoken_text.startswith("First,")
        assert g.steps[1].spoken_text.startswith("Next,")
        assert g.steps[2].spoken_text.startswith("Then,")
        assert g.steps[3].spoken_text.startswith("Finally,")

    def test_takes_first_two_sentences(self):
        g = augment_spoken(self._graph(1))
        assert "Three." not in g.steps[0].spoken_text

    def test_existing_spoken_text_untouched(self):
        base = self._graph(2)
        base.steps[0].spoken_text = "custom"
        g = augment_spoken(base)
        assert g.steps[0].spoken_text == "custom"

    def test_idempotent(self):
        once = augment_spoken(self._graph(3))
        twice = augment_spoken(once)
        assert once == twice


class TestLlmAugmenter:
    def test_details_populated_and_text_untouched(self):
        mock = MockBackend()
        mock.add_canned("step_rewrite", "Extra detail about technique.")
        gw = Gateway(backend=mock)
        g = TaskGraph(id="g", title="T", steps=[StepNode(id="s1", text="Do the thing.")])
        out = augment_llm_rewrite(g, gw)
        assert out.steps[0].details == "Extra detail about technique."
        assert out.steps[0].text == "Do the thing."

    def test_gateway_down_leaves_graph_unchanged(self):
        from stepchat.gateway import TransportError

        class Down(MockBackend):
            def generate(self, prompt, request, timeout_ms=5000):
                raise TransportError("offline")

        g = TaskGraph(id="g", title="T", steps=[StepNode(id="s1", text="Do the thing.")])
        out = augment_llm_rewrite(g, Gateway(backend=Down()))
        assert out == g


def test_media_augmenter_attaches_page_images():
    doc = load_fixture("07-garden-compost-basics.html")
    g = parse_heuristic(doc)
    g.hero_image = None
    augmenter = media_augmenter({g.source_url: doc})
    out = augmenter.apply(g)
    assert out.hero_image is not None
    assert out.hero_image.url.endswith("compost-bin.jpg")


class TestPipeline:
    def test_fixture_counts(self, tmp_path):
        report = run_pipeline(
            load_documents(FIXTURE_PAGES), [spoken_augmenter()], tmp_path / "out"
        )
        assert report.counts() == {
            "read": 10,
            "parsed_structured": 6,
            "parsed_heuristic": 2,
            "skipped": 2,
            "dropped": 0,
            "written": 8,
        }

    def test_artifacts_written_and_valid(self, tmp_path):
        out = tmp_path / "out"
        run_pipeline(load_documents(FIXTURE_PAGES), [spoken_augmenter()], out)
        graphs = read_corpus(out / "tasks.jsonl")
        assert len(graphs) == 8
        assert [g.id for g in graphs] == sorted(g.id for g in graphs)
        from stepchat.taskgraph import validate_graph

        for g in graphs:
            assert validate_graph(g) == []
        categories = json.loads((out / "categories.json").read_text())
        assert all(isinstance(ids, list) for ids in categories.values())
        knowledge_lines = (out / "knowledge.jsonl").read_text().strip().splitlines()
        assert all("text" in json.loads(line) for line in knowledge_lines)
        report = json.loads((out / "report.json").read_text())
        assert report["written"] == 8

    def test_empty_input(self, tmp_path):
        report = run_pipeline([], [], tmp_path / "empty")
        assert report.counts() == {
            "read": 0,
            "parsed_structured": 0,
            "parsed_heuristic": 0,
            "skipped": 0,
            "dropped": 0,
            "written": 0,
        }
        assert (tmp_path / "empty" / "tasks.jsonl").read_text() == ""

    def test_byte_identical_across_runs(self, tmp_path):
        docs = load_documents(FIXTURE_PAGES)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_pipeline(docs, [spoken_augmenter()], out1)
        run_pipeline(docs, [spoken_augmenter()], out2)
        for name in ("tasks.jsonl", "knowledge.jsonl", "categories.json", "report.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_invariant_arithmetic(self, tmp_path):
        report = run_pipeline(
            load_documents(FIXTURE_PAGES), [spoken_augmenter()], tmp_path / "out"
        )
        c = report.counts()
        assert c["parsed_structured"] + c["parsed_heuristic"] + c["skipped"] == c["read"]
        assert c["written"] + c["dropped"] == c["parsed_structured"] + c["parsed_heuristic"]

    def test_io_error_aborts_with_partial_manifest(self, tmp_path):
        blocker = tmp_path / "occupied"
        blocker.write_text("not a directory", encoding="utf-8")
        with pytest.raises(OSError):
            run_pipeline(load_documents(FIXTURE_PAGES), [], blocker)

    def test_invariant_violating_augmenter_drops(self, tmp_path):
        from stepchat.ingestion import Augmenter

        def wreck(g):
            g.steps[0].text = ""
            return g

        report = run_pipeline(
            load_documents(FIXTURE_PAGES),
            [Augmenter(id="wreck", applies_to="any", transform=wreck)],
            tmp_path / "out",
        )
        assert report.dropped == 8
        assert report.written == 0
        assert report.diagnostics

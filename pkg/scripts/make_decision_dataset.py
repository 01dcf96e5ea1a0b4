#!/usr/bin/env python3
"""Regenerate the bundled synthetic decision dataset (200 records).

Deterministic: a fixed seed drives every sampling choice, so rerunning this
script reproduces the committed file byte for byte. The set mixes utterances
the rule cascade handles with paraphrases it is known to miss, so the pinned
accuracy is a meaningful regression anchor rather than a guaranteed 1.0.

Usage: python3 scripts/make_decision_dataset.py [out_path]
"""

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stepchat import actions
from stepchat.actions import SessionPhase, scope_for
from stepchat.decision import (
    DecisionContext,
    DecisionRecord,
    decide_pattern,
    evaluate,
    save_dataset,
)

OUT = Path(__file__).resolve().parent.parent / "src" / "stepchat" / "data" / "decision_dataset.jsonl"

EXEC_PREV = [
    "Step 2: whisk in the soy milk and simmer.",
    "Step 4: sand the ridge smooth.",
    "Here's the current step.",
]
RESULTS_PREV = [
    "Here's what I found: 1. Classic Vegan Lasagna 2. Easy Vegan Lasagna 3. Lasagna Soup",
    "I found a few options for that.",
]
SEARCH_PREV = ["What would you like to get done?", "Hi! Tell me what to make or fix."]

SEARCH_QUERIES = [
    "vegan lasagna", "gluten free chocolate cake", "chicken curry for four",
    "fix a squeaky door", "patch drywall holes", "garden compost", "banana bread",
    "bleed a radiator", "sharpen kitchen knives", "homemade pizza dough",
    "unclog a drain", "paint a fence", "slow cooker chili", "sourdough starter",
    "hang a picture frame", "clean an oven", "miso soup", "replace a faucet washer",
]

QUESTIONS = [
    "how long does it bake", "how do I julienne carrots?", "can I use margarine instead of butter?",
    "why does the sauce split", "which screwdriver do I need", "when is it done",
    "what temperature should the oven be", "can I freeze the leftovers",
    "how much salt goes in?", "why is my patch still visible",
]

TIMERS = ["set a timer for 10 minutes", "set a timer for 1 hour", "set timer",
          "start a timer for 45 seconds", "timer for 5 minutes", "set a timer for 2 hours"]

REQUIREMENTS = ["what do i need", "show requirements", "ingredients",
                "show me the ingredients", "what tools do i need", "materials"]

# Phrasings outside the cascade: gold is the annotator's intent, and the
# pattern backend is expected to miss most of them.
HARD_CASES = [
    ("go back", actions.PREVIOUS, "execution"),
    ("skip this step", actions.NEXT, "execution"),
    ("one more time", actions.REPEAT, "execution"),
    ("say that again", actions.REPEAT, "execution"),
    ("keep going", actions.NEXT, "execution"),
    ("back to the beginning", actions.RESTART, "execution"),
    ("i'm done", actions.STOP, "execution"),
    ("that's enough", actions.STOP, "execution"),
    ("never mind", actions.CANCEL, "results"),
    ("forget it", actions.CANCEL, "results"),
    ("tell me how long this keeps", actions.ASK_QUESTION, "execution"),
    ("i wonder if oat milk works here", actions.ASK_QUESTION, "execution"),
    ("the last one", actions.select(3), "results"),
    ("show me other ideas", actions.SHOW_MORE_RESULTS, "results"),
    ("anything else", actions.SHOW_MORE_RESULTS, "results"),
    ("let's do it", actions.START_TASK, "preview"),
    ("sounds good, begin", actions.START_TASK, "preview"),
    ("sure", actions.YES, "preview"),
    ("nah", actions.NO, "preview"),
    ("expand on that", actions.SHOW_MORE_DETAILS, "execution"),
]

SCOPES = {
    "search": dict(phase=SessionPhase.SEARCH, has_task=False, visible=0),
    "results": dict(phase=SessionPhase.RESULTS, has_task=False, visible=3),
    "preview": dict(phase=SessionPhase.TASK_PREVIEW, has_task=True, visible=3),
    "execution": dict(phase=SessionPhase.EXECUTION, has_task=True, visible=0),
}


def make_ctx(rng, utterance, scope_name):
    params = SCOPES[scope_name]
    previous = {
        "search": SEARCH_PREV,
        "results": RESULTS_PREV,
        "preview": RESULTS_PREV,
        "execution": EXEC_PREV,
    }[scope_name]
    summary = ""
    if params["has_task"]:
        summary = f"Easy Vegan Lasagna, step {rng.randint(1, 5)} of 5"
    return DecisionContext(
        utterance=utterance,
        previous_system_response=rng.choice(previous),
        scope=scope_for(params["phase"], params["has_task"], params["visible"]),
        task_state_summary=summary,
    )


def build_records(rng):
    records = []

    def add(utterance, gold, scope_name):
        records.append(
            DecisionRecord(context=make_ctx(rng, utterance, scope_name), gold_action=gold)
        )

    nav = {
        "next": actions.NEXT, "previous": actions.PREVIOUS, "repeat": actions.REPEAT,
        "restart": actions.RESTART, "pause": actions.PAUSE,
    }
    for word, gold in nav.items():
        for variant in (word, word.capitalize(), f"{word}.", f"{word}!"):
            add(variant, gold, "execution")
    for variant in ("stop", "Stop", "stop."):
        add(variant, actions.STOP, "execution")
    for variant in ("cancel", "Cancel."):
        add(variant, actions.CANCEL, "results")
    for variant in ("yes", "Yes", "yes!"):
        add(variant, actions.YES, "preview")
    for variant in ("no", "No."):
        add(variant, actions.NO, "preview")
    add("start", actions.START_TASK, "preview")

    for i in range(12):
        n = rng.randint(1, 3)
        form = rng.choice(
            ["{n}", "number {n}", "option {n}", "select {n}", "the {word} one", "{word}"]
        )
        word = ["first", "second", "third"][n - 1]
        add(form.format(n=n, word=word), actions.select(n), "results")

    for i in range(8):
        n = rng.randint(1, 5)
        form = rng.choice(["step {n}", "go to step {n}", "jump to step {n}"])
        add(form.format(n=n), actions.step_select(n), "execution")

    for phrase in TIMERS:
        spec = None
        if "for" in phrase:
            spec = phrase.split("for", 1)[1].strip()
        add(phrase, actions.set_timer(spec), "execution")

    for phrase in REQUIREMENTS:
        add(phrase, actions.SHOW_REQUIREMENTS, "execution")

    for q in QUESTIONS:
        add(q, actions.ASK_QUESTION, rng.choice(["execution", "preview"]))

    for phrase in ("more results", "more options", "show me more results"):
        add(phrase, actions.SHOW_MORE_RESULTS, "results")
    for phrase in ("more details", "tell me more", "details"):
        add(phrase, actions.SHOW_MORE_DETAILS, "execution")

    for q in SEARCH_QUERIES:
        add(q, actions.search(q), rng.choice(["search", "results"]))

    for utterance, gold, scope_name in HARD_CASES:
        add(utterance, gold, scope_name)

    # pad with generated searches to land exactly on 200
    fillers = ["roast vegetables", "fold a fitted sheet", "descale a kettle",
               "make cold brew coffee", "season a cast iron pan", "wire a lamp",
               "grow basil indoors", "laminate dough", "tile a splashback",
               "make fresh pasta", "build a raised bed", "fix a running toilet",
               "whip aquafaba", "strip old paint", "brine a chicken",
               "organise a pantry", "polish wooden floors", "repot a monstera",
               "caulk a bathtub", "knead bread by hand", "defrost a freezer",
               "make vegetable stock", "clean paint brushes", "install a shelf",
               "press tofu", "balance a ceiling fan", "sew on a button",
               "compost coffee grounds", "dice an onion", "plan a weekly menu"]
    i = 0
    while len(records) < 200:
        q = fillers[i % len(fillers)]
        add(q, actions.search(q), "search")
        i += 1
    return records[:200]


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else OUT
    rng = random.Random(20240517)
    records = build_records(rng)
    assert len(records) == 200
    save_dataset(records, out)
    report = evaluate(records, decide_pattern)
    print(f"wrote {report.total} records to {out}")
    print(f"pattern backend exact-match accuracy: {report.accuracy}")
    print(f"exact: {report.exact_match} / {report.total}")
    for name, stats in sorted(report.per_category.items()):
        print(f"  {name}: {stats.exact_match}/{stats.total}")


if __name__ == "__main__":
    main()

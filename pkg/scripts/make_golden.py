#!/usr/bin/env python3
"""Regenerate the frozen golden conversation transcript.

Replays the scripted 12-turn session against the fixture corpus and the
default mock gateway, then freezes every turn (action code, policy, response
text, screen payload, gateway call count) into tests/data/golden_transcript.json.
The acceptance suite replays the same script and requires byte-identical output.
"""

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from stepchat.corpus import load_corpus
from stepchat.decision import decide_pattern
from stepchat.gateway import Gateway, default_mock
from stepchat.ingestion import load_documents, run_pipeline, spoken_augmenter
from stepchat.orchestrator import Session, TurnDeps, handle_turn, payload_to_dict

GOLDEN_UTTERANCES = [
    "hello",
    "vegan lasagna",
    "select 2",
    "show requirements",
    "start",
    "next",
    "next",
    "next",
    "can I use margarine instead of butter?",
    "I don't have butter",
    "next",
    "next",
]

OUT = ROOT / "tests" / "data" / "golden_transcript.json"


def replay(corpus) -> list[dict]:
    deps = TurnDeps(
        decide=decide_pattern, corpus=corpus, gateway=Gateway(backend=default_mock())
    )
    session = Session(session_id="golden")
    transcript = []
    for utterance in GOLDEN_UTTERANCES:
        session, payload = handle_turn(session, utterance, deps)
        turn = session.history[-1]
        transcript.append(
            {
                "utterance": utterance,
                "action_code": turn.action_code,
                "policy": turn.policy,
                "response_text": turn.system_response,
                "gateway_calls": turn.gateway_calls,
                "screen": payload_to_dict(payload),
            }
        )
    return transcript


def main():
    with tempfile.TemporaryDirectory() as tmp:
        report = run_pipeline(
            load_documents(ROOT / "tests" / "fixtures" / "pages"),
            [spoken_augmenter()],
            tmp,
        )
        assert report.written == 8, report.counts()
        corpus = load_corpus(tmp)
    transcript = replay(corpus)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps(transcript, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(transcript)} turns to {OUT}")
    for i, t in enumerate(transcript, 1):
        print(f"{i:2d}. [{t['policy']:12s}] {t['utterance']!r}")
        print(f"     -> {t['response_text'][:100]!r}")


if __name__ == "__main__":
    main()

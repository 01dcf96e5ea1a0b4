"""Decision parsing: map (utterance, system state) to one action code.

Two interchangeable backends sit behind the same contract: a deterministic
rule cascade (default, dependency-free, instant) and a remote generative
backend reached through the model gateway. Both only ever emit codes inside
the caller-supplied scope; everything else lands on the unknown sink so no
hallucinated action can execute.

Also holds the evaluation side: a JSONL dataset format of annotated
(context, gold action) pairs and an exact-match accuracy report.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Union

from . import actions
from .actions import ActionCode, ActionScope, SessionPhase, parse_action, render_action
from .gateway import Gateway, GatewayError, GenRequest


@dataclass(frozen=True)
class DecisionContext:
    utterance: str
    previous_system_response: str
    scope: ActionScope
    task_state_summary: str = ""

    def __post_init__(self) -> None:
        if not self.utterance.strip():
            raise ValueError("utterance must be non-empty after trimming")


@dataclass(frozen=True)
class DecisionRecord:
    context: DecisionContext
    gold_action: ActionCode

    def __post_init__(self) -> None:
        if self.gold_action.is_unknown:
            raise ValueError("gold action must be a concrete code")
        if self.gold_action not in self.context.scope:
            raise ValueError(
                f"gold action {render_action(self.gold_action)!r} not in scope"
            )


DecisionBackend = Callable[[DecisionContext], ActionCode]

_ORDINALS = {
    "first": 1,
    "second": 2,
    "third": 3,
    "fourth": 4,
    "fifth": 5,
    "sixth": 6,
    "seventh": 7,
    "eighth": 8,
    "ninth": 9,
    "tenth": 10,
}

_NAV_KEYWORDS = {
    "next": actions.NEXT,
    "previous": actions.PREVIOUS,
    "repeat": actions.REPEAT,
    "stop": actions.STOP,
    "pause": actions.PAUSE,
    "cancel": actions.CANCEL,
    "restart": actions.RESTART,
    "yes": actions.YES,
    "no": actions.NO,
    "start": actions.START_TASK,
}

_ORDINAL_RE = re.compile(
    r"^(?:(?:select|choose|pick|take)\s+)?(?:the\s+)?"
    r"(first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth)"
    r"(?:\s+one)?$"
)
_NUMBER_RE = re.compile(
    r"^(?:(?:select|choose|pick|take)\s+)?(?:(?:number|option|no\.?|#)\s*)?(\d+)$"
)
_STEP_RE = re.compile(r"^(?:(?:go|jump|skip)\s+to\s+)?step\s+(\d+)$")
_TIMER_RES = (
    re.compile(
        r"^(?:(?:please|can\s+you|could\s+you)\s+)?(?:set|start)\s+"
        r"(?:a\s+|the\s+)?timer(?:\s+for\s+(.+))?$"
    ),
    re.compile(r"^timer\s+for\s+(.+)$"),
)
_REQUIREMENT_RES = (
    re.compile(r"^what\s+do\s+i\s+need\b"),
    re.compile(
        r"^(?:(?:show|list|see)\s+(?:me\s+)?)?(?:the\s+)?"
        r"(?:ingredients|requirements|supplies|materials)(?:\s+(?:list|please))?$"
    ),
    re.compile(r"^what\s+(?:ingredients|supplies|materials|tools)\s+do\s+i\s+need\b"),
)
_QUESTION_LEADS = {"what", "how", "why", "can", "which", "when"}
_MORE_RESULTS_RE = re.compile(r"^(?:show\s+(?:me\s+)?)?more\s+(?:results|options)$")
_MORE_DETAILS_RES = (
    re.compile(r"^(?:show\s+(?:me\s+)?)?more\s+details?$"),
    re.compile(r"^tell\s+me\s+more$"),
    re.compile(r"^details$"),
)


def _candidates(trimmed: str) -> Iterator[ActionCode]:
    """Yield rule-cascade candidates in precedence order; scope filters later."""
    lowered = trimmed.lower()
    bare = lowered.rstrip(".!").strip()

    if bare in _NAV_KEYWORDS:
        yield _NAV_KEYWORDS[bare]

    m = _ORDINAL_RE.match(bare)
    if m:
        yield actions.select(_ORDINALS[m.group(1)])
    else:
        m = _NUMBER_RE.match(bare)
        if m and int(m.group(1)) >= 1:
            yield actions.select(int(m.group(1)))

    m = _STEP_RE.match(bare)
    if m and int(m.group(1)) >= 1:
        yield actions.step_select(int(m.group(1)))

    for timer_re in _TIMER_RES:
        m = timer_re.match(bare)
        if m:
            yield actions.set_timer(m.group(1))
            break

    if any(r.match(bare) for r in _REQUIREMENT_RES):
        yield actions.SHOW_REQUIREMENTS

    head = re.match(r"[a-z]+", bare)  # "what's next" leads with "what"
    if (head and head.group(0) in _QUESTION_LEADS) or lowered.endswith("?"):
        yield actions.ASK_QUESTION

    if _MORE_RESULTS_RE.match(bare):
        yield actions.SHOW_MORE_RESULTS

    if any(r.match(bare) for r in _MORE_DETAILS_RES):
        yield actions.SHOW_MORE_DETAILS

    yield actions.search(trimmed)


def decide_pattern(ctx: DecisionContext) -> ActionCode:
    """Rule-cascade backend: first in-scope candidate wins, else unknown."""
    trimmed = ctx.utterance.strip()
    for candidate in _candidates(trimmed):
        if candidate in ctx.scope:
            return candidate
    return actions.unknown(trimmed)


def build_decision_slots(ctx: DecisionContext) -> dict:
    return {
        "actions": "\n".join(ctx.scope.signatures()),
        "state": ctx.task_state_summary or "no active task",
        "previous_response": ctx.previous_system_response or "(conversation start)",
        "utterance": ctx.utterance,
    }


def decide_remote(
    ctx: DecisionContext,
    gw: Gateway,
    on_error: Optional[Callable[[str], None]] = None,
) -> ActionCode:
    """Generative backend: prompt with the scope's templates, then validate.

    The model's first output line is parsed; anything out of grammar or out
    of scope degrades to unknown, never to an executed action. Gateway
    failures degrade the same way (the turn must not fail), reporting the
    error through ``on_error`` for the turn log.
    """
    request = GenRequest(template_id="decide", slots=build_decision_slots(ctx))
    try:
        response = gw.generate(request)
    except GatewayError as e:
        if on_error is not None:
            on_error(f"{type(e).__name__}: {e}")
        return actions.unknown(ctx.utterance)
    lines = [line for line in response.text.strip().splitlines() if line.strip()]
    first = lines[0].strip() if lines else response.text.strip()
    code = parse_action(first)
    if code.is_unknown or code not in ctx.scope:
        return actions.unknown(first)
    return code


# ---------------------------------------------------------------------------
# Dataset format and evaluation


@dataclass(frozen=True)
class DatasetProblem:
    line_no: int
    message: str


def record_to_dict(record: DecisionRecord) -> dict:
    ctx = record.context
    return {
        "utterance": ctx.utterance,
        "previous_system_response": ctx.previous_system_response,
        "scope_phase": ctx.scope.phase.value,
        "has_active_task": ctx.scope.has_active_task,
        "visible_results": ctx.scope.visible_results,
        "task_state_summary": ctx.task_state_summary,
        "gold_action": render_action(record.gold_action),
    }


def record_from_dict(obj: dict) -> DecisionRecord:
    phase = SessionPhase(obj["scope_phase"])
    scope = actions.scope_for(
        phase, bool(obj["has_active_task"]), int(obj["visible_results"])
    )
    gold = parse_action(obj["gold_action"])
    context = DecisionContext(
        utterance=obj["utterance"],
        previous_system_response=obj.get("previous_system_response", ""),
        scope=scope,
        task_state_summary=obj.get("task_state_summary", ""),
    )
    return DecisionRecord(context=context, gold_action=gold)


def load_dataset(path) -> Iterator[Union[DecisionRecord, DatasetProblem]]:
    """Stream records from JSONL; malformed lines yield problems, not errors."""
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield record_from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                yield DatasetProblem(line_no, f"{type(e).__name__}: {e}")


def save_dataset(records: Iterable[DecisionRecord], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record_to_dict(record), ensure_ascii=False))
            f.write("\n")
            n += 1
    return n


@dataclass
class CategoryStats:
    total: int = 0
    exact_match: int = 0

    @property
    def accuracy(self) -> Optional[float]:
        return self.exact_match / self.total if self.total else None


@dataclass
class DecisionReport:
    total: int = 0
    exact_match: int = 0
    skipped: int = 0
    per_category: dict[str, CategoryStats] = field(default_factory=dict)
    confusion: list[list] = field(default_factory=list)  # [gold, predicted, count]
    diagnostics: list[str] = field(default_factory=list)

    @property
    def accuracy(self) -> Optional[float]:
        return self.exact_match / self.total if self.total else None

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "exact_match": self.exact_match,
            "accuracy": self.accuracy,
            "skipped": self.skipped,
            "per_category": {
                name: {
                    "total": stats.total,
                    "exact_match": stats.exact_match,
                    "accuracy": stats.accuracy,
                }
                for name, stats in self.per_category.items()
            },
            "confusion": [list(row) for row in self.confusion],
            "diagnostics": list(self.diagnostics),
        }


def evaluate(
    records: Iterable[Union[DecisionRecord, DatasetProblem]],
    backend: DecisionBackend,
) -> DecisionReport:
    """Exact-match accuracy of a backend against gold actions."""
    report = DecisionReport()
    pair_counts: dict[tuple[str, str], int] = {}
    for item in records:
        if isinstance(item, DatasetProblem):
            report.skipped += 1
            report.diagnostics.append(f"line {item.line_no}: {item.message}")
            continue
        gold_str = render_action(item.gold_action)
        predicted = backend(item.context)
        predicted_str = "unknown" if predicted.is_unknown else render_action(predicted)
        report.total += 1
        category = item.gold_action.category.value
        stats = report.per_category.setdefault(category, CategoryStats())
        stats.total += 1
        if predicted == item.gold_action:
            report.exact_match += 1
            stats.exact_match += 1
        pair = (gold_str, predicted_str)
        pair_counts[pair] = pair_counts.get(pair, 0) + 1
    report.confusion = [[g, p, n] for (g, p), n in pair_counts.items()]
    return report

"""Turn execution: decision -> policy dispatch -> response -> state update.

One call to handle_turn runs a complete conversation turn: the decision
backend maps the utterance to an action code, exactly one policy executes it
against the session and its active task, the response is safety-checked, and
the turn is appended to history and persisted. Unknown codes route to the
fallback policy and never mutate conversation state.
"""

from __future__ import annotations

import copy
import logging
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from . import actions
from .actions import ActionCode, SessionPhase, render_action, scope_for
from .corpus import TaskCorpus
from .decision import DecisionContext
from .gateway import Gateway, GatewayError, GenRequest
from .retrieval import Document, build_index, is_vague, search as index_search
from .taskgraph import (
    MediaRef,
    Requirement,
    TaskCursor,
    TaskGraph,
    graph_from_dict,
    graph_to_dict,
    substitute_requirement,
)

log = logging.getLogger("stepchat.orchestrator")

PAGE_SIZE = 3
STORED_RESULTS = 12
QA_CHUNKS = 2
DIALOGUE_WINDOW = 4
MAX_RESPONSE_CHARS = 1200
MAX_OPTIONS = 6

DENYLIST_PATH = Path(__file__).parent / "data" / "denylist.txt"

REFUSAL_TEXT = (
    "I can't help with that. Let's keep going with your task — say repeat to "
    "hear the current step again."
)

CAPABILITIES = (
    "I can search for cooking and DIY tasks, walk you through the steps, show "
    "what you need, answer questions along the way, set timers, and suggest "
    "substitutions for things you don't have."
)


# ---------------------------------------------------------------------------
# Conversation state


@dataclass
class Timer:
    label: str
    duration_seconds: Optional[int]
    created_at: int  # monotonic ms


@dataclass
class ScreenPayload:
    """Structured response fragment clients render alongside the text."""

    body_text: str
    headline: Optional[str] = None
    images: list[MediaRef] = field(default_factory=list)
    options: list[str] = field(default_factory=list)
    step_position: Optional[tuple[int, int]] = None  # (0-based index, total)
    requirements_view: Optional[list[Requirement]] = None

    def __post_init__(self) -> None:
        if not self.body_text:
            raise ValueError("body_text must be non-empty")
        if len(self.options) > MAX_OPTIONS:
            self.options = self.options[:MAX_OPTIONS]


@dataclass
class Turn:
    user_utterance: str
    action_code: str
    policy: str
    system_response: str
    screen: ScreenPayload
    timestamp: int  # monotonic ms
    gateway_calls: int = 0
    annotations: list[str] = field(default_factory=list)


@dataclass
class Session:
    session_id: str
    phase: SessionPhase = SessionPhase.GREETING
    cursor: Optional[TaskCursor] = None
    active_task: Optional[TaskGraph] = None
    results: list[str] = field(default_factory=list)
    results_offset: int = 0
    history: list[Turn] = field(default_factory=list)
    timers: list[Timer] = field(default_factory=list)

    def visible_results(self) -> int:
        if self.phase not in (SessionPhase.RESULTS, SessionPhase.TASK_PREVIEW):
            return 0
        return max(0, min(PAGE_SIZE, len(self.results) - self.results_offset))

    def scope(self):
        return scope_for(self.phase, self.active_task is not None, self.visible_results())

    def state_summary(self) -> str:
        if self.active_task is None or self.cursor is None:
            return ""
        return (
            f"{self.active_task.title}, step {self.cursor.index + 1} "
            f"of {len(self.active_task.steps)}"
        )


@dataclass
class TurnDeps:
    """Everything a turn needs, injected so sessions share safe handles."""

    decide: Callable[[DecisionContext], ActionCode]
    corpus: TaskCorpus
    gateway: Gateway
    store: Optional[object] = None  # SessionStore-shaped; None disables persistence
    denylist: list[str] = field(default_factory=lambda: load_denylist())
    # remote decision backends report degradations here for the turn log
    decision_annotations: Optional[list[str]] = None


def load_denylist(path=DENYLIST_PATH) -> list[str]:
    terms = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                terms.append(line.lower())
    return terms


# ---------------------------------------------------------------------------
# Safety post-processing


_SENTENCE_END_RE = re.compile(r"[.!?]")


def postprocess_safety(text: str, denylist: Optional[list[str]] = None) -> str:
    """Clamp, denylist-scan, then normalise whitespace. Deterministic."""
    if len(text) > MAX_RESPONSE_CHARS:
        cut = text[:MAX_RESPONSE_CHARS]
        ends = [
            m.end()
            for m in _SENTENCE_END_RE.finditer(cut)
            if m.end() == len(cut) or cut[m.end()].isspace()
        ]
        text = cut[: ends[-1]] if ends else cut
    if denylist:
        lowered = text.lower()
        if any(term in lowered for term in denylist):
            return REFUSAL_TEXT
    lines = [re.sub(r"[ \t]+", " ", line).strip() for line in text.split("\n")]
    text = "\n".join(lines)
    text = re.sub(r"\n{3,}", "\n\n", text).strip()
    return text


# ---------------------------------------------------------------------------
# Gateway helper: count calls per turn, never leak raw errors


class _TurnGateway:
    def __init__(self, gateway: Gateway):
        self._gateway = gateway
        self.calls = 0

    def generate(self, request: GenRequest):
        self.calls += 1
        return self._gateway.generate(request)


def _dialogue_window(session: Session) -> str:
    lines = []
    for turn in session.history[-DIALOGUE_WINDOW:]:
        lines.append(f"User: {turn.user_utterance}")
        lines.append(f"Assistant: {turn.system_response}")
    return "\n".join(lines) if lines else "(conversation start)"


# ---------------------------------------------------------------------------
# Substitution phrasing (checked before the decision backend; the action
# grammar has no substitute code, so adaptation rides on the utterance)

_SUBSTITUTION_RES = (
    re.compile(r"^i\s+do(?:n'?t|\s+not)\s+have\s+(?:any\s+|a\s+|an\s+)?(?P<target>.+?)[.!?]*$", re.IGNORECASE),
    re.compile(r"^i'?m\s+out\s+of\s+(?P<target>.+?)[.!?]*$", re.IGNORECASE),
    re.compile(
        r"^(?:replace|substitute)\s+(?:the\s+)?(?P<target>.+?)"
        r"(?:\s+with\s+(?P<replacement>.+?))?[.!?]*$",
        re.IGNORECASE,
    ),
)


def match_substitution(utterance: str) -> Optional[tuple[str, Optional[str]]]:
    for pattern in _SUBSTITUTION_RES:
        m = pattern.match(utterance.strip())
        if m:
            replacement = m.groupdict().get("replacement")
            return m.group("target").strip(), (replacement.strip() if replacement else None)
    return None


# ---------------------------------------------------------------------------
# Payload builders


def _suggestions(session: Session) -> list[str]:
    if session.active_task is not None and session.phase is SessionPhase.EXECUTION:
        return ["next", "repeat", "show requirements"]
    if session.phase is SessionPhase.TASK_PREVIEW:
        return ["start", "show requirements", "no"]
    if session.visible_results() > 0:
        options = [str(i + 1) for i in range(session.visible_results())]
        if session.results_offset + PAGE_SIZE < len(session.results):
            options.append("more results")
        return options
    return ["vegan lasagna", "fix a squeaky door"]


def _step_payload(session: Session, notice: str = "") -> ScreenPayload:
    task = session.active_task
    cursor = session.cursor
    assert task is not None and cursor is not None
    step = task.steps[cursor.index]
    body = f"{notice} {step.text}".strip()
    options = ["next", "previous", "repeat"]
    if task.requirements:
        options.append("show requirements")
    return ScreenPayload(
        body_text=body,
        headline=task.title,
        images=list(step.media),
        options=options,
        step_position=(cursor.index, len(task.steps)),
    )


def _results_payload(session: Session, corpus: TaskCorpus, lead: str) -> ScreenPayload:
    ids = session.results[session.results_offset : session.results_offset + PAGE_SIZE]
    lines = []
    for i, task_id in enumerate(ids):
        task = corpus.get(task_id)
        title = task.title if task else task_id
        lines.append(f"{i + 1}. {title}")
    body = lead + "\n" + "\n".join(lines)
    options = [str(i + 1) for i in range(len(ids))]
    if session.results_offset + PAGE_SIZE < len(session.results):
        options.append("more results")
    return ScreenPayload(body_text=body, headline="Results", options=options)


def _preview_payload(session: Session) -> ScreenPayload:
    task = session.active_task
    assert task is not None
    bits = [f"{len(task.steps)} steps"]
    if task.requirements:
        bits.append(f"{len(task.requirements)} things needed")
    if task.rating is not None:
        bits.append(f"rated {task.rating:.1f}/5")
    body = f"How about: {task.title} ({', '.join(bits)}). Say start when you're ready."
    return ScreenPayload(
        body_text=body,
        headline=task.title,
        images=[task.hero_image] if task.hero_image else [],
        options=["start", "show requirements", "no"],
    )


# ---------------------------------------------------------------------------
# Policies


def policy_navigate(
    session: Session, code: ActionCode, deps: TurnDeps
) -> ScreenPayload:
    name = code.name
    task = session.active_task

    if name == "select":
        visible = session.visible_results()
        if code.index > visible:
            return ScreenPayload(
                body_text=(
                    f"There are only {visible} options showing — pick a number "
                    f"between 1 and {visible}."
                ),
                options=[str(i + 1) for i in range(visible)],
            )
        task_id = session.results[session.results_offset + code.index - 1]
        graph = deps.corpus.get(task_id)
        if graph is None:
            return ScreenPayload(body_text="That one isn't available any more.")
        # snapshot: live adaptation must never leak into the shared corpus
        session.active_task = copy.deepcopy(graph)
        session.cursor = TaskCursor(task_id=graph.id, index=0)
        session.phase = SessionPhase.TASK_PREVIEW
        return _preview_payload(session)

    if name == "show_more_results":
        if session.results_offset + PAGE_SIZE < len(session.results):
            session.results_offset += PAGE_SIZE
            return _results_payload(session, deps.corpus, "Here are more results:")
        return _results_payload(
            session, deps.corpus, "That's everything I found. Still showing:"
        )

    if name == "start_task":
        session.phase = SessionPhase.EXECUTION
        session.cursor = replace(session.cursor, index=0)
        return _step_payload(session, notice="Let's get started. Step 1:")

    if name == "yes":
        if session.phase is SessionPhase.TASK_PREVIEW:
            return policy_navigate(session, actions.START_TASK, deps)
        return ScreenPayload(body_text="Great!", options=_suggestions(session))

    if name == "no":
        if session.phase is SessionPhase.TASK_PREVIEW:
            session.active_task = None
            session.cursor = None
            session.phase = SessionPhase.RESULTS
            return _results_payload(
                session, deps.corpus, "No problem — here are the other options:"
            )
        return ScreenPayload(body_text="Okay.", options=_suggestions(session))

    if name == "stop":
        session.active_task = None
        session.cursor = None
        session.phase = SessionPhase.FAREWELL
        return ScreenPayload(
            body_text="Okay, stopping here. Thanks for cooking and building with me — goodbye!"
        )

    if name == "cancel":
        session.active_task = None
        session.cursor = None
        session.results = []
        session.results_offset = 0
        session.phase = SessionPhase.SEARCH
        return ScreenPayload(
            body_text="Cancelled. What would you like to do instead?",
            options=_suggestions(session),
        )

    if name == "pause":
        return ScreenPayload(
            body_text="Paused — say next whenever you're ready.",
            options=["next", "repeat"] if task else [],
        )

    if name == "repeat":
        if task is None or session.cursor is None:
            return ScreenPayload(
                body_text="Nothing to repeat yet — pick a task first.",
                options=_suggestions(session),
            )
        return _step_payload(session, notice=f"Step {session.cursor.index + 1} again:")

    # next / previous / restart / step_select need the active task
    assert task is not None and session.cursor is not None
    index = session.cursor.index
    total = len(task.steps)

    if name == "restart":
        session.cursor = replace(session.cursor, index=0)
        return _step_payload(session, notice="Starting over. Step 1:")

    if name == "step_select":
        if code.index > total:
            return ScreenPayload(
                body_text=f"This task has {total} steps — pick one between 1 and {total}.",
            )
        session.cursor = replace(session.cursor, index=code.index - 1)
        return _step_payload(session, notice=f"Step {code.index}:")

    if name == "previous":
        if index == 0:
            return _step_payload(
                session, notice="You're already on the first step. Step 1:"
            )
        session.cursor = replace(session.cursor, index=index - 1)
        return _step_payload(session, notice=f"Back to step {index}:")

    if name == "next":
        if index + 1 >= total:
            title = task.title
            session.active_task = None
            session.cursor = None
            session.results = []
            session.results_offset = 0
            session.phase = SessionPhase.FAREWELL
            return ScreenPayload(
                body_text=(
                    f"That was the last step of {title} — you're all done. Nice work!"
                ),
            )
        session.cursor = replace(session.cursor, index=index + 1)
        return _step_payload(session, notice=f"Step {index + 2}:")

    raise AssertionError(f"unhandled navigation code {name}")


def policy_search(session: Session, code: ActionCode, deps: TurnDeps) -> ScreenPayload:
    query = code.query or ""
    if is_vague(query, deps.corpus.index):
        options = [t.theme_label for t in deps.corpus.trajectories[:3]]
        if not options:
            options = ["vegan lasagna", "fix a squeaky door"]
        return ScreenPayload(
            body_text=(
                "What would you like to get done? Give me a dish or a project — "
                'for example "vegan lasagna" or "fix a squeaky door".'
            ),
            options=options,
        )
    hits = deps.corpus.search_tasks(query, STORED_RESULTS)
    if not hits:
        return ScreenPayload(
            body_text=(
                f'I couldn\'t find anything for "{query}". '
                "Try different words, or ask for a recipe or a repair."
            ),
            options=_suggestions(session),
        )
    session.results = hits
    session.results_offset = 0
    session.phase = SessionPhase.RESULTS
    return _results_payload(session, deps.corpus, f'Here\'s what I found for "{query}":')


def policy_question(
    session: Session, code: ActionCode, utterance: str, deps: TurnDeps, gw: _TurnGateway
) -> ScreenPayload:
    context_parts = []
    if session.active_task is not None and session.cursor is not None:
        step = session.active_task.steps[session.cursor.index]
        context_parts.append(f"Current step: {step.text}")
        chunks = _task_knowledge(session.active_task, utterance, QA_CHUNKS)
    else:
        chunks = deps.corpus.search_knowledge(utterance, QA_CHUNKS)
    context_parts.extend(chunk.text for chunk in chunks)
    request = GenRequest(
        template_id="qa",
        slots={
            "question": utterance,
            "context": "\n".join(context_parts) or "(no task context)",
            "dialogue": _dialogue_window(session),
        },
    )
    try:
        answer = gw.generate(request).text.strip()
    except GatewayError as e:
        log.warning("qa generation failed: %s", e)
        return ScreenPayload(
            body_text=f"Sorry, I can't answer that right now. {CAPABILITIES}",
            options=_suggestions(session),
        )
    options = ["next", "repeat"] if session.active_task else _suggestions(session)
    return ScreenPayload(body_text=answer or "I don't have an answer for that.", options=options)


def _task_knowledge(task: TaskGraph, query: str, k: int):
    if not task.knowledge:
        return []
    docs = [
        Document(doc_id=str(i), title="", body=chunk.text)
        for i, chunk in enumerate(task.knowledge)
    ]
    hits = index_search(build_index(docs), query, k)
    return [task.knowledge[int(doc_id)] for doc_id, _ in hits]


def policy_fallback(
    session: Session, code: ActionCode, deps: TurnDeps, gw: _TurnGateway
) -> ScreenPayload:
    escalate = bool(session.history) and session.history[-1].policy == "fallback"
    request = GenRequest(
        template_id="fallback",
        slots={
            "utterance": code.raw or "",
            "capabilities": CAPABILITIES,
            "dialogue": _dialogue_window(session),
        },
    )
    try:
        body = gw.generate(request).text.strip()
    except GatewayError as e:
        log.warning("fallback generation failed: %s", e)
        body = f"I can't do that one. {CAPABILITIES}"
    suggestions = _suggestions(session)[:3]
    if escalate:
        menu = "\n".join(f"- {s}" for s in suggestions)
        body = f"{body}\n\nHere's what you can say right now:\n{menu}"
    return ScreenPayload(body_text=body, options=suggestions)


def policy_adapt(
    session: Session, utterance: str, deps: TurnDeps, gw: _TurnGateway
) -> ScreenPayload:
    task = session.active_task
    assert task is not None
    matched = match_substitution(utterance)
    assert matched is not None
    target, user_replacement = matched

    wanted = target.lower().strip()
    requirement = next(
        (r for r in task.requirements if r.name.lower() == wanted),
        None,
    ) or next((r for r in task.requirements if wanted in r.name.lower()), None)
    if requirement is None:
        names = ", ".join(r.name for r in task.requirements) or "nothing yet"
        return ScreenPayload(
            body_text=(
                f'I don\'t see "{target}" on this task\'s list (it needs: {names}). '
                "What are you missing?"
            ),
            requirements_view=list(task.requirements),
        )

    if user_replacement:
        replacement_name = user_replacement
    else:
        try:
            response = gw.generate(
                GenRequest(
                    template_id="substitute",
                    slots={"requirement": requirement.name.lower()},
                )
            )
            replacement_name = response.text.strip().splitlines()[0].strip(" .\"'")
        except GatewayError as e:
            log.warning("substitute generation failed: %s", e)
            return ScreenPayload(
                body_text=(
                    f"I can't look up a substitute for {requirement.name} right now — "
                    "you can keep going without it, or try again in a moment."
                ),
                options=["next", "repeat"],
            )
        if not replacement_name:
            return ScreenPayload(
                body_text=f"I don't have a good substitute for {requirement.name}, sorry.",
                options=["next", "repeat"],
            )

    new_requirement = Requirement(
        name=replacement_name,
        quantity=requirement.quantity,
        optional_flag=requirement.optional_flag,
    )
    session.active_task = substitute_requirement(task, requirement.name, new_requirement)
    quantity = f" ({requirement.quantity})" if requirement.quantity else ""
    return ScreenPayload(
        body_text=(
            f"No {requirement.name}? Use {replacement_name}{quantity} instead. "
            "I've updated the list."
        ),
        requirements_view=list(session.active_task.requirements),
        options=["next", "repeat", "show requirements"],
    )


def policy_requirements(session: Session) -> ScreenPayload:
    task = session.active_task
    assert task is not None
    if not task.requirements:
        return ScreenPayload(
            body_text=f"{task.title} doesn't list anything special — you're good to go.",
            options=["start"] if session.phase is SessionPhase.TASK_PREVIEW else ["next"],
        )
    spoken = ", ".join(
        r.name + (f" ({r.quantity})" if r.quantity else "") for r in task.requirements
    )
    options = (
        ["start", "no"]
        if session.phase is SessionPhase.TASK_PREVIEW
        else ["next", "repeat"]
    )
    return ScreenPayload(
        body_text=f"For {task.title} you'll need: {spoken}.",
        headline=task.title,
        requirements_view=list(task.requirements),
        options=options,
    )


def policy_details(session: Session) -> ScreenPayload:
    task = session.active_task
    cursor = session.cursor
    assert task is not None and cursor is not None
    step = task.steps[cursor.index]
    if step.details:
        body = step.details
    elif step.spoken_text:
        body = step.spoken_text
    else:
        body = f"That's all I have for this step: {step.text}"
    return ScreenPayload(
        body_text=body,
        headline=task.title,
        options=["next", "previous", "repeat"],
        step_position=(cursor.index, len(task.steps)),
    )


def policy_timer(session: Session, code: ActionCode, now_ms: int) -> ScreenPayload:
    spec = code.timer_spec
    if spec is None:
        return ScreenPayload(
            body_text='For how long? Say something like "set a timer for 10 minutes".',
        )
    seconds = parse_duration(spec)
    if seconds is None:
        return ScreenPayload(
            body_text=(
                f'I didn\'t catch a duration in "{spec}" — try "set a timer for 10 minutes".'
            ),
        )
    session.timers.append(Timer(label=spec, duration_seconds=seconds, created_at=now_ms))
    options = ["next", "repeat"] if session.active_task else []
    return ScreenPayload(body_text=f"Timer set for {spec}.", options=options)


_DURATION_RE = re.compile(
    r"(\d+(?:\.\d+)?)\s*(hours?|hrs?|h|minutes?|mins?|m|seconds?|secs?|s)\b",
    re.IGNORECASE,
)
_UNIT_SECONDS = {"h": 3600, "m": 60, "s": 1}


def parse_duration(spec: str) -> Optional[int]:
    total = 0.0
    for amount, unit in _DURATION_RE.findall(spec):
        total += float(amount) * _UNIT_SECONDS[unit[0].lower()]
    return int(total) if total > 0 else None


def policy_chitchat(
    session: Session, utterance: str, deps: TurnDeps, gw: _TurnGateway
) -> ScreenPayload:
    request = GenRequest(
        template_id="chitchat",
        slots={"utterance": utterance, "dialogue": _dialogue_window(session)},
    )
    try:
        body = gw.generate(request).text.strip()
    except GatewayError as e:
        log.warning("chitchat generation failed: %s", e)
        body = "Happy to chat! I'm at my best walking you through a task though."
    return ScreenPayload(body_text=body, options=_suggestions(session))


def policy_static(session: Session, code: ActionCode) -> ScreenPayload:
    if code.name == "inform_capabilities":
        return ScreenPayload(body_text=CAPABILITIES, options=_suggestions(session))
    # confused_user
    if session.active_task is not None and session.cursor is not None:
        hint = (
            f"We're on step {session.cursor.index + 1} of "
            f"{len(session.active_task.steps)} — say repeat to hear it again."
        )
    else:
        hint = "Tell me what you'd like to make or fix and I'll find a task."
    return ScreenPayload(
        body_text=f"No worries — let's take it one step at a time. {hint}",
        options=_suggestions(session),
    )


# ---------------------------------------------------------------------------
# The turn loop

_NAVIGATION_NAMES = frozenset(
    {
        "next",
        "previous",
        "restart",
        "select",
        "step_select",
        "show_more_results",
        "start_task",
        "stop",
        "pause",
        "cancel",
        "repeat",
        "yes",
        "no",
    }
)


def handle_turn(
    session: Session, utterance: str, deps: TurnDeps
) -> tuple[Session, ScreenPayload]:
    """Run one conversation turn; appends exactly one Turn for accepted input."""
    trimmed = utterance.strip()
    now_ms = time.monotonic_ns() // 1_000_000
    if not trimmed:
        return session, ScreenPayload(
            body_text="I didn't catch that — what would you like to do?",
            options=_suggestions(session),
        )

    gw = _TurnGateway(deps.gateway)
    annotations: list[str] = []

    if session.active_task is not None and match_substitution(trimmed) is not None:
        code = actions.unknown(trimmed)  # not in the action grammar
        policy_name = "adapt"
        payload = policy_adapt(session, trimmed, deps, gw)
    else:
        previous = session.history[-1].system_response if session.history else ""
        ctx = DecisionContext(
            utterance=trimmed,
            previous_system_response=previous,
            scope=session.scope(),
            task_state_summary=session.state_summary(),
        )
        try:
            code = deps.decide(ctx)
        except GatewayError as e:
            annotations.append(f"decision backend failed: {type(e).__name__}: {e}")
            code = actions.unknown(trimmed)
        if deps.decision_annotations:
            annotations.extend(deps.decision_annotations)
            deps.decision_annotations.clear()
        if not code.is_unknown and code not in ctx.scope:
            annotations.append(f"backend emitted out-of-scope {render_action(code)}")
            code = actions.unknown(trimmed)
        if session.phase is SessionPhase.GREETING and not code.is_unknown:
            session.phase = SessionPhase.SEARCH
        policy_name, payload = _dispatch(session, code, trimmed, deps, gw, now_ms)

    safe_body = postprocess_safety(payload.body_text, deps.denylist)
    payload = replace(payload, body_text=safe_body)

    turn = Turn(
        user_utterance=trimmed,
        action_code=code.raw if code.is_unknown else render_action(code),
        policy=policy_name,
        system_response=safe_body,
        screen=payload,
        timestamp=now_ms,
        gateway_calls=gw.calls,
        annotations=annotations,
    )
    session.history.append(turn)

    if deps.store is not None:
        try:
            deps.store.append_turn(session, turn)
        except Exception:
            log.exception("failed to persist turn for session %s", session.session_id)

    return session, payload


def _dispatch(
    session: Session,
    code: ActionCode,
    utterance: str,
    deps: TurnDeps,
    gw: _TurnGateway,
    now_ms: int,
) -> tuple[str, ScreenPayload]:
    if code.is_unknown:
        return "fallback", policy_fallback(session, code, deps, gw)
    if code.name == "search":
        return "search", policy_search(session, code, deps)
    if code.name in _NAVIGATION_NAMES:
        return "navigate", policy_navigate(session, code, deps)
    if code.name == "ask_question":
        return "question", policy_question(session, code, utterance, deps, gw)
    if code.name == "chit_chat":
        return "chitchat", policy_chitchat(session, utterance, deps, gw)
    if code.name == "show_requirements":
        return "requirements", policy_requirements(session)
    if code.name == "show_more_details":
        return "details", policy_details(session)
    if code.name == "set_timer":
        return "timer", policy_timer(session, code, now_ms)
    if code.name in ("confused_user", "inform_capabilities"):
        return "static", policy_static(session, code)
    raise AssertionError(f"unrouted action {code.name}")


# ---------------------------------------------------------------------------
# Wire/dict forms (turn log, history endpoint, golden transcripts)


def payload_to_dict(payload: ScreenPayload) -> dict:
    return {
        "body_text": payload.body_text,
        "headline": payload.headline,
        "images": [
            {
                "kind": m.kind,
                "url": m.url,
                "caption": m.caption,
                "step_offset_seconds": m.step_offset_seconds,
            }
            for m in payload.images
        ],
        "options": list(payload.options),
        "step_position": (
            {"index": payload.step_position[0], "total": payload.step_position[1]}
            if payload.step_position
            else None
        ),
        "requirements_view": (
            [
                {"name": r.name, "quantity": r.quantity, "optional_flag": r.optional_flag}
                for r in payload.requirements_view
            ]
            if payload.requirements_view is not None
            else None
        ),
    }


def payload_from_dict(obj: dict) -> ScreenPayload:
    position = obj.get("step_position")
    requirements = obj.get("requirements_view")
    return ScreenPayload(
        body_text=obj["body_text"],
        headline=obj.get("headline"),
        images=[
            MediaRef(
                kind=m["kind"],
                url=m["url"],
                caption=m.get("caption"),
                step_offset_seconds=m.get("step_offset_seconds"),
            )
            for m in obj.get("images", [])
        ],
        options=list(obj.get("options", [])),
        step_position=(position["index"], position["total"]) if position else None,
        requirements_view=(
            [
                Requirement(
                    name=r["name"],
                    quantity=r.get("quantity"),
                    optional_flag=bool(r.get("optional_flag", False)),
                )
                for r in requirements
            ]
            if requirements is not None
            else None
        ),
    )


def turn_to_dict(turn: Turn) -> dict:
    return {
        "user_utterance": turn.user_utterance,
        "action_code": turn.action_code,
        "policy": turn.policy,
        "system_response": turn.system_response,
        "screen": payload_to_dict(turn.screen),
        "timestamp": turn.timestamp,
        "gateway_calls": turn.gateway_calls,
        "annotations": list(turn.annotations),
    }


def turn_from_dict(obj: dict) -> Turn:
    return Turn(
        user_utterance=obj["user_utterance"],
        action_code=obj["action_code"],
        policy=obj["policy"],
        system_response=obj["system_response"],
        screen=payload_from_dict(obj["screen"]),
        timestamp=int(obj["timestamp"]),
        gateway_calls=int(obj.get("gateway_calls", 0)),
        annotations=list(obj.get("annotations", [])),
    )


def session_state_dict(session: Session) -> dict:
    return {
        "phase": session.phase.value,
        "cursor_index": session.cursor.index if session.cursor else None,
        "active_task": graph_to_dict(session.active_task) if session.active_task else None,
        "results": list(session.results),
        "results_offset": session.results_offset,
        "timers": [
            {
                "label": t.label,
                "duration_seconds": t.duration_seconds,
                "created_at": t.created_at,
            }
            for t in session.timers
        ],
    }


def apply_state_dict(session: Session, state: dict) -> None:
    session.phase = SessionPhase(state["phase"])
    task = state.get("active_task")
    session.active_task = graph_from_dict(task) if task else None
    cursor_index = state.get("cursor_index")
    if session.active_task is not None and cursor_index is not None:
        session.cursor = TaskCursor(task_id=session.active_task.id, index=cursor_index)
    else:
        session.cursor = None
    session.results = list(state.get("results", []))
    session.results_offset = int(state.get("results_offset", 0))
    session.timers = [
        Timer(
            label=t["label"],
            duration_seconds=t.get("duration_seconds"),
            created_at=int(t.get("created_at", 0)),
        )
        for t in state.get("timers", [])
    ]

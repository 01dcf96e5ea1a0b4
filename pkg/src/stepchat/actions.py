"""Action-code language: the closed command vocabulary the assistant executes.

Every user turn is reduced to one of these codes before any policy runs.
Codes are plain strings on the wire ("next", "select(3)", "search(query: \"x\")");
this module owns parsing, canonical rendering, and the per-state scope rules
that decide which codes are currently allowed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class ActionCategory(str, Enum):
    TASK_NAVIGATION = "task_navigation"
    CONVERSATIONAL = "conversational"
    GENERAL_NAVIGATION = "general_navigation"
    DOMAIN_SPECIFIC = "domain_specific"
    UNKNOWN = "unknown"


class SessionPhase(str, Enum):
    GREETING = "greeting"
    SEARCH = "search"
    RESULTS = "results"
    TASK_PREVIEW = "task_preview"
    EXECUTION = "execution"
    FAREWELL = "farewell"


class _Arg(Enum):
    NONE = "none"
    INDEX = "index"
    QUERY = "query"
    TIMER = "timer"


# name -> (category, argument shape).  This table IS the grammar.
_TEMPLATES: dict[str, tuple[ActionCategory, _Arg]] = {
    "restart": (ActionCategory.TASK_NAVIGATION, _Arg.NONE),
    "next": (ActionCategory.TASK_NAVIGATION, _Arg.NONE),
    "previous": (ActionCategory.TASK_NAVIGATION, _Arg.NONE),
    "select": (ActionCategory.TASK_NAVIGATION, _Arg.INDEX),
    "step_select": (ActionCategory.TASK_NAVIGATION, _Arg.INDEX),
    "show_more_results": (ActionCategory.TASK_NAVIGATION, _Arg.NONE),
    "ask_question": (ActionCategory.CONVERSATIONAL, _Arg.NONE),
    "search": (ActionCategory.CONVERSATIONAL, _Arg.QUERY),
    "show_more_details": (ActionCategory.CONVERSATIONAL, _Arg.NONE),
    "chit_chat": (ActionCategory.CONVERSATIONAL, _Arg.NONE),
    "start_task": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "stop": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "pause": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "cancel": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "repeat": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "yes": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "no": (ActionCategory.GENERAL_NAVIGATION, _Arg.NONE),
    "set_timer": (ActionCategory.DOMAIN_SPECIFIC, _Arg.TIMER),
    "confused_user": (ActionCategory.DOMAIN_SPECIFIC, _Arg.NONE),
    "show_requirements": (ActionCategory.DOMAIN_SPECIFIC, _Arg.NONE),
    "inform_capabilities": (ActionCategory.DOMAIN_SPECIFIC, _Arg.NONE),
}

UNKNOWN_NAME = "unknown"


@dataclass(frozen=True)
class ActionCode:
    """One command in the action language.

    Exactly one argument field is populated, matching the grammar shape of
    ``name``; ``raw`` is only set on the unknown sink, which carries the
    original text for the fallback path instead of erroring.
    """

    name: str
    index: int | None = None
    query: str | None = None
    timer_spec: str | None = None
    raw: str | None = None

    def __post_init__(self) -> None:
        if self.name == UNKNOWN_NAME:
            if self.raw is None:
                raise ValueError("unknown code requires the raw text")
            return
        if self.name not in _TEMPLATES:
            raise ValueError(f"not an action name: {self.name!r}")
        arg = _TEMPLATES[self.name][1]
        if arg is _Arg.INDEX:
            if self.index is None or self.index < 1:
                raise ValueError(f"{self.name} requires a 1-based index")
        elif arg is _Arg.QUERY:
            if self.query is None or not self.query.strip():
                raise ValueError("search requires a non-empty query")
        elif arg is _Arg.TIMER:
            # empty duration text is meaningless; normalise to "no duration"
            if self.timer_spec is not None and not self.timer_spec.strip():
                object.__setattr__(self, "timer_spec", None)

    @property
    def category(self) -> ActionCategory:
        if self.name == UNKNOWN_NAME:
            return ActionCategory.UNKNOWN
        return _TEMPLATES[self.name][0]

    @property
    def is_unknown(self) -> bool:
        return self.name == UNKNOWN_NAME


# No-argument codes, ready to use.
RESTART = ActionCode("restart")
NEXT = ActionCode("next")
PREVIOUS = ActionCode("previous")
SHOW_MORE_RESULTS = ActionCode("show_more_results")
ASK_QUESTION = ActionCode("ask_question")
SHOW_MORE_DETAILS = ActionCode("show_more_details")
CHIT_CHAT = ActionCode("chit_chat")
START_TASK = ActionCode("start_task")
STOP = ActionCode("stop")
PAUSE = ActionCode("pause")
CANCEL = ActionCode("cancel")
REPEAT = ActionCode("repeat")
YES = ActionCode("yes")
NO = ActionCode("no")
CONFUSED_USER = ActionCode("confused_user")
SHOW_REQUIREMENTS = ActionCode("show_requirements")
INFORM_CAPABILITIES = ActionCode("inform_capabilities")


def select(index: int) -> ActionCode:
    return ActionCode("select", index=index)


def step_select(index: int) -> ActionCode:
    return ActionCode("step_select", index=index)


def search(query: str) -> ActionCode:
    return ActionCode("search", query=query)


def set_timer(timer_spec: str | None = None) -> ActionCode:
    return ActionCode("set_timer", timer_spec=timer_spec)


def unknown(raw: str) -> ActionCode:
    return ActionCode(UNKNOWN_NAME, raw=raw)


def all_action_names() -> list[str]:
    """Every concrete action name in the grammar, in table order."""
    return list(_TEMPLATES)


_CALL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$", re.DOTALL)
_QUERY_PREFIX_RE = re.compile(r"^query\s*:\s*", re.IGNORECASE)


def _scan_quoted(s: str) -> tuple[str, str] | None:
    """Read a leading double-quoted literal; returns (value, rest) or None.

    Supports backslash escapes for the quote and the backslash itself.
    """
    if not s.startswith('"'):
        return None
    out: list[str] = []
    i = 1
    while i < len(s):
        c = s[i]
        if c == "\\" and i + 1 < len(s) and s[i + 1] in ('"', "\\"):
            out.append(s[i + 1])
            i += 2
        elif c == '"':
            return "".join(out), s[i + 1 :]
        else:
            out.append(c)
            i += 1
    return None  # unterminated


def _escape_quoted(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def parse_action(text: str) -> ActionCode:
    """Parse one action-code string; anything out of grammar becomes unknown.

    Total by design: model output is untrusted, so there is no error path,
    only the unknown sink. Function names are case-insensitive and whitespace
    around punctuation is ignored.
    """
    sink = unknown(text)
    m = _CALL_RE.match(text.strip())
    if not m:
        return sink
    name = m.group(1).lower()
    args = m.group(2)
    if name not in _TEMPLATES:
        return sink
    arg_kind = _TEMPLATES[name][1]

    if arg_kind is _Arg.NONE:
        if args is None or not args.strip():
            return ActionCode(name)
        return sink

    if arg_kind is _Arg.INDEX:
        if args is None:
            return sink
        digits = args.strip()
        if not digits.isdigit():
            return sink
        index = int(digits)
        if index < 1:
            return sink
        return ActionCode(name, index=index)

    if arg_kind is _Arg.QUERY:
        if args is None:
            return sink
        body = _QUERY_PREFIX_RE.sub("", args.strip())
        scanned = _scan_quoted(body)
        if scanned is None:
            return sink
        value, rest = scanned
        if rest.strip() or not value.strip():
            return sink
        return ActionCode(name, query=value)

    # timer: bare, quoted, or loose free text
    if args is None or not args.strip():
        return ActionCode(name)
    body = args.strip()
    scanned = _scan_quoted(body)
    if scanned is not None:
        value, rest = scanned
        if rest.strip():
            return sink
        return ActionCode(name, timer_spec=value)
    if '"' in body:
        return sink
    return ActionCode(name, timer_spec=body)


def render_action(code: ActionCode) -> str:
    """Canonical string form; inverse of parse_action for non-unknown codes."""
    if code.is_unknown:
        raise ValueError("unknown codes have no canonical rendering")
    arg_kind = _TEMPLATES[code.name][1]
    if arg_kind is _Arg.NONE:
        return code.name
    if arg_kind is _Arg.INDEX:
        return f"{code.name}({code.index})"
    if arg_kind is _Arg.QUERY:
        return f'{code.name}(query: "{_escape_quoted(code.query or "")}")'
    if code.timer_spec is None:
        return code.name
    return f'{code.name}("{_escape_quoted(code.timer_spec)}")'


def signature(name: str) -> str:
    """Human/prompt-facing template form, e.g. "select(int)"."""
    arg_kind = _TEMPLATES[name][1]
    if arg_kind is _Arg.INDEX:
        return f"{name}(int)"
    if arg_kind is _Arg.QUERY:
        return f"{name}(query: string)"
    return name


# Scope rule groups: which codes a conversation state admits.
_ALWAYS = frozenset(
    {
        "ask_question",
        "chit_chat",
        "inform_capabilities",
        "confused_user",
        "yes",
        "no",
        "stop",
        "cancel",
        "repeat",
        "pause",
    }
)
_NEEDS_ACTIVE_TASK = frozenset(
    {
        "next",
        "previous",
        "restart",
        "step_select",
        "show_requirements",
        "set_timer",
        "show_more_details",
    }
)
_NEEDS_VISIBLE_RESULTS = frozenset({"select", "show_more_results"})
_PREVIEW_ONLY = frozenset({"start_task"})


@dataclass(frozen=True)
class ActionScope:
    """The set of action templates valid right now, plus what derived it."""

    allowed: frozenset[str]
    phase: SessionPhase
    has_active_task: bool
    visible_results: int

    def admits(self, code: ActionCode) -> bool:
        return not code.is_unknown and code.name in self.allowed

    def __contains__(self, item: object) -> bool:
        if isinstance(item, ActionCode):
            return self.admits(item)
        return item in self.allowed

    def signatures(self) -> list[str]:
        """Prompt-facing templates in stable grammar order."""
        return [signature(n) for n in _TEMPLATES if n in self.allowed]


def scope_for(
    phase: SessionPhase, has_active_task: bool, visible_results: int
) -> ActionScope:
    """Pure scoping function: (phase, flags) -> allowed action templates."""
    allowed = set(_ALWAYS)
    # mid-execution chatter routes to the fallback path, not to a fresh search
    if phase is not SessionPhase.EXECUTION:
        allowed.add("search")
    if has_active_task:
        allowed |= _NEEDS_ACTIVE_TASK
    if visible_results > 0:
        allowed |= _NEEDS_VISIBLE_RESULTS
    if phase is SessionPhase.TASK_PREVIEW:
        allowed |= _PREVIEW_ONLY
    return ActionScope(
        allowed=frozenset(allowed),
        phase=phase,
        has_active_task=has_active_task,
        visible_results=visible_results,
    )

"""Task graphs: the executable representation of a real-world task.

A graph is a linear sequence of steps plus requirements, knowledge chunks and
media, built offline from web pages and mutated live by conversation policies
(append/remove/reschedule steps, substitute requirements). Graphs are treated
as values: every mutation returns a new graph and never touches the input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional


class TaskGraphError(ValueError):
    """Raised on invalid mutations (bad index, duplicate id, ...)."""


class SchemaError(ValueError):
    """Raised on malformed serialized graphs; message names the field path."""

    def __init__(self, path: str, problem: str):
        self.path = path
        self.problem = problem
        super().__init__(f"{path}: {problem}")


@dataclass
class MediaRef:
    kind: str  # "image" | "video"
    url: str
    caption: Optional[str] = None
    step_offset_seconds: Optional[int] = None


@dataclass
class Requirement:
    name: str
    quantity: Optional[str] = None
    optional_flag: bool = False


@dataclass
class KnowledgeChunk:
    text: str
    source_url: str


@dataclass
class StepNode:
    id: str
    text: str
    spoken_text: Optional[str] = None
    details: Optional[str] = None
    media: list[MediaRef] = field(default_factory=list)
    duration_seconds: Optional[int] = None


@dataclass
class TaskGraph:
    id: str
    title: str
    domain: str = "other"  # cooking | diy | other
    source_url: str = ""
    author: Optional[str] = None
    tags: list[str] = field(default_factory=list)
    rating: Optional[float] = None
    requirements: list[Requirement] = field(default_factory=list)
    steps: list[StepNode] = field(default_factory=list)
    knowledge: list[KnowledgeChunk] = field(default_factory=list)
    hero_image: Optional[MediaRef] = None


@dataclass(frozen=True)
class TaskCursor:
    """Execution position inside a graph; index stays valid across mutations."""

    task_id: str
    index: int


def validate_graph(g: TaskGraph) -> list[str]:
    """Return every invariant violation; an empty list means servable."""
    problems: list[str] = []
    if not g.id:
        problems.append("id: empty")
    if not g.title:
        problems.append("title: empty")
    if g.domain not in ("cooking", "diy", "other"):
        problems.append(f"domain: unknown tag {g.domain!r}")
    if g.rating is not None and not (0.0 <= g.rating <= 5.0):
        problems.append(f"rating: {g.rating} outside [0, 5]")
    if not g.steps:
        problems.append("steps: empty")
    seen: set[str] = set()
    for i, s in enumerate(g.steps):
        if not s.id:
            problems.append(f"steps[{i}].id: empty")
        elif s.id in seen:
            problems.append(f"steps[{i}].id: duplicate {s.id!r}")
        seen.add(s.id)
        if not s.text:
            problems.append(f"steps[{i}].text: empty")
        if s.duration_seconds is not None and s.duration_seconds <= 0:
            problems.append(f"steps[{i}].duration_seconds: must be > 0")
        for j, m in enumerate(s.media):
            problems.extend(_media_problems(m, f"steps[{i}].media[{j}]"))
    for i, r in enumerate(g.requirements):
        if not r.name:
            problems.append(f"requirements[{i}].name: empty")
    for i, k in enumerate(g.knowledge):
        if not k.text:
            problems.append(f"knowledge[{i}].text: empty")
    if g.hero_image is not None:
        problems.extend(_media_problems(g.hero_image, "hero_image"))
    return problems


def _media_problems(m: MediaRef, path: str) -> list[str]:
    problems = []
    if m.kind not in ("image", "video"):
        problems.append(f"{path}.kind: unknown kind {m.kind!r}")
    if not m.url:
        problems.append(f"{path}.url: empty")
    if m.step_offset_seconds is not None and m.step_offset_seconds < 0:
        problems.append(f"{path}.step_offset_seconds: negative")
    return problems


# ---------------------------------------------------------------------------
# Live mutations


def append_step(g: TaskGraph, after_index: int, s: StepNode) -> TaskGraph:
    """Insert a step after position after_index (-1 prepends)."""
    if not (-1 <= after_index <= len(g.steps) - 1):
        raise TaskGraphError(f"after_index {after_index} out of range")
    if any(existing.id == s.id for existing in g.steps):
        raise TaskGraphError(f"duplicate step id {s.id!r}")
    steps = list(g.steps)
    steps.insert(after_index + 1, s)
    return replace(g, steps=steps)


def remove_step(
    g: TaskGraph, index: int, cursor: Optional[TaskCursor] = None
) -> tuple[TaskGraph, Optional[TaskCursor]]:
    """Drop a step; the cursor is shifted or clamped so it stays valid."""
    if len(g.steps) < 2:
        raise TaskGraphError("cannot remove the only step")
    if not (0 <= index < len(g.steps)):
        raise TaskGraphError(f"index {index} out of range")
    steps = list(g.steps)
    del steps[index]
    new_graph = replace(g, steps=steps)
    if cursor is None:
        return new_graph, None
    new_index = cursor.index
    if cursor.index > index:
        new_index = cursor.index - 1
    elif cursor.index == index:
        new_index = min(index, len(steps) - 1)
    return new_graph, replace(cursor, index=new_index)


def reschedule_step(
    g: TaskGraph, from_index: int, to_index: int, cursor: Optional[TaskCursor] = None
) -> tuple[TaskGraph, Optional[TaskCursor]]:
    """Move a step (remove-then-insert); the cursor follows its step."""
    n = len(g.steps)
    if not (0 <= from_index < n):
        raise TaskGraphError(f"from_index {from_index} out of range")
    if not (0 <= to_index < n):
        raise TaskGraphError(f"to_index {to_index} out of range")
    steps = list(g.steps)
    moved = steps.pop(from_index)
    steps.insert(to_index, moved)
    new_graph = replace(g, steps=steps)
    if cursor is None:
        return new_graph, None
    tracked_id = g.steps[cursor.index].id
    new_index = next(i for i, s in enumerate(steps) if s.id == tracked_id)
    return new_graph, replace(cursor, index=new_index)


def substitute_requirement(
    g: TaskGraph, old_name: str, replacement: Requirement
) -> TaskGraph:
    """Swap the requirement named old_name (case-insensitive) for another.

    Step texts are left alone on purpose: rewriting instructions to mention
    the new ingredient is a policy/model concern, not a graph operation.
    """
    wanted = old_name.strip().lower()
    for i, r in enumerate(g.requirements):
        if r.name.strip().lower() == wanted:
            requirements = list(g.requirements)
            requirements[i] = replacement
            return replace(g, requirements=requirements)
    raise TaskGraphError(f"no requirement named {old_name!r}")


# ---------------------------------------------------------------------------
# Serialization: line-delimited JSON with stable key order


def graph_to_dict(g: TaskGraph) -> dict[str, Any]:
    return {
        "id": g.id,
        "title": g.title,
        "domain": g.domain,
        "source_url": g.source_url,
        "author": g.author,
        "tags": list(g.tags),
        "rating": g.rating,
        "requirements": [
            {"name": r.name, "quantity": r.quantity, "optional_flag": r.optional_flag}
            for r in g.requirements
        ],
        "steps": [
            {
                "id": s.id,
                "text": s.text,
                "spoken_text": s.spoken_text,
                "details": s.details,
                "media": [_media_to_dict(m) for m in s.media],
                "duration_seconds": s.duration_seconds,
            }
            for s in g.steps
        ],
        "knowledge": [
            {"text": k.text, "source_url": k.source_url} for k in g.knowledge
        ],
        "hero_image": _media_to_dict(g.hero_image) if g.hero_image else None,
    }


def _media_to_dict(m: MediaRef) -> dict[str, Any]:
    return {
        "kind": m.kind,
        "url": m.url,
        "caption": m.caption,
        "step_offset_seconds": m.step_offset_seconds,
    }


def serialize_graph(g: TaskGraph) -> bytes:
    return json.dumps(graph_to_dict(g), ensure_ascii=False).encode("utf-8")


def _expect(obj: Any, key: str, kinds: tuple[type, ...], path: str, required=True):
    if key not in obj or obj[key] is None:
        if required:
            raise SchemaError(f"{path}.{key}" if path else key, "missing")
        return None
    value = obj[key]
    if not isinstance(value, kinds):
        raise SchemaError(
            f"{path}.{key}" if path else key,
            f"expected {'/'.join(k.__name__ for k in kinds)}, got {type(value).__name__}",
        )
    return value


def _media_from_dict(obj: Any, path: str) -> MediaRef:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected object")
    offset = _expect(obj, "step_offset_seconds", (int,), path, required=False)
    return MediaRef(
        kind=_expect(obj, "kind", (str,), path),
        url=_expect(obj, "url", (str,), path),
        caption=_expect(obj, "caption", (str,), path, required=False),
        step_offset_seconds=offset,
    )


def graph_from_dict(obj: Any) -> TaskGraph:
    """Build a graph from parsed JSON; unknown extra keys are ignored."""
    if not isinstance(obj, dict):
        raise SchemaError("", "expected top-level object")
    requirements = []
    for i, r in enumerate(_expect(obj, "requirements", (list,), "", required=False) or []):
        path = f"requirements[{i}]"
        if not isinstance(r, dict):
            raise SchemaError(path, "expected object")
        requirements.append(
            Requirement(
                name=_expect(r, "name", (str,), path),
                quantity=_expect(r, "quantity", (str,), path, required=False),
                optional_flag=bool(r.get("optional_flag", False)),
            )
        )
    steps = []
    for i, s in enumerate(_expect(obj, "steps", (list,), "", required=False) or []):
        path = f"steps[{i}]"
        if not isinstance(s, dict):
            raise SchemaError(path, "expected object")
        media = [
            _media_from_dict(m, f"{path}.media[{j}]")
            for j, m in enumerate(_expect(s, "media", (list,), path, required=False) or [])
        ]
        duration = _expect(s, "duration_seconds", (int,), path, required=False)
        steps.append(
            StepNode(
                id=_expect(s, "id", (str,), path),
                text=_expect(s, "text", (str,), path),
                spoken_text=_expect(s, "spoken_text", (str,), path, required=False),
                details=_expect(s, "details", (str,), path, required=False),
                media=media,
                duration_seconds=duration,
            )
        )
    knowledge = []
    for i, k in enumerate(_expect(obj, "knowledge", (list,), "", required=False) or []):
        path = f"knowledge[{i}]"
        if not isinstance(k, dict):
            raise SchemaError(path, "expected object")
        knowledge.append(
            KnowledgeChunk(
                text=_expect(k, "text", (str,), path),
                source_url=_expect(k, "source_url", (str,), path, required=False) or "",
            )
        )
    hero = obj.get("hero_image")
    rating = obj.get("rating")
    if rating is not None and not isinstance(rating, (int, float)):
        raise SchemaError("rating", f"expected number, got {type(rating).__name__}")
    return TaskGraph(
        id=_expect(obj, "id", (str,), ""),
        title=_expect(obj, "title", (str,), ""),
        domain=_expect(obj, "domain", (str,), "", required=False) or "other",
        source_url=_expect(obj, "source_url", (str,), "", required=False) or "",
        author=_expect(obj, "author", (str,), "", required=False),
        tags=[str(t) for t in (_expect(obj, "tags", (list,), "", required=False) or [])],
        rating=float(rating) if rating is not None else None,
        requirements=requirements,
        steps=steps,
        knowledge=knowledge,
        hero_image=_media_from_dict(hero, "hero_image") if hero else None,
    )


def deserialize_graph(data: bytes) -> TaskGraph:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError("", f"not valid JSON: {e}") from e
    return graph_from_dict(obj)


def write_corpus(graphs: Iterable[TaskGraph], path) -> int:
    """Write tasks.jsonl (one graph per line, UTF-8, no BOM); returns count."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            f.write(serialize_graph(g).decode("utf-8"))
            f.write("\n")
            n += 1
    return n


def read_corpus(path) -> list[TaskGraph]:
    graphs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                graphs.append(deserialize_graph(line.encode("utf-8")))
            except SchemaError as e:
                raise SchemaError(f"line {line_no}: {e.path}", e.problem) from e
    return graphs

"""Offline pipeline: turn saved web pages into a servable task corpus.

Two parsers run in order per document: a structured-data parser over
schema.org JSON-LD blocks (Recipe / HowTo), then a heuristic DOM parser for
pages without usable structured data. Parsed graphs pass through augmenters
(spoken walk-through text, page media attachment, optional model rewrites),
get validated, and are written out as the corpus artifacts the online system
loads: tasks.jsonl, knowledge.jsonl, categories.json, report.json.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterable, Optional

from .gateway import Gateway, GatewayError, GenRequest
from .taskgraph import (
    KnowledgeChunk,
    MediaRef,
    Requirement,
    StepNode,
    TaskGraph,
    graph_to_dict,
    validate_graph,
)

log = logging.getLogger("stepchat.ingestion")

MIN_HEURISTIC_STEPS = 2
KNOWLEDGE_MIN_CHARS = 300
REQUIREMENT_HEADING_RE = re.compile(
    r"ingredient|material|supplies|you will need", re.IGNORECASE
)


@dataclass
class RawDocument:
    url: str
    html: str
    fetched_at: float = 0.0

    def __post_init__(self) -> None:
        if not self.html:
            raise ValueError("document html must be non-empty")


# ---------------------------------------------------------------------------
# DOM scan (stdlib html.parser; no external HTML dependencies)


class _PageScan(HTMLParser):
    """Single pass over the document collecting everything both parsers need."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.title = ""
        self.h1 = ""
        self.canonical = ""
        self.og_url = ""
        self.jsonld_blocks: list[str] = []
        self.ordered_lists: list[list[str]] = []
        self.unordered_lists: list[tuple[str, list[str]]] = []  # (preceding heading, items)
        self.paragraphs: list[str] = []
        self.images: list[tuple[str, str]] = []  # (src, alt)
        self.videos: list[str] = []
        self._last_heading = ""
        self._heading_buf: Optional[list[str]] = None
        self._title_buf: Optional[list[str]] = None
        self._p_buf: Optional[list[str]] = None
        self._script_buf: Optional[list[str]] = None
        self._list_stack: list[dict] = []
        self._li_stack: list[list[str]] = []
        self._in_video = False

    def handle_starttag(self, tag, attrs):
        attrs_map = dict(attrs)
        if tag == "title":
            self._title_buf = []
        elif tag in ("h1", "h2", "h3", "h4", "h5", "h6"):
            self._heading_buf = []
            self._heading_tag = tag
        elif tag == "p":
            self._p_buf = []
        elif tag == "script" and attrs_map.get("type", "").strip() == "application/ld+json":
            self._script_buf = []
        elif tag in ("ol", "ul"):
            self._list_stack.append(
                {"tag": tag, "heading": self._last_heading, "items": []}
            )
        elif tag == "li" and self._list_stack:
            self._li_stack.append([])
        elif tag == "img":
            src = attrs_map.get("src", "")
            if src:
                self.images.append((src, attrs_map.get("alt", "")))
        elif tag == "video":
            self._in_video = True
            src = attrs_map.get("src", "")
            if src:
                self.videos.append(src)
        elif tag == "source" and self._in_video:
            src = attrs_map.get("src", "")
            if src:
                self.videos.append(src)
        elif tag == "link" and attrs_map.get("rel", "").lower() == "canonical":
            self.canonical = attrs_map.get("href", "")
        elif tag == "meta" and attrs_map.get("property", "").lower() == "og:url":
            self.og_url = attrs_map.get("content", "")

    def handle_endtag(self, tag):
        if tag == "title" and self._title_buf is not None:
            self.title = _clean(" ".join(self._title_buf))
            self._title_buf = None
        elif tag in ("h1", "h2", "h3", "h4", "h5", "h6") and self._heading_buf is not None:
            text = _clean(" ".join(self._heading_buf))
            if tag == "h1" and not self.h1:
                self.h1 = text
            self._last_heading = text
            self._heading_buf = None
        elif tag == "p" and self._p_buf is not None:
            text = _clean(" ".join(self._p_buf))
            if text:
                self.paragraphs.append(text)
            self._p_buf = None
        elif tag == "script" and self._script_buf is not None:
            self.jsonld_blocks.append("".join(self._script_buf))
            self._script_buf = None
        elif tag == "li" and self._li_stack:
            text = _clean(" ".join(self._li_stack.pop()))
            if text and self._list_stack:
                self._list_stack[-1]["items"].append(text)
        elif tag in ("ol", "ul") and self._list_stack:
            entry = self._list_stack.pop()
            if entry["tag"] != tag:
                self._list_stack.append(entry)  # mismatched nesting; keep scanning
                return
            if entry["tag"] == "ol":
                self.ordered_lists.append(entry["items"])
            else:
                self.unordered_lists.append((entry["heading"], entry["items"]))
        elif tag == "video":
            self._in_video = False

    def handle_data(self, data):
        if self._script_buf is not None:
            self._script_buf.append(data)
            return
        for buf in (self._title_buf, self._heading_buf, self._p_buf):
            if buf is not None:
                buf.append(data)
        if self._li_stack:
            self._li_stack[-1].append(data)


def _clean(text: str) -> str:
    return " ".join(text.split())


def scan_page(doc: RawDocument) -> _PageScan:
    scan = _PageScan()
    scan.feed(doc.html)
    scan.close()
    return scan


def _source_url(doc: RawDocument, scan: _PageScan) -> str:
    return scan.canonical or scan.og_url or doc.url


def _task_id(title: str, source_url: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")[:40].rstrip("-")
    digest = hashlib.sha1(source_url.encode("utf-8")).hexdigest()[:8]
    return f"{slug}-{digest}" if slug else digest


def _page_knowledge(scan: _PageScan, source_url: str) -> list[KnowledgeChunk]:
    return [
        KnowledgeChunk(text=p, source_url=source_url)
        for p in scan.paragraphs
        if len(p) > KNOWLEDGE_MIN_CHARS
    ]


# ---------------------------------------------------------------------------
# Structured-data parser (schema.org JSON-LD)


def _jsonld_objects(blocks: list[str]) -> list[dict]:
    objects: list[dict] = []
    for block in blocks:
        try:
            data = json.loads(block)
        except json.JSONDecodeError as e:
            log.debug("malformed JSON-LD block skipped: %s", e)
            continue
        queue = data if isinstance(data, list) else [data]
        for item in queue:
            if isinstance(item, dict):
                objects.append(item)
                graph = item.get("@graph")
                if isinstance(graph, list):
                    objects.extend(x for x in graph if isinstance(x, dict))
    return objects


def _type_names(obj: dict) -> set[str]:
    raw = obj.get("@type", [])
    names = raw if isinstance(raw, list) else [raw]
    return {str(n).lower() for n in names}


def _as_text(value) -> str:
    if isinstance(value, str):
        return _clean(value)
    if isinstance(value, dict):
        return _clean(str(value.get("text") or value.get("name") or ""))
    return ""


def _flatten_instructions(value) -> list[str]:
    """Normalise recipeInstructions / HowTo step into a flat list of texts."""
    steps: list[str] = []
    items = value if isinstance(value, list) else [value]
    for item in items:
        if isinstance(item, dict) and "howtosection" in _type_names(item):
            steps.extend(_flatten_instructions(item.get("itemListElement", [])))
            continue
        text = _as_text(item)
        if text:
            steps.append(text)
    return steps


def _step_images(value) -> list[MediaRef]:
    if not isinstance(value, dict):
        return []
    return [_image_ref(img) for img in _image_urls(value.get("image")) if img]


def _image_urls(value) -> list[str]:
    if value is None:
        return []
    items = value if isinstance(value, list) else [value]
    urls = []
    for item in items:
        if isinstance(item, str):
            urls.append(item)
        elif isinstance(item, dict):
            url = item.get("url") or item.get("contentUrl") or ""
            if url:
                urls.append(str(url))
    return urls


def _image_ref(url: str, caption: Optional[str] = None) -> MediaRef:
    return MediaRef(kind="image", url=url, caption=caption or None)


_DURATION_RE = re.compile(
    r"^P(?:(?P<days>\d+)D)?(?:T(?:(?P<hours>\d+)H)?(?:(?P<minutes>\d+)M)?(?:(?P<seconds>\d+)S)?)?$"
)


def parse_iso_duration(value: str) -> Optional[int]:
    m = _DURATION_RE.match(value.strip())
    if not m or not any(m.groupdict().values()):
        return None
    parts = {k: int(v) for k, v in m.groupdict().items() if v}
    return (
        parts.get("days", 0) * 86400
        + parts.get("hours", 0) * 3600
        + parts.get("minutes", 0) * 60
        + parts.get("seconds", 0)
    )


_QUANTITY_RE = re.compile(
    r"^(?P<qty>\d[\d/.,]*\s*(?:g|kg|ml|l|cups?|tbsp|tsp|oz|lbs?|pounds?|cloves?|"
    r"slices?|cans?|sheets?|pieces?)?)\s+(?P<name>.+)$",
    re.IGNORECASE,
)


def _requirement_from_text(text: str, optional_flag: bool = False) -> Requirement:
    m = _QUANTITY_RE.match(text)
    if m and m.group("name"):
        return Requirement(
            name=_clean(m.group("name")),
            quantity=_clean(m.group("qty")),
            optional_flag=optional_flag,
        )
    return Requirement(name=_clean(text), optional_flag=optional_flag)


def _collect_tags(objects: list[dict], primary: dict) -> list[str]:
    tags: list[str] = []
    for obj in objects:
        if "breadcrumblist" in _type_names(obj):
            for item in obj.get("itemListElement", []):
                if isinstance(item, dict):
                    name = _as_text(item) or _as_text(item.get("item", {}))
                    if name:
                        tags.append(name)
    keywords = primary.get("keywords")
    if isinstance(keywords, str):
        tags.extend(_clean(k) for k in keywords.split(",") if _clean(k))
    elif isinstance(keywords, list):
        tags.extend(_clean(str(k)) for k in keywords if _clean(str(k)))
    seen: set[str] = set()
    unique = []
    for t in tags:
        if t.lower() not in seen:
            seen.add(t.lower())
            unique.append(t)
    return unique


def _spread_duration(steps: list[StepNode], total_seconds: Optional[int]) -> None:
    if not total_seconds or not steps or total_seconds < len(steps):
        return
    share, remainder = divmod(total_seconds, len(steps))
    for s in steps:
        if s.duration_seconds is None:
            s.duration_seconds = share
    if steps[-1].duration_seconds == share:
        steps[-1].duration_seconds = share + remainder


def parse_structured(doc: RawDocument) -> Optional[TaskGraph]:
    """Build a graph from a page's Recipe or HowTo JSON-LD, if it has one."""
    scan = scan_page(doc)
    objects = _jsonld_objects(scan.jsonld_blocks)
    primary = None
    domain = "other"
    for obj in objects:
        names = _type_names(obj)
        if "recipe" in names:
            primary, domain = obj, "cooking"
            break
        if "howto" in names:
            primary, domain = obj, "diy"
            break
    if primary is None:
        return None

    source_url = _source_url(doc, scan)
    title = _as_text(primary.get("name")) or scan.h1 or scan.title
    raw_steps = primary.get("recipeInstructions") or primary.get("step") or primary.get(
        "itemListElement"
    )
    step_texts = _flatten_instructions(raw_steps or [])
    if not step_texts:
        log.debug("structured block without usable steps: %s", source_url)
        return None

    raw_step_items = raw_steps if isinstance(raw_steps, list) else [raw_steps]
    steps = []
    for i, text in enumerate(step_texts):
        media = _step_images(raw_step_items[i]) if i < len(raw_step_items) else []
        steps.append(StepNode(id=f"s{i + 1}", text=text, media=media))
    _spread_duration(steps, parse_iso_duration(str(primary.get("totalTime") or "")))

    requirements = [
        _requirement_from_text(_as_text(item))
        for item in primary.get("recipeIngredient", [])
        if _as_text(item)
    ]
    for key in ("supply", "tool"):
        for item in primary.get(key, []) if isinstance(primary.get(key), list) else []:
            name = _as_text(item)
            if name:
                requirements.append(Requirement(name=name))

    author = primary.get("author")
    if isinstance(author, list):
        author = author[0] if author else None
    author_name = _as_text(author) or None

    rating = None
    agg = primary.get("aggregateRating")
    if isinstance(agg, dict):
        try:
            rating = max(0.0, min(5.0, float(agg.get("ratingValue"))))
        except (TypeError, ValueError):
            rating = None

    knowledge = _page_knowledge(scan, source_url)
    description = _as_text(primary.get("description"))
    if description:
        knowledge.insert(0, KnowledgeChunk(text=description, source_url=source_url))

    hero_urls = _image_urls(primary.get("image"))
    return TaskGraph(
        id=_task_id(title, source_url),
        title=title,
        domain=domain,
        source_url=source_url,
        author=author_name,
        tags=_collect_tags(objects, primary),
        rating=rating,
        requirements=requirements,
        steps=steps,
        knowledge=knowledge,
        hero_image=_image_ref(hero_urls[0]) if hero_urls else None,
    )


# ---------------------------------------------------------------------------
# Heuristic parser (no usable structured data)


def parse_heuristic(doc: RawDocument) -> Optional[TaskGraph]:
    """Fallback extraction from the DOM: longest ordered list becomes the steps."""
    scan = scan_page(doc)
    title = scan.h1 or scan.title
    if not title:
        return None
    candidates = [items for items in scan.ordered_lists if len(items) >= MIN_HEURISTIC_STEPS]
    if not candidates:
        return None
    step_texts = max(candidates, key=len)

    requirements: list[Requirement] = []
    for heading, items in scan.unordered_lists:
        if REQUIREMENT_HEADING_RE.search(heading):
            requirements = [_requirement_from_text(item) for item in items if item]
            break

    source_url = _source_url(doc, scan)
    return TaskGraph(
        id=_task_id(title, source_url),
        title=title,
        domain="other",
        source_url=source_url,
        tags=[],
        requirements=requirements,
        steps=[StepNode(id=f"s{i + 1}", text=t) for i, t in enumerate(step_texts)],
        knowledge=_page_knowledge(scan, source_url),
    )


# ---------------------------------------------------------------------------
# Augmenters


@dataclass
class Augmenter:
    id: str
    applies_to: str  # domain tag or "any"
    transform: Callable[[TaskGraph], TaskGraph]

    def apply(self, g: TaskGraph) -> TaskGraph:
        if self.applies_to not in ("any", g.domain):
            return g
        return self.transform(g)


_CONNECTIVES = ("Next,", "Then,")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def augment_spoken(g: TaskGraph) -> TaskGraph:
    """Fill missing spoken_text with a short connective-led walk-through line.

    Idempotent: steps that already carry spoken_text are left untouched.
    """
    steps = []
    for i, s in enumerate(g.steps):
        if s.spoken_text:
            steps.append(s)
            continue
        if i == 0:
            connective = "First,"
        elif i == len(g.steps) - 1 and len(g.steps) > 1:
            connective = "Finally,"
        else:
            connective = _CONNECTIVES[(i - 1) % len(_CONNECTIVES)]
        sentences = _SENTENCE_SPLIT_RE.split(s.text)
        lead = " ".join(sentences[:2]).strip()
        steps.append(
            StepNode(
                id=s.id,
                text=s.text,
                spoken_text=f"{connective} {lead}",
                details=s.details,
                media=list(s.media),
                duration_seconds=s.duration_seconds,
            )
        )
    return replace(g, steps=steps)


def spoken_augmenter() -> Augmenter:
    return Augmenter(id="spoken", applies_to="any", transform=augment_spoken)


def media_augmenter(pages: dict[str, RawDocument]) -> Augmenter:
    """Attach the page's own img/video tags to graphs that lack media."""

    def transform(g: TaskGraph) -> TaskGraph:
        doc = pages.get(g.source_url)
        if doc is None:
            return g
        scan = scan_page(doc)
        hero = g.hero_image
        images = list(scan.images)
        if hero is None and images:
            src, alt = images.pop(0)
            hero = _image_ref(src, alt)
        steps = [
            StepNode(
                id=s.id,
                text=s.text,
                spoken_text=s.spoken_text,
                details=s.details,
                media=list(s.media),
                duration_seconds=s.duration_seconds,
            )
            for s in g.steps
        ]
        for i, (src, alt) in enumerate(images):
            target = steps[i % len(steps)]
            if not target.media:
                target.media.append(_image_ref(src, alt))
        for src in scan.videos:
            steps[0].media.append(MediaRef(kind="video", url=src, step_offset_seconds=0))
        return replace(g, hero_image=hero, steps=steps)

    return Augmenter(id="media", applies_to="any", transform=transform)


def augment_llm_rewrite(g: TaskGraph, gateway: Gateway) -> TaskGraph:
    """Ask the model gateway for extra detail per step.

    Only the details field is ever written; the grounded step text is never
    touched, and any gateway failure leaves the step exactly as it was.
    """
    steps = []
    for s in g.steps:
        details = s.details
        try:
            response = gateway.generate(
                GenRequest(template_id="step_rewrite", slots={"step": s.text})
            )
            details = response.text.strip() or details
        except GatewayError as e:
            log.debug("step_rewrite failed for %s/%s: %s", g.id, s.id, e)
        steps.append(
            StepNode(
                id=s.id,
                text=s.text,
                spoken_text=s.spoken_text,
                details=details,
                media=list(s.media),
                duration_seconds=s.duration_seconds,
            )
        )
    return replace(g, steps=steps)


def llm_augmenter(gateway: Gateway) -> Augmenter:
    return Augmenter(
        id="llm", applies_to="any", transform=lambda g: augment_llm_rewrite(g, gateway)
    )


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class PipelineReport:
    read: int = 0
    parsed_structured: int = 0
    parsed_heuristic: int = 0
    skipped: int = 0
    dropped: int = 0
    written: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def counts(self) -> dict:
        return {
            "read": self.read,
            "parsed_structured": self.parsed_structured,
            "parsed_heuristic": self.parsed_heuristic,
            "skipped": self.skipped,
            "dropped": self.dropped,
            "written": self.written,
        }


def load_documents(input_dir) -> list[RawDocument]:
    """Read pre-fetched pages (*.html / *.htm) in stable filename order."""
    docs = []
    for path in sorted(Path(input_dir).iterdir()):
        if path.suffix.lower() not in (".html", ".htm"):
            continue
        docs.append(
            RawDocument(
                url=f"file://{path.name}",
                html=path.read_text(encoding="utf-8"),
                fetched_at=path.stat().st_mtime,
            )
        )
    return docs


def run_pipeline(
    docs: Iterable[RawDocument],
    augmenters: list[Augmenter],
    out_dir,
) -> PipelineReport:
    """Parse, augment, validate, and write the corpus artifacts."""
    report = PipelineReport()
    graphs: list[TaskGraph] = []
    for doc in docs:
        report.read += 1
        graph = parse_structured(doc)
        if graph is not None:
            report.parsed_structured += 1
        else:
            graph = parse_heuristic(doc)
            if graph is not None:
                report.parsed_heuristic += 1
        if graph is None:
            report.skipped += 1
            report.diagnostics.append(f"{doc.url}: no parser matched")
            continue
        for augmenter in augmenters:
            graph = augmenter.apply(graph)
        problems = validate_graph(graph)
        if problems:
            report.dropped += 1
            report.diagnostics.append(f"{graph.id}: dropped ({'; '.join(problems)})")
            continue
        graphs.append(graph)

    graphs.sort(key=lambda g: g.id)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "tasks.jsonl", "w", encoding="utf-8") as f:
            for g in graphs:
                f.write(json.dumps(graph_to_dict(g), ensure_ascii=False))
                f.write("\n")
                report.written += 1
        with open(out / "knowledge.jsonl", "w", encoding="utf-8") as f:
            for g in graphs:
                for chunk in g.knowledge:
                    f.write(
                        json.dumps(
                            {
                                "text": chunk.text,
                                "source_url": chunk.source_url,
                                "task_id": g.id,
                            },
                            ensure_ascii=False,
                        )
                    )
                    f.write("\n")
        categories: dict[str, list[str]] = {}
        for g in graphs:
            for tag in g.tags or [g.domain]:
                categories.setdefault(tag, []).append(g.id)
        with open(out / "categories.json", "w", encoding="utf-8") as f:
            json.dump(
                {tag: sorted(ids) for tag, ids in sorted(categories.items())},
                f,
                ensure_ascii=False,
                indent=2,
                sort_keys=True,
            )
        with open(out / "report.json", "w", encoding="utf-8") as f:
            json.dump(
                {**report.counts(), "diagnostics": report.diagnostics},
                f,
                ensure_ascii=False,
                indent=2,
            )
    except OSError as e:
        # leave a partial-output marker so downstream loaders refuse the dir
        try:
            (out / "report.json").write_text(
                json.dumps({**report.counts(), "partial": True, "error": str(e)}),
                encoding="utf-8",
            )
        except OSError:
            pass
        raise
    return report

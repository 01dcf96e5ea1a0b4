"""Lexical search over tasks and knowledge: inverted index with BM25 ranking.

One mechanism serves two corpora: task graphs (title + body fields, title
double-weighted) and knowledge chunks. Also hosts vague-query detection and
theme trajectories built by grouping similar queries from a search log.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .taskgraph import KnowledgeChunk, TaskGraph

K1 = 1.2
B = 0.75
TITLE_WEIGHT = 2
VAGUE_DF_RATIO = 0.3

# 30 fixed English function words; single-character tokens are dropped anyway.
STOPWORDS = frozenset(
    """the an and or but of to in on at for with by from as is are was were be
    been it its this that do does you your we""".split()
)

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def _fold_ascii(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def tokenize(text: str) -> list[str]:
    """Lowercased, diacritic-folded word tokens minus stopwords and 1-char tokens."""
    tokens = []
    for raw in _WORD_RE.findall(_fold_ascii(text.lower())):
        if len(raw) < 2 or raw in STOPWORDS:
            continue
        tokens.append(raw)
    return tokens


@dataclass(frozen=True)
class Document:
    """A unit of indexable text; title tokens count double."""

    doc_id: str
    title: str
    body: str


def task_document(g: TaskGraph) -> Document:
    body_parts = [" ".join(g.tags)]
    body_parts += [r.name for r in g.requirements]
    body_parts += [s.text for s in g.steps]
    body_parts += [k.text for k in g.knowledge]
    return Document(doc_id=g.id, title=g.title, body=" ".join(p for p in body_parts if p))


def chunk_documents(chunks: Iterable[KnowledgeChunk]) -> list[Document]:
    return [
        Document(doc_id=str(i), title="", body=c.text) for i, c in enumerate(chunks)
    ]


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    doc_count: int = 0
    avg_doc_length: float = 0.0
    title_weight: float = float(TITLE_WEIGHT)
    body_weight: float = 1.0


def build_index(docs: Iterable[Document]) -> InvertedIndex:
    """Index a corpus; title term frequencies are duplicated by the title weight."""
    idx = InvertedIndex()
    total_length = 0
    for doc in docs:
        if doc.doc_id in idx.doc_lengths:
            raise ValueError(f"duplicate doc id {doc.doc_id!r}")
        title_tokens = tokenize(doc.title)
        body_tokens = tokenize(doc.body)
        counts: Counter[str] = Counter()
        for t in title_tokens:
            counts[t] += TITLE_WEIGHT
        for t in body_tokens:
            counts[t] += 1
        length = TITLE_WEIGHT * len(title_tokens) + len(body_tokens)
        idx.doc_lengths[doc.doc_id] = length
        total_length += length
        for term, tf in counts.items():
            idx.postings.setdefault(term, []).append((doc.doc_id, tf))
    idx.doc_count = len(idx.doc_lengths)
    idx.avg_doc_length = total_length / idx.doc_count if idx.doc_count else 0.0
    return idx


def idf(idx: InvertedIndex, term: str) -> float:
    df = len(idx.postings.get(term, ()))
    return math.log(1.0 + (idx.doc_count - df + 0.5) / (df + 0.5))


def search(idx: InvertedIndex, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k BM25 hits, zero-score docs excluded, ties broken by ascending doc id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if idx.doc_count == 0:
        return []
    scores: dict[str, float] = {}
    for term in tokenize(query):
        postings = idx.postings.get(term)
        if not postings:
            continue
        term_idf = idf(idx, term)
        for doc_id, tf in postings:
            dl = idx.doc_lengths[doc_id]
            denom = tf + K1 * (1.0 - B + B * dl / idx.avg_doc_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + term_idf * tf * (K1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def is_vague(query: str, idx: InvertedIndex) -> bool:
    """A query too thin to rank on: <= 1 token, or only very common terms."""
    tokens = tokenize(query)
    if len(tokens) <= 1:
        return True
    if idx.doc_count == 0:
        return True
    return all(
        len(idx.postings.get(t, ())) / idx.doc_count > VAGUE_DF_RATIO for t in tokens
    )


# ---------------------------------------------------------------------------
# Theme trajectories from query logs


@dataclass
class Trajectory:
    theme_label: str
    member_queries: list[str]
    elicitation_prompt: str
    candidate_task_ids: list[str]


def _token_overlap(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def build_trajectories(
    query_log: list[str], idx: InvertedIndex, similarity_threshold: float = 0.5
) -> list[Trajectory]:
    """Greedily group similar queries into themes for preference elicitation.

    Queries join the first cluster whose seed shares >= threshold of the
    smaller token set. A cluster needs >= 2 log entries (repeats count, but
    stored members are deduplicated) and at least one retrievable task to
    become a trajectory.
    """
    clusters: list[list] = []  # [seed_tokens, members, raw_count]
    for query in query_log:
        tokens = frozenset(tokenize(query))
        if not tokens:
            continue
        for cluster in clusters:
            if _token_overlap(tokens, cluster[0]) >= similarity_threshold:
                if query not in cluster[1]:
                    cluster[1].append(query)
                cluster[2] += 1
                break
        else:
            clusters.append([tokens, [query], 1])

    trajectories = []
    for _, members, raw_count in clusters:
        if raw_count < 2:
            continue
        counts: Counter[str] = Counter()
        for q in members:
            counts.update(tokenize(q))
        # most frequent token wins; alphabetical tie-break keeps it stable
        label = min(counts, key=lambda t: (-counts[t], t))
        candidate_ids: list[str] = []
        for q in members:
            for doc_id, _score in search(idx, q, 3):
                if doc_id not in candidate_ids:
                    candidate_ids.append(doc_id)
        if not candidate_ids:
            continue
        trajectories.append(
            Trajectory(
                theme_label=label,
                member_queries=members,
                elicitation_prompt=(
                    f"It sounds like you're interested in {label}. "
                    f"Want me to show a few {label} tasks, or can you tell me more?"
                ),
                candidate_task_ids=candidate_ids,
            )
        )
    return trajectories


# ---------------------------------------------------------------------------
# Persistence


def save_index(idx: InvertedIndex, path) -> None:
    payload = {
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in idx.postings.items()},
        "doc_lengths": idx.doc_lengths,
        "doc_count": idx.doc_count,
        "avg_doc_length": idx.avg_doc_length,
        "title_weight": idx.title_weight,
        "body_weight": idx.body_weight,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True)


def load_index(path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return InvertedIndex(
        postings={
            t: [(d, int(tf)) for d, tf in plist]
            for t, plist in payload["postings"].items()
        },
        doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
        doc_count=int(payload["doc_count"]),
        avg_doc_length=float(payload["avg_doc_length"]),
        title_weight=float(payload.get("title_weight", TITLE_WEIGHT)),
        body_weight=float(payload.get("body_weight", 1.0)),
    )


def save_trajectories(trajectories: list[Trajectory], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in trajectories:
            f.write(
                json.dumps(
                    {
                        "theme_label": t.theme_label,
                        "member_queries": t.member_queries,
                        "elicitation_prompt": t.elicitation_prompt,
                        "candidate_task_ids": t.candidate_task_ids,
                    },
                    ensure_ascii=False,
                )
            )
            f.write("\n")


def load_trajectories(path) -> list[Trajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                Trajectory(
                    theme_label=obj["theme_label"],
                    member_queries=list(obj["member_queries"]),
                    elicitation_prompt=obj["elicitation_prompt"],
                    candidate_task_ids=list(obj["candidate_task_ids"]),
                )
            )
    return out

"""Loaded corpus artifacts: tasks, knowledge, and their search indices.

This is the online system's read-only view of what the offline pipeline
produced. Indices are built once at load time; a rebuild produces a whole
new corpus object that callers swap in atomically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .retrieval import (
    Document,
    InvertedIndex,
    Trajectory,
    build_index,
    chunk_documents,
    load_trajectories,
    search,
    task_document,
)
from .taskgraph import KnowledgeChunk, TaskGraph, read_corpus


@dataclass
class TaskCorpus:
    tasks: dict[str, TaskGraph] = field(default_factory=dict)
    index: InvertedIndex = field(default_factory=InvertedIndex)
    knowledge: list[KnowledgeChunk] = field(default_factory=list)
    knowledge_index: InvertedIndex = field(default_factory=InvertedIndex)
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def doc_count(self) -> int:
        return len(self.tasks)

    def get(self, task_id: str) -> Optional[TaskGraph]:
        return self.tasks.get(task_id)

    def search_tasks(self, query: str, k: int) -> list[str]:
        return [doc_id for doc_id, _ in search(self.index, query, k)]

    def search_knowledge(self, query: str, k: int) -> list[KnowledgeChunk]:
        hits = search(self.knowledge_index, query, k)
        return [self.knowledge[int(doc_id)] for doc_id, _ in hits]


def corpus_from_graphs(
    graphs: list[TaskGraph],
    knowledge: Optional[list[KnowledgeChunk]] = None,
    trajectories: Optional[list[Trajectory]] = None,
) -> TaskCorpus:
    if knowledge is None:
        knowledge = [chunk for g in graphs for chunk in g.knowledge]
    return TaskCorpus(
        tasks={g.id: g for g in graphs},
        index=build_index(task_document(g) for g in graphs),
        knowledge=knowledge,
        knowledge_index=build_index(chunk_documents(knowledge)),
        trajectories=trajectories or [],
    )


def load_corpus(corpus_dir) -> TaskCorpus:
    """Load pipeline output: tasks.jsonl plus optional knowledge/trajectories."""
    directory = Path(corpus_dir)
    graphs = read_corpus(directory / "tasks.jsonl")
    knowledge = None
    knowledge_path = directory / "knowledge.jsonl"
    if knowledge_path.exists():
        knowledge = []
        with open(knowledge_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    obj = json.loads(line)
                    knowledge.append(
                        KnowledgeChunk(
                            text=obj["text"], source_url=obj.get("source_url", "")
                        )
                    )
    trajectories_path = directory / "trajectories.jsonl"
    trajectories = (
        load_trajectories(trajectories_path) if trajectories_path.exists() else None
    )
    return corpus_from_graphs(graphs, knowledge=knowledge, trajectories=trajectories)

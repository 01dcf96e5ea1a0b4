"""Command line entry points: serve, ingest, search, replay, eval-ndp."""

from __future__ import annotations

import json
import os
from pathlib import Path

import click

from .corpus import load_corpus
from .decision import decide_pattern, decide_remote, evaluate, load_dataset
from .gateway import Gateway, HttpBackend, default_mock
from .ingestion import (
    llm_augmenter,
    load_documents,
    media_augmenter,
    run_pipeline,
    spoken_augmenter,
)
from .retrieval import build_trajectories, save_trajectories, search as index_search


def _gateway_from_flags(backend: str | None, base_url: str | None) -> Gateway:
    backend = backend or os.environ.get("GATEWAY_BACKEND", "mock")
    timeout_ms = int(os.environ.get("GATEWAY_TIMEOUT_MS", "5000"))
    if backend == "http":
        base_url = base_url or os.environ.get("GATEWAY_BASE_URL", "")
        if not base_url:
            raise click.UsageError("http gateway needs --base-url or GATEWAY_BASE_URL")
        return Gateway(backend=HttpBackend(base_url), default_timeout_ms=timeout_ms)
    return Gateway(backend=default_mock(), default_timeout_ms=timeout_ms)


@click.group()
def main():
    """Task assistant: offline corpus tools and the online session service."""


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--gateway", "gateway_backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--base-url", default=None, help="TGI-compatible endpoint for --gateway http")
@click.option("--decision", type=click.Choice(["pattern", "remote"]), default="pattern", show_default=True)
@click.option("--logs", "logs_dir", default="logs", show_default=True)
def serve(corpus_dir, port, host, gateway_backend, base_url, decision, logs_dir):
    """Run the session service over a corpus directory."""
    import uvicorn

    from .service import Engine, create_app
    from .store import SessionStore

    corpus = load_corpus(corpus_dir)
    engine = Engine(
        corpus=corpus,
        gateway=_gateway_from_flags(gateway_backend, base_url),
        store=SessionStore(logs_dir),
        decision_backend=decision,
    )
    click.echo(f"serving {corpus.doc_count} tasks on {host}:{port}")
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")


@main.command()
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--augmenters", default="spoken", show_default=True, help="comma list: spoken,media,llm")
@click.option("--gateway", "gateway_backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--base-url", default=None)
def ingest(input_dir, out_dir, augmenters, gateway_backend, base_url):
    """Parse saved pages into the corpus artifacts."""
    docs = load_documents(input_dir)
    selected = []
    for name in [a.strip() for a in augmenters.split(",") if a.strip()]:
        if name == "spoken":
            selected.append(spoken_augmenter())
        elif name == "media":
            selected.append(media_augmenter({d.url: d for d in docs}))
        elif name == "llm":
            selected.append(llm_augmenter(_gateway_from_flags(gateway_backend, base_url)))
        else:
            raise click.UsageError(f"unknown augmenter {name!r}")
    report = run_pipeline(docs, selected, out_dir)
    click.echo(json.dumps(report.counts(), indent=2))


@main.command(name="eval-ndp")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--backend", type=click.Choice(["pattern", "remote"]), default="pattern", show_default=True)
@click.option("--gateway", "gateway_backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--base-url", default=None)
def eval_ndp(dataset, backend, gateway_backend, base_url):
    """Score a decision backend against an annotated dataset."""
    if backend == "remote":
        gw = _gateway_from_flags(gateway_backend, base_url)
        decide = lambda ctx: decide_remote(ctx, gw)  # noqa: E731
    else:
        decide = decide_pattern
    report = evaluate(load_dataset(dataset), decide)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command()
@click.argument("session_log", type=click.Path(exists=True))
def replay(session_log):
    """Pretty-print a recorded conversation from its JSONL log."""
    with open(session_log, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("event") != "turn":
                continue
            turn = record["turn"]
            click.echo(click.style(f"user> {turn['user_utterance']}", fg="cyan"))
            click.echo(
                click.style(
                    f"  [{turn['action_code']} -> {turn['policy']}]", fg="yellow"
                )
            )
            click.echo(f"assistant> {turn['system_response']}")
            options = turn["screen"].get("options") or []
            if options:
                click.echo(f"  chips: {', '.join(options)}")
            click.echo()


@main.command()
@click.argument("query")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("-k", default=5, show_default=True)
def search(query, corpus_dir, k):
    """One-shot index query against a corpus directory."""
    corpus = load_corpus(corpus_dir)
    hits = index_search(corpus.index, query, k)
    if not hits:
        click.echo("no results")
        return
    for doc_id, score in hits:
        task = corpus.get(doc_id)
        title = task.title if task else "?"
        click.echo(f"{score:8.4f}  {doc_id}  {title}")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", default="index.json", show_default=True)
def index(corpus_dir, out_file):
    """Build the task search index and persist it as a JSON file."""
    from .retrieval import save_index

    corpus = load_corpus(corpus_dir)
    save_index(corpus.index, out_file)
    click.echo(f"indexed {corpus.doc_count} tasks into {out_file}")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--queries", "queries_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", default="trajectories.jsonl", show_default=True)
def trajectories(corpus_dir, queries_file, out_file):
    """Cluster a query log into theme trajectories for vague-search guidance."""
    corpus = load_corpus(corpus_dir)
    queries = [
        line.strip()
        for line in Path(queries_file).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    built = build_trajectories(queries, corpus.index)
    save_trajectories(built, out_file)
    click.echo(f"wrote {len(built)} trajectories to {out_file}")


if __name__ == "__main__":
    main()

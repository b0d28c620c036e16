"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 stage failure, 4 backend
unreachable.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .backends import BackendUnreachable
from .graph import FoodGraph, GraphError
from .graphrag import (
    GraphRagError,
    QaPipeline,
    StaleIndexError,
    evaluate,
    load_fact_index,
    load_qa_set,
)
from .pipeline import (
    ConfigError,
    RunConfig,
    StageError,
    load_config,
    make_chat_backend,
    make_embedder,
    make_prompt_pack,
    run_pipeline,
    stage_build,
    stage_enrich,
    stage_index,
    stage_ingest,
    stage_match,
)
from .report import write_eval_report, write_stats_report

EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_BACKEND = 4


def _with_exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except BackendUnreachable as exc:
            click.echo(f"backend unreachable: {exc}", err=True)
            sys.exit(EXIT_BACKEND)
        except (StageError, StaleIndexError, GraphRagError, GraphError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_STAGE)

    return wrapper


@click.group()
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(path_type=Path),
    help="Path to the JSON run config.",
)
@click.option("--mock", is_flag=True, help="Force mock backends (offline mode).")
@click.pass_context
def main(ctx: click.Context, config_path: Path, mock: bool) -> None:
    """Build a food knowledge graph and answer questions over it."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["mock"] = mock


def _config(ctx: click.Context) -> RunConfig:
    return load_config(ctx.obj["config_path"], mock_override=ctx.obj["mock"])


def _echo_counts(counts: dict, prefix: str = "") -> None:
    for key, value in counts.items():
        click.echo(f"{prefix}{key}: {value}")


@main.command()
@click.pass_context
@_with_exit_codes
def ingest(ctx: click.Context) -> None:
    """Parse, validate and dedupe the recipe corpus."""
    _echo_counts(stage_ingest(_config(ctx)))


@main.command()
@click.pass_context
@_with_exit_codes
def enrich(ctx: click.Context) -> None:
    """Run LLM enrichment (translate, split, label, tag)."""
    _echo_counts(stage_enrich(_config(ctx)))


@main.command("build-graph")
@click.pass_context
@_with_exit_codes
def build_graph_cmd(ctx: click.Context) -> None:
    """Resolve nutrients/GI, build the graph, and write the snapshot."""
    cfg = _config(ctx)
    _echo_counts(stage_match(cfg))
    _echo_counts(stage_build(cfg))


@main.command("embed-index")
@click.pass_context
@_with_exit_codes
def embed_index(ctx: click.Context) -> None:
    """Embed all graph facts and persist the retrieval index."""
    _echo_counts(stage_index(_config(ctx)))


@main.command()
@click.pass_context
@_with_exit_codes
def run(ctx: click.Context) -> None:
    """Run every pipeline stage in order."""
    cfg = _config(ctx)
    report = run_pipeline(cfg)
    for stage, counts in report.items():
        if isinstance(counts, dict) and stage != "prompt_checksums":
            click.echo(f"[{stage}]")
            _echo_counts(counts, prefix="  ")
    click.echo(f"snapshot: {cfg.snapshot}")
    click.echo(f"index: {cfg.index}")


def _make_pipeline(cfg: RunConfig) -> tuple[FoodGraph, QaPipeline]:
    graph = FoodGraph.import_snapshot(cfg.snapshot)
    embedder = make_embedder(cfg)
    index = load_fact_index(cfg.index, expected_model_tag=embedder.model)
    pipeline = QaPipeline(
        graph=graph,
        index=index,
        chat=make_chat_backend(cfg),
        embedder=embedder,
        prompts=make_prompt_pack(cfg),
        config=cfg.generation,
        cutoff=cfg.cutoff,
        k=cfg.k,
    )
    return graph, pipeline


@main.command()
@click.argument("question")
@click.pass_context
@_with_exit_codes
def ask(ctx: click.Context, question: str) -> None:
    """Answer one question over the graph."""
    _, pipeline = _make_pipeline(_config(ctx))
    result = pipeline.ask(question)
    click.echo(result.answer)
    if result.zero_retrieval:
        click.echo("(zero-retrieval event: no fact cleared the cutoff)", err=True)
    elif result.facts:
        click.echo("\ncited facts:")
        for fact in result.facts:
            click.echo(f"  [{fact.score:.3f}] {fact.fact}")


@main.command("eval")
@click.option(
    "--qa",
    "qa_path",
    required=True,
    type=click.Path(path_type=Path, exists=True),
    help="QA set file (one JSON record per line).",
)
@click.option(
    "--report",
    "report_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Report file to write (default: <workdir>/eval_report.tsv).",
)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.pass_context
@_with_exit_codes
def eval_cmd(
    ctx: click.Context, qa_path: Path, report_path: Path | None, figures: bool
) -> None:
    """Evaluate QA containment accuracy over a question set."""
    cfg = _config(ctx)
    _, pipeline = _make_pipeline(cfg)
    items = load_qa_set(qa_path)
    report = evaluate(items, pipeline)
    out = report_path or cfg.artifact("eval_report.tsv")
    out.parent.mkdir(parents=True, exist_ok=True)
    written = write_eval_report(report, out, figure=figures)
    click.echo(f"accuracy: {report.accuracy:.4f} (n={report.n})")
    click.echo(f"zero-retrieval questions: {report.zero_retrieval_count}")
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
@_with_exit_codes
def serve(ctx: click.Context, port: int, host: str) -> None:
    """Serve the read-only HTTP API over the snapshot and index."""
    import uvicorn

    from .service import create_app

    cfg = _config(ctx)
    graph, pipeline = _make_pipeline(cfg)
    app = create_app(graph, pipeline)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option(
    "--report",
    "report_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Report file to write (default: <workdir>/graph_stats.tsv).",
)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.pass_context
@_with_exit_codes
def stats(ctx: click.Context, report_path: Path | None, figures: bool) -> None:
    """Print and write node/edge distribution statistics."""
    cfg = _config(ctx)
    graph = FoodGraph.import_snapshot(cfg.snapshot)
    graph_stats = graph.stats()
    for kind, count in graph_stats.nodes.items():
        click.echo(f"{kind.value}: {count}")
    click.echo(f"total nodes: {graph_stats.total_nodes}")
    click.echo(f"total edges: {graph_stats.total_edges}")
    out = report_path or cfg.artifact("graph_stats.tsv")
    out.parent.mkdir(parents=True, exist_ok=True)
    for path in write_stats_report(graph_stats, out, figure=figures):
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()

"""Writers for evaluation and graph-statistics reports.

Each writer produces a tab-separated text file with a stable column order
(diff-friendly) and, unless disabled, a rendered PNG figure next to it with
the same stem.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .graph import GraphStats
from .graphrag import EvalReport
from .metrics import MetricReport


def _figure_path(path: Path) -> Path:
    return path.with_suffix(".png")


def write_metric_report(
    report: MetricReport, path: str | Path, figure: bool = True
) -> list[Path]:
    """Per-item scores as TSV plus a score chart; returns the written paths."""
    path = Path(path)
    lines = ["id\tscore\tflags"]
    for item in report.items:
        lines.append(f"{item.id}\t{item.score:.4f}\t{','.join(item.flags)}")
    lines.append(f"aggregate\t{report.aggregate:.4f}\tn={report.n}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written = [path]

    if figure and report.items:
        fig, ax = plt.subplots(figsize=(8, 4.5))
        scores = [item.score for item in report.items]
        if len(scores) <= 40:
            ax.bar(range(len(scores)), scores, color="#4c72b0")
            ax.set_xticks(range(len(scores)))
            ax.set_xticklabels(
                [item.id for item in report.items], rotation=90, fontsize=6
            )
            ax.set_xlabel("item")
        else:
            ax.hist(scores, bins=20, color="#4c72b0")
            ax.set_xlabel("score")
            ax.set_ylabel("items")
        ax.axhline(report.aggregate, color="#c44e52", linestyle="--", label="mean")
        ax.set_title(f"{report.task} (n={report.n}, mean={report.aggregate:.4f})")
        ax.set_ylim(0, 1.05)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig_path = _figure_path(path)
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_eval_report(
    report: EvalReport, path: str | Path, figure: bool = True
) -> list[Path]:
    """QA evaluation rows as TSV plus a hit/miss chart."""
    path = Path(path)
    lines = ["qid\thit\tzero_retrieval\tfact_count\tanswer_hash\tquestion"]
    for row in report.rows:
        lines.append(
            f"{row.qid}\t{int(row.hit)}\t{int(row.zero_retrieval)}\t"
            f"{row.fact_count}\t{row.answer_hash}\t{row.question}"
        )
    lines.append(
        f"aggregate\taccuracy={report.accuracy:.4f}\t"
        f"zero_retrieval={report.zero_retrieval_count}\tn={report.n}\t\t"
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written = [path]

    if figure and report.rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        hits = sum(r.hit for r in report.rows)
        misses = report.n - hits
        zero = report.zero_retrieval_count
        bars = ax.bar(
            ["hit", "miss", "zero-retrieval"],
            [hits, misses, zero],
            color=["#55a868", "#c44e52", "#8172b2"],
        )
        ax.bar_label(bars)
        ax.set_ylabel("questions")
        ax.set_title(f"QA containment accuracy {report.accuracy:.2f} (n={report.n})")
        fig.tight_layout()
        fig_path = _figure_path(path)
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_stats_report(
    stats: GraphStats, path: str | Path, figure: bool = True
) -> list[Path]:
    """Node and edge distributions as TSV plus two bar charts."""
    path = Path(path)
    lines = ["section\tlabel\tcount"]
    for kind, count in stats.nodes.items():
        lines.append(f"nodes\t{kind.value}\t{count}")
    for (src, kind, dst), count in stats.edges.items():
        lines.append(f"edges\t{src.value} {kind.value} {dst.value}\t{count}")
    lines.append(f"total\tnodes\t{stats.total_nodes}")
    lines.append(f"total\tedges\t{stats.total_edges}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written = [path]

    if figure:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 5))
        node_items = sorted(stats.nodes.items(), key=lambda kv: kv[1])
        ax1.barh(
            [k.value for k, _ in node_items],
            [v for _, v in node_items],
            color="#4c72b0",
        )
        ax1.set_title(f"nodes per kind (total {stats.total_nodes})")
        edge_items = sorted(stats.edges.items(), key=lambda kv: kv[1])
        ax2.barh(
            [f"{s.value}→{k.value}→{d.value}" for (s, k, d), _ in edge_items],
            [v for _, v in edge_items],
            color="#55a868",
        )
        ax2.set_title(f"edges per relationship (total {stats.total_edges})")
        ax2.tick_params(axis="y", labelsize=7)
        fig.tight_layout()
        fig_path = _figure_path(path)
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written.append(fig_path)
    return written

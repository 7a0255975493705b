"""Aligned-column reports, their JSON twins, and figure rendering.

Text tables mirror the precision/recall/F1 ablation layout (values in
percent); JSON keeps raw fractions. Figures are rendered headless to files
next to the delimited output.
"""

from __future__ import annotations

import json
import logging
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import MetricReport  # noqa: E402

logger = logging.getLogger(__name__)

_METRIC_COLUMNS = ("hits@1", "precision", "recall", "f1")


def config_header(config: Mapping[str, object]) -> str:
    """`#`-prefixed effective-config lines for text and TSV outputs."""
    lines = [f"# {key} = {config[key]}" for key in sorted(config)]
    return "\n".join(lines) + ("\n" if lines else "")


def metric_table(rows: Sequence[tuple[str, MetricReport]]) -> str:
    """Aligned columns: method, hits@1, precision, recall, F1 (percent)."""
    label_width = max([len("method")] + [len(label) for label, _ in rows])
    header = (f"{'method':<{label_width}}  "
              + "  ".join(f"{col:>9}" for col in _METRIC_COLUMNS))
    lines = [header]
    for label, report in rows:
        values = (report.hits_at_1, report.precision, report.recall, report.f1)
        cells = "  ".join(f"{100 * v:>9.2f}" for v in values)
        lines.append(f"{label:<{label_width}}  {cells}")
    lines.append("")
    lines.append("values are percentages; averaging = "
                 + (rows[0][1].averaging if rows else "macro"))
    return "\n".join(lines) + "\n"


def breakdown_table(title: str, buckets: Mapping[str, Mapping[str, float]]) -> str:
    label_width = max([len(title)] + [len(b) for b in buckets])
    header = (f"{title:<{label_width}}  {'n':>6}  "
              + "  ".join(f"{col:>9}" for col in _METRIC_COLUMNS))
    lines = [header]
    for bucket, row in buckets.items():
        cells = "  ".join(
            f"{100 * row[key]:>9.2f}"
            for key in ("hits_at_1", "precision", "recall", "f1")
        )
        lines.append(f"{bucket:<{label_width}}  {row['n']:>6}  {cells}")
    return "\n".join(lines) + "\n"


def eval_report_text(report: MetricReport, label: str = "model") -> str:
    parts = [metric_table([(label, report)])]
    if report.by_hops:
        parts.append("")
        parts.append(breakdown_table("hops", report.by_hops))
    if report.by_answer_count:
        parts.append("")
        parts.append(breakdown_table("answers", report.by_answer_count))
    if report.diagnostics:
        parts.append("")
        diag = "  ".join(f"{k}={v}" for k, v in sorted(report.diagnostics.items()))
        parts.append(f"diagnostics: {diag}\n")
    return "\n".join(parts)


def profile_table(profile: Sequence[Mapping[str, float]]) -> str:
    """TSV: one row per K with mean path count, mean seconds, coverage."""
    lines = ["k\tmean_paths\tmean_seconds\tanswer_coverage"]
    for row in profile:
        lines.append(
            f"{row['k']}\t{row['mean_paths']:.4f}\t"
            f"{row['mean_seconds']:.6f}\t{row['answer_coverage']:.4f}"
        )
    return "\n".join(lines) + "\n"


def save_profile_figure(profile: Sequence[Mapping[str, float]], path: str) -> None:
    """Bars: mean retrieved paths per K; line: answer coverage; panel 2: time."""
    ks = [row["k"] for row in profile]
    fig, (ax_top, ax_time) = plt.subplots(
        2, 1, figsize=(6.4, 6.0), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]},
    )
    ax_top.bar(ks, [row["mean_paths"] for row in profile],
               color="#7fbf7f", label="mean retrieved paths")
    ax_top.set_ylabel("mean retrieved paths")
    ax_cov = ax_top.twinx()
    ax_cov.plot(ks, [row["answer_coverage"] for row in profile],
                "o-", color="#1f77b4", label="answer coverage")
    ax_cov.set_ylabel("answer coverage")
    ax_cov.set_ylim(0.0, 1.05)
    handles1, labels1 = ax_top.get_legend_handles_labels()
    handles2, labels2 = ax_cov.get_legend_handles_labels()
    ax_top.legend(handles1 + handles2, labels1 + labels2, loc="lower right")

    ax_time.plot(ks, [row["mean_seconds"] for row in profile], "s-", color="#d62728")
    ax_time.set_xlabel("top-K relation paths")
    ax_time.set_ylabel("mean retrieval seconds")
    ax_time.set_xticks(ks)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.debug("wrote %s", path)


def save_metrics_figure(rows: Sequence[tuple[str, MetricReport]], path: str) -> None:
    """Grouped bars of hits@1/precision/recall/F1 per method."""
    labels = [label for label, _ in rows]
    series = {
        "hits@1": [r.hits_at_1 for _, r in rows],
        "precision": [r.precision for _, r in rows],
        "recall": [r.recall for _, r in rows],
        "f1": [r.f1 for _, r in rows],
    }
    x = range(len(labels))
    width = 0.2
    fig, ax = plt.subplots(figsize=(max(6.4, 1.6 * len(labels)), 4.2))
    for i, (name, values) in enumerate(series.items()):
        offset = (i - 1.5) * width
        ax.bar([xi + offset for xi in x], values, width, label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(ncol=2, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.debug("wrote %s", path)


def save_breakdown_figure(report: MetricReport, path: str) -> None:
    """F1 per hop bucket and per answer-count bucket, two panels."""
    panels = []
    if report.by_hops:
        panels.append(("hops", report.by_hops))
    if report.by_answer_count:
        panels.append(("answers per question", report.by_answer_count))
    if not panels:
        panels = [("overall", {"all": {
            "n": report.n_questions, "f1": report.f1,
            "hits_at_1": report.hits_at_1,
            "precision": report.precision, "recall": report.recall,
        }})]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.8 * len(panels), 3.6))
    if len(panels) == 1:
        axes = [axes]
    for ax, (title, buckets) in zip(axes, panels):
        names = list(buckets)
        ax.bar(names, [buckets[b]["f1"] for b in names], color="#1f77b4")
        ax.set_title(f"F1 by {title}")
        ax.set_ylim(0.0, 1.05)
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.debug("wrote %s", path)


def metrics_json(rows: Sequence[tuple[str, MetricReport]],
                 config: Mapping[str, object] | None = None) -> str:
    payload: dict = {"modes": {label: report.to_dict() for label, report in rows}}
    if config is not None:
        payload["config"] = dict(config)
    return json.dumps(payload, indent=2) + "\n"

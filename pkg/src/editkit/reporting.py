"""Score-report rendering: wide CSV, aligned text tables, and bar-chart figures.

Systems are rows, (dataset, metric) pairs are columns, plus an Overall mean
column. The Overall aggregation is rule-driven: paraphrase identity datasets
are excluded, multi-metric datasets contribute the mean of their metrics,
and lower-is-better Self-BLEU values enter as (100 - value).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import ScoreReport, ScoreRow


class SuiteMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class AggregationRules:
    excluded_datasets: tuple[str, ...] = ("mrpc", "sts", "qqp")
    inverted_metrics: tuple[str, ...] = ("self_bleu", "self_bleu_source")
    column_name: str = "overall"


DEFAULT_RULES = AggregationRules()


def _shared_keys(reports: Sequence[ScoreReport]) -> list[tuple[str, str]]:
    if not reports:
        raise SuiteMismatchError("no reports to render")
    keys = [(r.dataset_id, r.metric_name) for r in reports[0].rows]
    for report in reports[1:]:
        other = [(r.dataset_id, r.metric_name) for r in report.rows]
        if set(other) != set(keys):
            raise SuiteMismatchError(
                f"report {report.system_id!r} covers a different suite than "
                f"{reports[0].system_id!r}"
            )
    return keys


def overall_score(report: ScoreReport, rules: AggregationRules = DEFAULT_RULES) -> float | None:
    """Mean over non-excluded datasets of the per-dataset metric mean."""
    per_dataset: dict[str, list[float]] = {}
    for row in report.rows:
        if row.dataset_id in rules.excluded_datasets:
            continue
        if row.value is None:
            return None
        value = 100.0 - row.value if row.metric_name in rules.inverted_metrics else row.value
        per_dataset.setdefault(row.dataset_id, []).append(value)
    if not per_dataset:
        return None
    means = [sum(vs) / len(vs) for vs in per_dataset.values()]
    return sum(means) / len(means)


def _cell(value: float | None) -> str:
    return "" if value is None else repr(value)


def render_csv(reports: Sequence[ScoreReport], rules: AggregationRules = DEFAULT_RULES) -> str:
    keys = _shared_keys(reports)
    header = ["system"] + [f"{d}:{m}" for d, m in keys] + [rules.column_name]
    lines = [",".join(header)]
    for report in reports:
        cells = [report.system_id]
        for d, m in keys:
            cells.append(_cell(report.value(d, m)))
        cells.append(_cell(overall_score(report, rules)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> list[ScoreReport]:
    """Inverse of render_csv (the computed overall column is dropped)."""
    lines = [line for line in text.strip().split("\n") if line]
    header = lines[0].split(",")
    keys = []
    for col in header[1:-1]:
        dataset_id, metric = col.split(":", 1)
        keys.append((dataset_id, metric))
    reports = []
    for line in lines[1:]:
        cells = line.split(",")
        rows = tuple(
            ScoreRow(d, m, float(cells[i + 1]) if cells[i + 1] else None)
            for i, (d, m) in enumerate(keys)
        )
        reports.append(ScoreReport(system_id=cells[0], rows=rows))
    return reports


def render_text(reports: Sequence[ScoreReport], rules: AggregationRules = DEFAULT_RULES) -> str:
    keys = _shared_keys(reports)
    header = ["system"] + [f"{d}:{m}" for d, m in keys] + [rules.column_name]
    table = [header]
    for report in reports:
        cells = [report.system_id]
        for d, m in keys:
            value = report.value(d, m)
            cells.append("FAILED" if value is None else f"{value:.2f}")
        overall = overall_score(report, rules)
        cells.append("-" if overall is None else f"{overall:.2f}")
        table.append(cells)
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for r, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    return "\n".join(lines) + "\n"


def render_figures(
    reports: Sequence[ScoreReport],
    out_dir: str | Path,
    rules: AggregationRules = DEFAULT_RULES,
) -> list[Path]:
    """Grouped bar charts of the score table, one PNG per dataset plus an overview."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    keys = _shared_keys(reports)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    labels = [f"{d}\n{m}" for d, m in keys]
    x = range(len(keys))
    width = 0.8 / max(1, len(reports))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(keys)), 4.5))
    for si, report in enumerate(reports):
        values = [report.value(d, m) or 0.0 for d, m in keys]
        offset = (si - (len(reports) - 1) / 2) * width
        ax.bar([xi + offset for xi in x], values, width=width, label=report.system_id)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("score")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    ax.set_title("benchmark scores by system")
    fig.tight_layout()
    path = out / "scores.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    overalls = [(r.system_id, overall_score(r, rules)) for r in reports]
    overalls = [(s, v) for s, v in overalls if v is not None]
    if overalls:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.bar([s for s, _ in overalls], [v for _, v in overalls], color="tab:blue")
        ax.set_ylabel(rules.column_name)
        ax.set_title("overall score by system")
        fig.tight_layout()
        path = out / "overall.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_report(
    reports: Sequence[ScoreReport],
    out_dir: str | Path,
    figures: bool = True,
    rules: AggregationRules = DEFAULT_RULES,
) -> dict[str, Path]:
    """Render the delimited table (and figures) to files; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    csv_path = out / "report.csv"
    csv_path.write_text(render_csv(reports, rules), encoding="utf-8")
    written["csv"] = csv_path
    txt_path = out / "report.txt"
    txt_path.write_text(render_text(reports, rules), encoding="utf-8")
    written["txt"] = txt_path
    if figures:
        for i, fig_path in enumerate(render_figures(reports, out / "figures", rules)):
            written[f"figure_{i}"] = fig_path
    return written

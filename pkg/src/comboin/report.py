"""Tables and figures summarizing a simulation study's operating
characteristics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

COLUMNS = [
    "scenario", "config", "design", "pcs", "pas", "over_sel", "under_sel",
    "none_sel", "mean_n", "mean_dlt", "mean_pts_over_tox", "replications",
]

_NUMERIC = COLUMNS[3:]

METRICS = {
    "selection": ("Percent of trials", [("pcs", "correct selection"), ("pas", "acceptable selection")]),
    "overdose": ("Percent of trials", [("over_sel", "overly toxic selection")]),
    "sample_size": ("Patients per trial", [("mean_n", "patients treated")]),
    "dlt": ("DLTs per trial", [("mean_dlt", "DLTs observed")]),
}


@dataclass(frozen=True)
class StudyReport:
    rows: tuple[dict, ...]

    @classmethod
    def from_records(cls, records) -> "StudyReport":
        rows = []
        for rec in records:
            row = {k: rec.get(k) for k in COLUMNS}
            if row["scenario"] is None or row["pcs"] is None:
                raise ValueError(f"record missing required fields: {rec}")
            rows.append(row)
        if not rows:
            raise ValueError("report has no rows")
        return cls(tuple(rows))

    def configs(self) -> list[str]:
        seen = []
        for row in self.rows:
            key = row["config"] or row["design"]
            if key not in seen:
                seen.append(key)
        return seen

    def rows_for(self, config: str) -> list[dict]:
        return [r for r in self.rows if (r["config"] or r["design"]) == config]

    def mean_row(self, config: str) -> dict:
        rows = self.rows_for(config)
        out = {"scenario": "Mean", "config": config, "design": rows[0]["design"]}
        for col in _NUMERIC:
            out[col] = sum(float(r[col]) for r in rows) / len(rows)
        return out


def render_table(report: StudyReport) -> str:
    widths = {c: max(len(c), 10) for c in COLUMNS}
    out = io.StringIO()
    out.write("  ".join(f"{c:>{widths[c]}}" for c in COLUMNS) + "\n")

    def fmt(row):
        parts = []
        for c in COLUMNS:
            v = row[c]
            if c in _NUMERIC and c != "replications":
                parts.append(f"{float(v):>{widths[c]}.2f}")
            else:
                parts.append(f"{str(v):>{widths[c]}}")
        return "  ".join(parts) + "\n"

    for config in report.configs():
        for row in report.rows_for(config):
            out.write(fmt(row))
        mean = report.mean_row(config)
        mean["replications"] = report.rows_for(config)[0]["replications"]
        out.write(fmt(mean))
    return out.getvalue()


def render_csv(report: StudyReport) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=COLUMNS)
    writer.writeheader()
    for config in report.configs():
        for row in report.rows_for(config):
            writer.writerow(row)
        mean = report.mean_row(config)
        mean["replications"] = report.rows_for(config)[0]["replications"]
        writer.writerow(mean)
    return out.getvalue()


def render_figure(report: StudyReport, metric: str, out_path: str | Path) -> Path:
    """Grouped bar chart per scenario, with an overall-mean cluster at the end."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ylabel, series = METRICS[metric]
    configs = report.configs()
    scenarios = [r["scenario"] for r in report.rows_for(configs[0])]
    labels = scenarios + ["Mean"]
    x = range(len(labels))
    group_width = 0.8
    bar_width = group_width / len(configs)

    fig, ax = plt.subplots(figsize=(max(8.0, 0.85 * len(labels)), 4.5))
    colors = plt.cm.tab10.colors
    for k, config in enumerate(configs):
        rows = report.rows_for(config) + [report.mean_row(config)]
        offsets = [xi - group_width / 2 + (k + 0.5) * bar_width for xi in x]
        for column, series_label in series:
            values = [float(r[column]) for r in rows]
            alpha = 1.0 if column in ("pcs", "over_sel", "mean_n", "mean_dlt") else 0.45
            ax.bar(
                offsets,
                values,
                width=bar_width * 0.95,
                color=colors[k % len(colors)],
                alpha=alpha,
                label=f"{config} {series_label}",
            )
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path

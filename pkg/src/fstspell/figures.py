"""Render SER sweep figures from an evaluation report.

One panel per test set: SER against the contextual-entity count, one line
per method, baselines dashed.  Written as PNG files next to the delimited
report output.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

BASELINE_METHODS = {"nbest-1", "nbest-1000", "random-n"}

STYLE = {
    "nbest-1": dict(color="#2a9d2a", linestyle="--", marker="o"),
    "nbest-1000": dict(color="#1a6b1a", linestyle="--", marker="s"),
    "random-n": dict(color="#7fbf7f", linestyle="--", marker="^"),
    "wp": dict(color="#d62728", linestyle="-", marker="o"),
    "wp+logdet": dict(color="#ff7f0e", linestyle="-", marker="s"),
    "wp+logdet+compsc": dict(color="#e6b800", linestyle="-", marker="^"),
}


def _series(report: dict, key: str):
    by_method: dict[str, list[tuple[int, float]]] = {}
    for row in report["grid"]:
        by_method.setdefault(row["method"], []).append(
            (row["distractors"], row[key]))
    return {m: sorted(points) for m, points in by_method.items()}


def _plot(ax, series: dict, no_rewrite: float, title: str) -> None:
    for method, points in series.items():
        xs = [n for n, _ in points]
        ys = [s for _, s in points]
        ax.plot(xs, ys, label=method, **STYLE.get(method, {}))
    ax.axhline(no_rewrite, color="gray", linewidth=0.8, linestyle=":",
               label="no-rewrite")
    ax.set_title(title)
    ax.set_xlabel("contextual entities")
    ax.set_ylabel("SER")
    ax.set_ylim(bottom=0.0)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)


def render_ser_figures(report: dict, outdir: str | Path) -> list[Path]:
    """Write fig_in_context.png and fig_anti_context.png; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    panels = [
        ("in_context_ser", "in_context_ser", "In-context SER",
         "fig_in_context.png"),
        ("anti_context_ser", "anti_context_ser", "Anti-context SER",
         "fig_anti_context.png"),
    ]
    for key, base_key, title, filename in panels:
        fig, ax = plt.subplots(figsize=(5.2, 3.4), dpi=150)
        _plot(ax, _series(report, key), report["no_rewrite"][base_key], title)
        fig.tight_layout()
        path = outdir / filename
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written

"""Render metric curves from a MetricLog CSV to PNG files."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trainer import MetricLog  # noqa: E402


def render_metric_curves(log: MetricLog, out_dir: str | Path) -> list[Path]:
    """One figure per metric, iteration on the x axis. Returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for it, metric, value in log.rows:
        series[metric].append((it, value))
    written = []
    for metric, points in series.items():
        xs, ys = zip(*points)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(xs, ys, marker="o", markersize=3)
        ax.set_xlabel("iteration")
        ax.set_ylabel(metric)
        ax.set_title(metric)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{_safe(metric)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)

"""Mean relative regret vs T with +-1 stderr whiskers, as a self-contained SVG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_svg(summary: list[dict], path: str | Path) -> None:
    series: dict[str, list[dict]] = {}
    for s in summary:
        key = f"{s['algorithm']} {s['objective']} d={s['d']}" + (f" k={s['k']}" if s["k"] != "" else "")
        series.setdefault(key, []).append(s)
    with plt.rc_context({"svg.hashsalt": "pairbandit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for label, pts in series.items():
            pts = sorted(pts, key=lambda s: s["T"])
            ax.errorbar([p["T"] for p in pts], [p["mean"] for p in pts],
                        yerr=[p["stderr"] for p in pts], marker="o", ms=3, capsize=3, label=label)
        ax.set_xlabel("T")
        ax.set_ylabel("relative regret (%)")
        ax.grid(alpha=0.3)
        if len(series) <= 12:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)

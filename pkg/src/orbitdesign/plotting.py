"""Rendering of sweep results to figure files alongside the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

BOUND_COLUMNS = ("bound_thm1", "bound_thm2", "bound_thm3", "bound_lem4")
BOUND_STYLES = {
    "bound_thm1": ("tab:blue", "bipartite bound"),
    "bound_thm2": ("tab:green", "gluing bound"),
    "bound_thm3": ("tab:purple", "GHZ bound"),
    "bound_lem4": ("tab:orange", "coherence bound"),
}


def render_sweep_figure(rows: list[dict], path: str, title: str | None = None) -> None:
    """One figure per experiment: measured error vs sweep value, with the
    populated theoretical bound columns overlaid."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ts = sorted({row["t"] for row in rows})
    numeric_axis = all(isinstance(r.get("sweep_value"), (int, float)) for r in rows)
    for t in ts:
        sub = [r for r in rows if r["t"] == t]
        xs = [r["sweep_value"] if numeric_axis else i for i, r in enumerate(sub)]
        ax.plot(xs, [r["error"] for r in sub], "o-", color="k", label=f"error (t={t})")
        for col in BOUND_COLUMNS:
            ys = [r.get(col) for r in sub]
            if any(y is not None for y in ys):
                color, label = BOUND_STYLES[col]
                ax.plot(xs, ys, "--", color=color, label=f"{label} (t={t})")
    sweep_param = rows[0].get("sweep_param") or "point"
    ax.set_xlabel(sweep_param)
    ax.set_ylabel("trace distance to Haar moment")
    errors = [r["error"] for r in rows if r["error"] > 0]
    if errors and max(errors) / min(errors) > 10:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Figure rendering for reports: cost-function curves, assignment profiles,
and sweep outcomes, written as PNG files next to the delimited output.

Rendering is headless (Agg) and deterministic: fixed sizes, no timestamps,
content derived only from the data passed in.
"""

from __future__ import annotations

import math
from pathlib import Path

from .costfn import Params, eval_cost, second_derivative
from .minimizer import FractionalAssignment

__all__ = [
    "render_cost_figure",
    "render_assignment_figure",
    "render_sweep_figure",
]


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_cost_figure(params: Params, w: float, path: str | Path) -> Path:
    """Cost value and curvature over [w, 1]."""
    plt = _pyplot()
    xs = [w + (1.0 - w) * i / 400 for i in range(401)]
    values, curvatures, kept = [], [], []
    for x in xs:
        try:
            values.append(eval_cost(params, x))
            curvatures.append(second_derivative(params, x))
            kept.append(x)
        except ValueError:
            continue
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(kept, values, lw=1.2)
    top.axvline(w, color="gray", lw=0.8, ls="--")
    top.set_ylabel("cost f(x)")
    bottom.plot(kept, curvatures, lw=1.2, color="darkred")
    bottom.axhline(0.0, color="gray", lw=0.8)
    bottom.axvline(w, color="gray", lw=0.8, ls="--")
    bottom.set_ylabel("f''(x)")
    bottom.set_xlabel("x")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_assignment_figure(a: FractionalAssignment, w: float,
                             path: str | Path) -> Path:
    """Per-vertex values with the floor, ceiling, and dominance threshold."""
    plt = _pyplot()
    vertices = sorted(a.values)
    heights = [a.values[v] for v in vertices]
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.bar(vertices, heights, width=0.8, color="steelblue")
    ax.axhline(w, color="gray", lw=0.8, ls="--", label="floor w")
    ax.axhline((1.0 + w) / 2.0, color="darkorange", lw=1.0, ls="--",
               label="dominance threshold")
    ax.axhline(1.0, color="gray", lw=0.8)
    ax.set_xlabel("vertex")
    ax.set_ylabel("value")
    ax.set_ylim(0.0, 1.1)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sweep_figure(results, path: str | Path) -> Path:
    """Outcome per floor value: filled markers where an integer answer was
    recognized, open markers elsewhere."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 2.8))
    hits = [w for w, o in results if o.status == "integer-found"]
    misses = [w for w, o in results if o.status != "integer-found"]
    if misses:
        ax.plot(misses, [0] * len(misses), "o", mfc="none", color="gray",
                label="no integer answer")
    if hits:
        ax.plot(hits, [1] * len(hits), "o", color="forestgreen",
                label="integer answer")
    ax.set_yticks([0, 1])
    ax.set_yticklabels(["miss", "hit"])
    ax.set_ylim(-0.5, 1.5)
    ax.set_xlabel("floor value w")
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

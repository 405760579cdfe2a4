"""Learning-curve figures: mean over runs with the min-max band."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"qtlcd": "tab:blue", "qrm": "tab:orange"}
LABELS = {"qtlcd": "QTLCD (with TL-CD)", "qrm": "QRM (without TL-CD)"}


def plot_curves(curves: Mapping[str, Sequence[Sequence[tuple[int, float]]]], path: str | Path,
                title: str | None = None) -> Path:
    """Overlay one mean curve per algorithm, shading the range across runs.

    The output format follows the file suffix (svg, png, pdf).
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, runs in curves.items():
        n = min(len(c) for c in runs)
        if n == 0:
            continue
        steps = np.array([s for s, _ in runs[0][:n]])
        values = np.array([[r for _, r in c[:n]] for c in runs])
        color = COLORS.get(name)
        ax.plot(steps, values.mean(axis=0), color=color, label=LABELS.get(name, name), lw=1.5)
        ax.fill_between(steps, values.min(axis=0), values.max(axis=0), color=color, alpha=0.2, lw=0)
    ax.set_xlabel("training steps")
    ax.set_ylabel("mean evaluation reward")
    ax.set_ylim(-0.05, 1.05)
    ax.ticklabel_format(axis="x", style="sci", scilimits=(0, 4))
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    path = Path(path)
    # fixed hash salt and no date keep repeated SVG output identical
    plt.rcParams["svg.hashsalt"] = "tlcd-rl"
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path

"""Figure rendering for risk-curve outputs.

Renders to files only (Agg backend); the CSV next to each figure stays the
canonical, byte-stable output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_curve_figure"]


def render_curve_figure(ds, means, stderrs, n, path, title="estimated risk curve"):
    """Risk curve versus revealed dimension with 3-stderr error bars.

    Marks the interpolation threshold d = n when it falls inside the range.
    """
    ds = np.asarray(ds)
    means = np.asarray(means, dtype=float)
    stderrs = np.asarray(stderrs, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    ax.errorbar(
        ds,
        means,
        yerr=3.0 * stderrs,
        fmt="o-",
        ms=4,
        lw=1.2,
        capsize=3,
        color="#1f5fa8",
        ecolor="#9bb9d8",
    )
    if ds.size and ds.min() <= n <= ds.max():
        ax.axvline(n, color="#b0493a", ls="--", lw=1.0, label=f"d = n = {n}")
        ax.legend(loc="best", fontsize=9)
    ax.set_xlabel("revealed features d")
    ax.set_ylabel("estimated excess risk")
    ax.set_title(title, fontsize=11)
    ax.grid(alpha=0.3, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

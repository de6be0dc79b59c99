"""Optional SVG figures. Output carries no timestamp so reruns are byte-stable."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .info import LN2  # noqa: E402
from .rd import bsc_distortion_rate  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": "moegate", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return Path(path)


def plot_thm1(rows: Sequence, path: Path) -> Path:
    x = np.array([r.bound_term for r in rows])
    y = np.array([r.gap for r in rows])
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    top = max(float(x.max(initial=0.0)), float(y.max(initial=0.0)), 1e-3) * 1.05
    ax.plot([0, top], [0, top], "k--", lw=1, label="y = x")
    ax.plot(x, y, "o-", ms=4, label="empirical gap")
    ax.set_xlabel("sqrt(2 I(S;W) / m)")
    ax.set_ylabel("|E[R] - E[R_S]|")
    ax.legend(loc="upper left")
    fig.tight_layout()
    return _save(fig, path)


def plot_thm2(rows: Sequence, path: Path) -> Path:
    grid = np.linspace(0.0, LN2, 200)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(grid, [bsc_distortion_rate(r) for r in grid], "k-", lw=1, label="D(R)")
    rates = [r.mean_rate_nats for r in rows]
    ax.plot(rates, [r.mean_pop_risk for r in rows], "o", ms=4, label="E[R(W)]")
    ax.plot(rates, [r.mean_bound for r in rows], "^", ms=5, label="bound")
    ax.set_xlabel("gating rate (nats)")
    ax.set_ylabel("risk")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)

"""Figure rendering for the CLI report paths.

Figures are written next to the delimited outputs.  PNG metadata is
stripped so identical runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def control_chart(states, control_limit: float, path):
    """CUSUM value and standardized statistic over time, with the limit."""
    t = [s.t for s in states]
    w = [s.w for s in states]
    p = [s.p_tilde for s in states]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(t, w, marker="o", ms=3, color="tab:blue", label="CUSUM $W_t^+$")
    ax1.axhline(control_limit, color="tab:red", ls="--", label="control limit")
    alarms = [s.t for s in states if s.alarmed]
    if alarms:
        ax1.scatter(
            alarms,
            [w[a - t[0]] for a in alarms],
            color="tab:red",
            zorder=3,
            label="alarm",
        )
    ax1.set_ylabel("$W_t^+$")
    ax1.legend(loc="upper left", fontsize=8)
    ax2.plot(t, p, marker="o", ms=3, color="tab:gray")
    ax2.set_ylabel(r"$\tilde{P}_t^+$")
    ax2.set_xlabel("time")
    _save(fig, path)


def hotspot_map(h_slice: np.ndarray, t_star: int, path):
    """Heatmap of the positive hot-spot magnitudes at the alarm time."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(
        np.maximum(h_slice, 0.0).T, aspect="auto", cmap="Reds", origin="lower"
    )
    ax.set_xlabel("spatial unit")
    ax.set_ylabel("category")
    ax.set_title(f"positive hot-spot magnitudes at t = {t_star}")
    fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, path)


def delay_histogram(delays, path):
    """Distribution of detection delays over the replications."""
    delays = np.asarray(delays)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(delays, bins=np.arange(0.5, delays.max() + 1.5), color="tab:blue")
    ax.set_xlabel("detection delay")
    ax.set_ylabel("replications")
    _save(fig, path)

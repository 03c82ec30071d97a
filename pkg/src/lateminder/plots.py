"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Patch, Rectangle  # noqa: E402

from .clustering import RadiusSweep  # noqa: E402
from .schedule import MINUTES_PER_DAY, WEEKDAYS  # noqa: E402
from .viz import color_for  # noqa: E402

# PNG metadata would otherwise embed the matplotlib version
_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def plot_radius_sweep(sweep: RadiusSweep, path) -> None:
    """Cluster count against radius, raw and smoothed, with the knee marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(sweep.radii, sweep.raw_counts, marker=".", lw=0.8, color="0.6", label="raw")
    ax.plot(sweep.radii, sweep.smoothed_counts, lw=1.8, color="C0", label="smoothed")
    style = "--" if sweep.knee_found else ":"
    ax.axvline(sweep.chosen_radius, ls=style, color="C3", label=f"chosen {sweep.chosen_radius:g} m")
    ax.set_xlabel("radius (m)")
    ax.set_ylabel("clusters")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_schedule(grid: dict, path, segment_minutes: int = 30, labels: dict[int, str] | None = None) -> None:
    n_rows = MINUTES_PER_DAY // segment_minutes
    fig, ax = plt.subplots(figsize=(8.0, 9.0))
    seen = set()
    for (wd, seg), cell in sorted(grid.items()):
        x = float(wd)
        for loc, p in sorted(cell):
            ax.add_patch(Rectangle((x, seg), p, 1, color=color_for(loc), lw=0))
            x += p
            seen.add(loc)
    ax.set_xlim(0, 7)
    ax.set_ylim(n_rows, 0)
    ax.set_xticks([i + 0.5 for i in range(7)], WEEKDAYS)
    per_hour = 60 // segment_minutes if segment_minutes <= 60 else 1
    ticks = list(range(0, n_rows + 1, max(1, 2 * per_hour)))
    ax.set_yticks(ticks, [f"{t * segment_minutes // 60:02d}:00" for t in ticks])
    for wd in range(1, 7):
        ax.axvline(wd, color="0.85", lw=0.5)
    labels = labels or {}
    handles = [Patch(color=color_for(loc), label=labels.get(loc, f"location {loc}")) for loc in sorted(seen)]
    if handles:
        ax.legend(handles=handles, loc="upper center", bbox_to_anchor=(0.5, -0.04), ncol=min(6, len(handles)), frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)

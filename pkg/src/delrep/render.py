"""Matplotlib figure builders for package artifacts, rendered to files.

Import cost is deliberately isolated here: the CLI only imports this module
when a figure was requested. SVG output is byte-deterministic — the Agg
backend, a fixed hash salt for element ids, and a suppressed Date field make
identical inputs produce identical files.
"""
from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .errors import InvalidInputError

plt.rcParams["svg.hashsalt"] = "delrep"

_CYCLE = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def save_figure(fig, path) -> None:
    """Write a figure atomically; SVG output carries no timestamp."""
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    tmp = path.parent / (path.name + ".tmp")
    kwargs = {"format": fmt}
    if fmt == "svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(tmp, **kwargs)
    plt.close(fig)
    os.replace(tmp, path)


def fig_pointset(points, window=None, title: str | None = None):
    import numpy as np

    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = pts.shape[1]
    fig, ax = plt.subplots(figsize=(6, 6 if d == 2 else 2))
    if d == 1:
        ax.scatter(pts[:, 0], np.zeros(len(pts)), s=4, marker="|")
        ax.set_yticks([])
    elif d == 2:
        ax.scatter(pts[:, 0], pts[:, 1], s=2)
        ax.set_aspect("equal")
    else:
        plt.close(fig)
        raise InvalidInputError("point-set rendering supports d <= 2")
    if window is not None:
        lo, hi = window.lo, window.hi
        if d == 1:
            ax.axvline(lo[0], color="0.6", lw=0.8)
            ax.axvline(hi[0], color="0.6", lw=0.8)
        else:
            ax.add_patch(Rectangle(lo, *(hi - lo), fill=False, ec="0.6", lw=0.8))
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_cells(union, leaves=None, title: str | None = None):
    """A cube union as shaded unit cells; optional dyadic leaves outlined."""
    import numpy as np

    if union.d > 2:
        raise InvalidInputError("cell rendering supports d <= 2")
    fig, ax = plt.subplots(figsize=(6, 6 if union.d == 2 else 2))
    arr = union.as_array()
    if union.d == 1:
        for (a,) in arr:
            ax.add_patch(Rectangle((a, 0), 1, 1, fc=_CYCLE[0], ec="white", lw=0.5))
        ax.set_ylim(-0.2, 1.2)
        ax.set_yticks([])
        ax.set_xlim(arr.min() - 1, arr.max() + 2)
    else:
        for a, b in arr:
            ax.add_patch(Rectangle((a, b), 1, 1, fc=_CYCLE[0], ec="white", lw=0.5))
        lo, hi = union.bbox()
        ax.set_xlim(lo[0] - 1, hi[0] + 1)
        ax.set_ylim(lo[1] - 1, hi[1] + 1)
        ax.set_aspect("equal")
    if leaves:
        for cube in leaves:
            corner = cube.corner if union.d == 2 else (cube.corner[0], 0)
            size = (cube.side, cube.side) if union.d == 2 else (cube.side, 1)
            ax.add_patch(Rectangle(corner, *size, fill=False, ec="black", lw=1.0))
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_density_curve(curve, title: str | None = None):
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax0.plot(curve.t_grid, curve.mu_plus, "o-", label="mu+")
    ax0.plot(curve.t_grid, curve.mu_minus, "s-", label="mu-")
    ax0.axhline(curve.mu_est, color="0.5", ls="--",
                label=f"mu_est={curve.mu_est:.4g}")
    ax0.set_xscale("log")
    ax0.set_ylabel("density extremes")
    ax0.legend()
    ax1.loglog(curve.t_grid, curve.delta_gap, "o-")
    ax1.set_xlabel("t")
    ax1.set_ylabel("gap(t)")
    if title:
        ax0.set_title(title)
    fig.tight_layout()
    return fig


def fig_discrepancy(report, title: str | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = [r.width for r in report.rows]
    ax.loglog(widths, [max(r.discrepancy, 1e-12) for r in report.rows], ".",
              label="|w - mu vol|", alpha=0.6)
    ax.loglog(widths, [r.bound for r in report.rows], ".",
              label=f"alpha_fit={report.alpha_fit:.3g} bound", alpha=0.6)
    ax.set_xlabel("box width")
    ax.set_ylabel("discrepancy")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_bk(rows, title: str | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [r.k for r in rows]
    ax.semilogy(ks, [max(r.sup_term, 1e-15) for r in rows], "o-",
                label="sup term (windowed lower bound)")
    ax.semilogy(ks, [max(r.partial_sum, 1e-15) for r in rows], "s--",
                label="partial sum")
    ax.set_xlabel("k")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_repetitivity(prof, title: str | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    rs = [s.r for s in prof.samples]
    ax.plot(rs, [s.R_est for s in prof.samples], "o-", label="R_est(r)")
    if prof.crep_est is not None and rs:
        ax.plot(rs, [prof.crep_est * r for r in rs], "--", color="0.5",
                label=f"crep_est={prof.crep_est:.3g}")
    for f in prof.failures:
        ax.axvline(f.r, color="red", ls=":", label=f"failed r={f.r}")
    ax.set_xlabel("r")
    ax.set_ylabel("R")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_tile_counts(rows, d: int | None = None, title: str | None = None):
    import numpy as np

    fig, ax = plt.subplots(figsize=(6, 4))
    ts = [row.t for row in rows]
    ax.semilogy(ts, [row.count for row in rows], "o-", label="#tiles")
    if d is not None and any(t > 0 for t in ts):
        guide = [np.exp(d * t) for t in ts]
        ax.semilogy(ts, guide, "--", color="0.5", label="e^{td}")
    ax2 = ax.twinx()
    ax2.plot(ts, [row.distinct_rel_volumes for row in rows], "s:", color=_CYCLE[2],
             label="distinct sizes")
    ax2.set_ylabel("distinct volumes")
    ax.set_xlabel("t")
    ax.set_ylabel("count")
    ax.legend(loc="upper left")
    ax2.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_patch(patch, title: str | None = None):
    """Tiles of a generated patch, colored by prototile type (d <= 2)."""
    d = patch.scheme.d
    if d > 2:
        raise InvalidInputError("patch rendering supports d <= 2")
    fig, ax = plt.subplots(figsize=(6, 6 if d == 2 else 2))
    for tile, box in zip(patch.tiles, patch.boxes()):
        color = _CYCLE[tile.type % len(_CYCLE)]
        if d == 1:
            ax.add_patch(Rectangle((box.lo[0], 0), box.sides[0], 1,
                                   fc=color, ec="black", lw=0.5, alpha=0.75))
        else:
            ax.add_patch(Rectangle(box.lo, *box.sides, fc=color, ec="black",
                                   lw=0.5, alpha=0.75))
    supp = patch.supp_box()
    ax.set_xlim(supp.lo[0], supp.hi[0])
    if d == 1:
        ax.set_ylim(-0.2, 1.2)
        ax.set_yticks([])
    else:
        ax.set_ylim(supp.lo[1], supp.hi[1])
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig

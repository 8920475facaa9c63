"""Static figures for the CLI report path."""
from __future__ import annotations

import string

import matplotlib as mpl
mpl.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse

# fixed metadata so reruns write identical bytes
_PNG_META = {"Software": None}


def _save(fig, path, dpi=110):
    fig.savefig(path, dpi=dpi, metadata=_PNG_META)
    plt.close(fig)


def heatmap_figure(path, fmap, fits=(), scan_positions=(), truth=(), title=None):
    e0, e1, n0, n1 = fmap.grid.extent
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    im = ax.imshow(fmap.values, origin="lower", extent=(e0, e1, n0, n1), cmap="magma",
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.85, label="expectation density")
    for k, fit in enumerate(fits):
        ell = Ellipse(fit.centroid, 2 * fit.fitted_long_axis, 2 * fit.short_axis,
                      angle=90.0 - fit.heading, fill=False, lw=1.4,
                      ls="-" if fit.bounded else "--", color="cyan")
        ax.add_patch(ell)
        ax.plot(*fit.center, "+", color="cyan", ms=10)
        ax.annotate(string.ascii_uppercase[k % 26], fit.center, color="cyan",
                    xytext=(6, 6), textcoords="offset points")
    if len(scan_positions):
        sp = np.asarray(scan_positions, dtype=float)
        ax.plot(sp[:, 0], sp[:, 1], "^", color="lime", ms=7, label="scan")
    if len(truth):
        tp = np.asarray(truth, dtype=float)
        ax.plot(tp[:, 0], tp[:, 1], "x", color="white", ms=8, mew=2, label="truth")
    if len(scan_positions) or len(truth):
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlim(e0, e1)
    ax.set_ylim(n0, n1)
    ax.set_xlabel("local easting [m]")
    ax.set_ylabel("local northing [m]")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    _save(fig, path)


def psd_figure(path, frame, peaks=(), title=None):
    f, p = frame.shifted()
    db = 10.0 * np.log10(np.maximum(p, 1e-30))
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    ax.plot(f, db, lw=0.7, color="k")
    for k, pk in enumerate(peaks):
        y = 10.0 * np.log10(max(pk.power, 1e-30))
        ax.plot(pk.freq_mhz, y, "v", color="tab:red")
        ax.annotate(string.ascii_uppercase[k % 26], (pk.freq_mhz, y), xytext=(0, 6),
                    textcoords="offset points", ha="center", color="tab:red")
    ax.set_xlabel("frequency [MHz]")
    ax.set_ylabel("relative power [dB]")
    ax.grid(True, lw=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)

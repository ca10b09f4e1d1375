"""Matplotlib rendering of latent scatters, binned heatmaps and curves.

Every figure is written as an 800x800 PNG (8 in at 100 dpi) with the Agg
backend, next to a CSV holding exactly the plotted numbers.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_INCHES = 8
DPI = 100
CMAP = "viridis"

STYLE = {
    "font.size": 13,
    "axes.labelsize": 14,
    "axes.titlesize": 14,
    "xtick.labelsize": 11,
    "ytick.labelsize": 11,
    "axes.linewidth": 1.0,
    "savefig.facecolor": "white",
    "figure.facecolor": "white",
    "image.cmap": CMAP,
}


def new_figure():
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(FIG_INCHES, FIG_INCHES), dpi=DPI)
    return fig, ax


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def scatter_png(path, x, y, color, title="", xlabel="D1", ylabel="D2", colorbar_label=""):
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        sc = ax.scatter(x, y, c=color, s=6, cmap=CMAP, linewidths=0)
        fig.colorbar(sc, ax=ax, shrink=0.8, label=colorbar_label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
    save(fig, path)


def heatmap_png(path, grid, x_edges, y_edges, title="", xlabel="z1", ylabel="z2"):
    """``grid[i, j]`` covers x-bin ``i`` and y-bin ``j``; NaN cells stay blank."""
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        masked = np.ma.masked_invalid(np.asarray(grid).T)
        mesh = ax.pcolormesh(x_edges, y_edges, masked, cmap=CMAP, shading="flat")
        fig.colorbar(mesh, ax=ax, shrink=0.8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
    save(fig, path)


def lines_png(path, series, title="", xlabel="", ylabel=""):
    """``series`` maps a legend label to ``(x, y)``."""
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        for label, (x, y) in series.items():
            ax.plot(x, y, label=label, lw=1.5)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
    save(fig, path)


def montage_png(path, images, title=""):
    """Tile a ``(rows, cols, h, w)`` stack of images into one grayscale panel."""
    images = np.asarray(images)
    rows, cols, h, w = images.shape
    canvas = images.transpose(0, 2, 1, 3).reshape(rows * h, cols * w)
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        ax.imshow(canvas, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_axis_off()
        ax.set_title(title)
    save(fig, path)


def curve_grid_png(path, curves, title=""):
    """Draw a ``(rows, cols, t)`` stack of 1-D curves, one per cell, in a single panel."""
    curves = np.asarray(curves)
    rows, cols, t = curves.shape
    lo, hi = float(curves.min()), float(curves.max())
    span = (hi - lo) or 1.0
    u = np.linspace(0.05, 0.95, t)
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        for r in range(rows):
            for c in range(cols):
                v = 0.05 + 0.9 * (curves[r, c] - lo) / span
                ax.plot(c + u, rows - 1 - r + v, color="black", lw=0.5)
        ax.set_xlim(0, cols)
        ax.set_ylim(0, rows)
        ax.set_axis_off()
        ax.set_title(title)
    save(fig, path)

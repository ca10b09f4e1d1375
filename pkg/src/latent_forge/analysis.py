"""Latent-space diagnostics: binned target surfaces, local maxima, k-NN probes."""

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument


def binned_mean_surface(points, values, bins=20, bounds=None):
    """Mean of ``values`` per cell of a ``bins x bins`` grid over the 2-D ``points``.

    Returns ``(grid, x_edges, y_edges)``; ``grid[i, j]`` covers x-bin ``i`` and
    y-bin ``j`` and is NaN where the cell holds no points. ``bounds`` defaults
    to the bounding box of ``points``.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64).ravel()
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] != values.size:
        raise InvalidArgument("points must be (n, 2) with one value per point")
    if bounds is None:
        lo, hi = points.min(axis=0), points.max(axis=0)
        bounds = ((lo[0], hi[0]), (lo[1], hi[1]))
    edges = []
    for lo, hi in bounds:
        if hi <= lo:
            hi = lo + 1.0
        edges.append(np.linspace(lo, hi, bins + 1))
    sums, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=edges, weights=values)
    counts, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=edges)
    with np.errstate(invalid="ignore", divide="ignore"):
        grid = np.where(counts > 0, sums / counts, np.nan)
    return grid, edges[0], edges[1]


def count_local_maxima(grid):
    """Occupied cells strictly greater than every occupied 8-neighbour.

    Empty (NaN) neighbours are ignored, so an isolated occupied cell counts.
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    padded = np.full((h + 2, w + 2), np.nan)
    padded[1:-1, 1:-1] = grid
    is_max = ~np.isnan(grid)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:1 + di + h, 1 + dj:1 + dj + w]
            is_max &= np.isnan(nb) | (grid > nb)
    return int(is_max.sum())


def knn_classify(train_points, train_labels, query_points, k=5):
    """Majority vote among the ``k`` nearest training points (ties: smallest label)."""
    tree = cKDTree(train_points)
    _, idx = tree.query(query_points, k=k)
    idx = np.atleast_2d(idx)
    votes = np.asarray(train_labels)[idx]
    out = np.empty(votes.shape[0], dtype=votes.dtype)
    for i, row in enumerate(votes):
        labels, counts = np.unique(row, return_counts=True)
        out[i] = labels[np.argmax(counts)]
    return out


def knn_regress(train_points, train_values, query_points, k=5):
    tree = cKDTree(train_points)
    _, idx = tree.query(query_points, k=k)
    return np.asarray(train_values, dtype=np.float64)[np.atleast_2d(idx)].mean(axis=1)


def split_indices(n, holdout=0.2, seed=0):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(round(holdout * n))
    return order[n_test:], order[:n_test]


def knn_accuracy(points, labels, holdout=0.2, k=5, seed=0):
    train, test = split_indices(len(labels), holdout, seed)
    pred = knn_classify(points[train], labels[train], points[test], k)
    return float(np.mean(pred == np.asarray(labels)[test]))


def knn_normalized_rmse(points, values, holdout=0.2, k=5, seed=0):
    """Hold-out k-NN regression RMSE divided by the std of the held-out values."""
    values = np.asarray(values, dtype=np.float64)
    train, test = split_indices(len(values), holdout, seed)
    pred = knn_regress(points[train], values[train], points[test], k)
    return float(np.sqrt(np.mean((pred - values[test]) ** 2)) / values[test].std())

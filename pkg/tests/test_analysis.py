import numpy as np
import pytest

from latent_forge.analysis import (
    binned_mean_surface,
    count_local_maxima,
    knn_accuracy,
    knn_classify,
    knn_normalized_rmse,
    split_indices,
)
from latent_forge.errors import InvalidArgument


def test_binned_mean_cells():
    pts = np.array([[0.0, 0.0], [0.1, 0.1], [1.0, 1.0]])
    grid, xe, ye = binned_mean_surface(pts, [1.0, 3.0, 5.0], bins=2)
    assert grid[0, 0] == 2.0 and grid[1, 1] == 5.0
    assert np.isnan(grid[0, 1]) and np.isnan(grid[1, 0])
    assert xe[0] == 0.0 and xe[-1] == 1.0


def test_binned_mean_loop_oracle(rng):
    pts = rng.uniform(size=(200, 2))
    vals = rng.normal(size=200)
    grid, xe, ye = binned_mean_surface(pts, vals, bins=4, bounds=((0, 1), (0, 1)))
    for i in range(4):
        for j in range(4):
            inside = [v for p, v in zip(pts, vals)
                      if xe[i] <= p[0] < xe[i + 1] and ye[j] <= p[1] < ye[j + 1]]
            assert grid[i, j] == pytest.approx(np.mean(inside), abs=1e-12)


def test_binned_mean_shape_check():
    with pytest.raises(InvalidArgument):
        binned_mean_surface(np.zeros((3, 3)), np.zeros(3))


def test_maxima_single_peak():
    x = np.linspace(-1, 1, 9)
    grid = -(x[:, None] ** 2 + x[None, :] ** 2)
    assert count_local_maxima(grid) == 1


def test_maxima_plateau_not_strict():
    assert count_local_maxima(np.ones((4, 4))) == 0


def test_maxima_isolated_cells_count():
    g = np.full((5, 5), np.nan)
    g[0, 0] = 1.0
    g[4, 4] = -3.0
    assert count_local_maxima(g) == 2


def test_maxima_checkerboard():
    g = np.indices((6, 6)).sum(axis=0) % 2 * 1.0
    # diagonal neighbours share the value, so no cell is strictly greater than all 8
    assert count_local_maxima(g) == 0


def test_split_partition():
    train, test = split_indices(50, 0.2, seed=1)
    assert len(test) == 10 and sorted(np.concatenate([train, test])) == list(range(50))


def test_knn_classify_tie_smallest_label():
    pts = np.array([[0.0], [1.0], [2.0], [3.0]])
    assert knn_classify(pts, np.array([5, 5, 2, 2]), np.array([[1.5]]), k=4)[0] == 2


def test_knn_separated_clusters(rng):
    a = rng.normal(-5, 0.5, size=(50, 2))
    b = rng.normal(5, 0.5, size=(50, 2))
    labels = np.repeat([0, 1], 50)
    assert knn_accuracy(np.vstack([a, b]), labels) == 1.0


def test_knn_rmse_smooth_vs_noise(rng):
    pts = rng.uniform(size=(400, 2))
    assert knn_normalized_rmse(pts, pts[:, 0]) < 0.3
    assert knn_normalized_rmse(pts, rng.normal(size=400)) > 0.8

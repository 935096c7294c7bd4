"""Pure-numpy k-nearest-neighbour selection, the fallback engine.

Same contract as the compiled kernel in ``_knn_cy``: squared euclidean
distances accumulated as direct coordinate differences (no Gram trick, so
duplicate points yield an exact zero), self excluded, rows ordered by
ascending distance with ties broken by ascending index.
"""

from __future__ import annotations

import numpy as np


def knn_select(points: np.ndarray, k: int) -> np.ndarray:
    n = len(points)
    d2 = np.empty((n, n))
    for i in range(n):
        d2[i] = ((points - points[i]) ** 2).sum(axis=1)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps equal distances in ascending index order
    order = np.argsort(d2, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k].astype(np.int64))

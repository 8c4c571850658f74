"""Spatial indexes for radius queries over a fixed point set.

The KD-tree is rebuilt per frame (clouds change completely between sweeps,
so incremental updates buy nothing). Queries are exact: a point at distance
exactly r from the query center is included.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

DEFAULT_LEAF_SIZE = 16


def _check_points(points) -> np.ndarray:
    # Always copy: the index must not alias caller memory (later mutation of
    # the input would silently corrupt queries) and the copy is what gets
    # frozen read-only.
    pts = np.array(points, dtype=np.float64, order="C", copy=True)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
    if pts.size and not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


class KdTree:
    """Exact radius queries over (N, 3) points, backed by the best kernel.

    backend: None picks the compiled extension when available, otherwise the
    pure python kernel; pass "compiled" or "python" to force one.
    """

    def __init__(self, points, leaf_size: int = DEFAULT_LEAF_SIZE, backend: str | None = None):
        pts = _check_points(points)
        mod = _kernels.backend_module(backend)
        self.backend = mod.BACKEND_NAME
        self.points = pts
        self.points.flags.writeable = False
        self._impl = mod.KdTree(pts, leaf_size)

    @property
    def n(self) -> int:
        return self._impl.n

    @property
    def leaf_size(self) -> int:
        return self._impl.leaf_size

    @property
    def depth(self) -> int:
        return self._impl.depth

    def radius_query(self, center, r: float) -> np.ndarray:
        """Ascending indices of every point within distance r (inclusive)."""
        return self._impl.radius_query(center, r)

    def radius_count(self, center, r: float) -> int:
        return self._impl.radius_count(center, r)


class BruteForceIndex:
    """Linear-scan radius queries; the baseline the KD-tree is measured against."""

    backend = "brute"

    def __init__(self, points):
        self.points = _check_points(points)
        self.points.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.points)

    def radius_query(self, center, r: float) -> np.ndarray:
        if r < 0:
            raise ValueError("radius must be non-negative")
        c = np.asarray(center, dtype=np.float64).reshape(3)
        d = self.points - c
        d2 = (d * d).sum(axis=1)
        return np.nonzero(d2 <= r * r)[0].astype(np.int64)

    def radius_count(self, center, r: float) -> int:
        return int(self.radius_query(center, r).size)

"""Pure python KD-tree and DBSCAN kernels.

Mirror of the compiled extension in ``_core.pyx``. Both backends must produce
identical query sets and identical cluster labels for the same inputs; the
test suite asserts this whenever the compiled module is importable. Keep the
arithmetic in the same order as the C code (dx*dx + dy*dy + dz*dz, summed
left to right) so the float comparisons agree bit for bit.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_LEAF = -1
_UNVISITED = -2
_NOISE = -1


class KdTree:
    """Static 3-d KD-tree over an (N, 3) float64 array.

    Median splits on axes cycling x, y, z; ties on a coordinate are broken
    by point index (stable sort), so the build is fully deterministic.
    Nodes are stored in flat arrays, points are reordered once into leaf
    order so each leaf scan is one contiguous numpy slice.
    """

    def __init__(self, points, leaf_size: int = 16):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.leaf_size = int(leaf_size)
        self.n = len(pts)
        self._orig = pts
        self.depth = 0

        idx = np.arange(self.n, dtype=np.int64)
        axis_l, val_l, left_l, right_l, start_l, end_l = [], [], [], [], [], []

        # Iterative build; the stack holds (lo, hi, level, parent, is_left).
        if self.n > 0:
            stack = [(0, self.n, 1, -1, False)]
            while stack:
                lo, hi, level, parent, is_left = stack.pop()
                nid = len(axis_l)
                if parent >= 0:
                    if is_left:
                        left_l[parent] = nid
                    else:
                        right_l[parent] = nid
                if level > self.depth:
                    self.depth = level
                if hi - lo <= self.leaf_size:
                    axis_l.append(_LEAF)
                    val_l.append(0.0)
                    left_l.append(-1)
                    right_l.append(-1)
                    start_l.append(lo)
                    end_l.append(hi)
                    continue
                ax = (level - 1) % 3
                seg = idx[lo:hi]
                order = np.argsort(pts[seg, ax], kind="stable")
                idx[lo:hi] = seg[order]
                mid = lo + (hi - lo) // 2
                axis_l.append(ax)
                val_l.append(pts[idx[mid], ax])
                left_l.append(-1)
                right_l.append(-1)
                start_l.append(lo)
                end_l.append(hi)
                # Push right first so the left child is visited first.
                stack.append((mid, hi, level + 1, nid, False))
                stack.append((lo, mid, level + 1, nid, True))

        self._axis = np.array(axis_l, dtype=np.int64)
        self._val = np.array(val_l, dtype=np.float64)
        self._left = np.array(left_l, dtype=np.int64)
        self._right = np.array(right_l, dtype=np.int64)
        self._start = np.array(start_l, dtype=np.int64)
        self._end = np.array(end_l, dtype=np.int64)
        self._perm = idx
        self._pp = pts[idx] if self.n else pts.reshape(0, 3)

    def radius_query(self, center, r: float) -> np.ndarray:
        """Indices of all points with distance <= r from center, ascending."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        c = np.asarray(center, dtype=np.float64).reshape(3)
        if self.n == 0:
            return np.empty(0, dtype=np.int64)
        r2 = r * r
        out = []
        stack = [0]
        while stack:
            nid = stack.pop()
            ax = self._axis[nid]
            if ax == _LEAF:
                s, e = self._start[nid], self._end[nid]
                d = self._pp[s:e] - c
                d2 = (d * d).sum(axis=1)
                hit = np.nonzero(d2 <= r2)[0]
                if hit.size:
                    out.append(self._perm[s:e][hit])
            else:
                sv = self._val[nid]
                if c[ax] - r <= sv:
                    stack.append(self._left[nid])
                if c[ax] + r >= sv:
                    stack.append(self._right[nid])
        if not out:
            return np.empty(0, dtype=np.int64)
        res = np.concatenate(out)
        res.sort()
        return res

    def radius_count(self, center, r: float) -> int:
        return int(self.radius_query(center, r).size)

    def dbscan(self, eps: float, min_points: int) -> np.ndarray:
        """Density clustering over the indexed points.

        Returns int64 labels: -1 for noise, otherwise dense cluster ids
        ordered by the index of each cluster's first core point. Border
        points go to whichever cluster expands into them first, which with
        ascending seed order means the cluster with the lowest id.
        """
        n = self.n
        labels = np.full(n, _UNVISITED, dtype=np.int64)
        if n == 0:
            return labels
        pts = self._orig
        cluster = 0
        queue = np.empty(n, dtype=np.int64)
        for i in range(n):
            if labels[i] != _UNVISITED:
                continue
            nbrs = self.radius_query(pts[i], eps)
            if nbrs.size < min_points:
                labels[i] = _NOISE
                continue
            labels[i] = cluster
            qtail = 0
            for j in nbrs:
                if j == i:
                    continue
                if labels[j] == _UNVISITED:
                    labels[j] = cluster
                    queue[qtail] = j
                    qtail += 1
                elif labels[j] == _NOISE:
                    labels[j] = cluster
            qhead = 0
            while qhead < qtail:
                j = queue[qhead]
                qhead += 1
                nbrs2 = self.radius_query(pts[j], eps)
                if nbrs2.size >= min_points:
                    for u in nbrs2:
                        if labels[u] == _UNVISITED:
                            labels[u] = cluster
                            queue[qtail] = u
                            qtail += 1
                        elif labels[u] == _NOISE:
                            labels[u] = cluster
            cluster += 1
        return labels

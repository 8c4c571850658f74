"""Density clustering of point clouds (DBSCAN).

Label semantics, fixed across backends:
  - a point is core iff it has at least min_points neighbors within eps,
    counting itself, with the boundary inclusive (distance <= eps);
  - cluster ids are dense, ordered by each cluster's first core point in
    scan order;
  - border points belong to the first cluster that expands into them, which
    with ascending seeds is the lowest-id adjacent cluster;
  - everything else is noise, labeled -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial_index import KdTree, _check_points

NOISE = -1
_UNVISITED = -2


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 0.7
    min_points: int = 10

    def __post_init__(self):
        if self.eps < 0 or not np.isfinite(self.eps):
            raise ValueError("eps must be non-negative and finite")
        if self.min_points < 1:
            raise ValueError("min_points must be >= 1")


@dataclass(frozen=True)
class ClusterLabels:
    """Per-point labels: -1 noise, otherwise a dense cluster id."""

    labels: np.ndarray
    n_clusters: int = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        n = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
        object.__setattr__(self, "n_clusters", n)

    def cluster_indices(self, cluster_id: int) -> np.ndarray:
        return np.nonzero(self.labels == cluster_id)[0]

    def iter_clusters(self):
        for cid in range(self.n_clusters):
            yield cid, self.cluster_indices(cid)


def dbscan(points, params: ClusterParams, index=None) -> ClusterLabels:
    """Cluster (N, 3) points with the given eps / min_points.

    `index` must be a radius-query index built over exactly these points;
    when omitted a KD-tree is built with the default backend. A KdTree
    carries its own fused clustering loop in the compiled backend, any other
    index goes through the generic expansion below.
    """
    pts = _check_points(points)
    if index is None:
        index = KdTree(pts)
    if index.n != len(pts):
        raise ValueError(
            f"index holds {index.n} points but {len(pts)} were passed; "
            "build the index over the same cloud"
        )
    impl = getattr(index, "_impl", None)
    if impl is not None and hasattr(impl, "dbscan"):
        return ClusterLabels(impl.dbscan(params.eps, params.min_points))
    return ClusterLabels(_expand_via_index(pts, params, index))


def _expand_via_index(pts: np.ndarray, params: ClusterParams, index) -> np.ndarray:
    """Generic DBSCAN loop over any radius-query index."""
    n = len(pts)
    labels = np.full(n, _UNVISITED, dtype=np.int64)
    eps, min_points = params.eps, params.min_points
    cluster = 0
    queue = np.empty(n, dtype=np.int64)
    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        nbrs = index.radius_query(pts[i], eps)
        if nbrs.size < min_points:
            labels[i] = NOISE
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
            elif labels[j] == NOISE:
                labels[j] = cluster
        qhead = 0
        while qhead < qtail:
            j = queue[qhead]
            qhead += 1
            nbrs2 = index.radius_query(pts[j], eps)
            if nbrs2.size >= min_points:
                for u in nbrs2:
                    if labels[u] == _UNVISITED:
                        labels[u] = cluster
                        queue[qtail] = u
                        qtail += 1
                    elif labels[u] == NOISE:
                        labels[u] = cluster
        cluster += 1
    return labels

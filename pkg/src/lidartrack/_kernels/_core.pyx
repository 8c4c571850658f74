# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled KD-tree and DBSCAN kernels.

Semantics must stay in lockstep with ``_fallback.py``: identical query sets,
identical cluster labels. Distances are accumulated in the same order
(dx*dx + dy*dy + dz*dz) so threshold comparisons agree bit for bit with the
numpy fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()

ctypedef cnp.int64_t i64

BACKEND_NAME = "compiled"

cdef enum:
    STACK_MAX = 128

cdef struct Node:
    double split_val
    int axis      # -1 marks a leaf
    int left
    int right
    long start
    long end


cdef class KdTree:
    """Static 3-d KD-tree over an (N, 3) float64 array.

    Median splits cycling x, y, z; coordinate ties broken by point index so
    the build is deterministic. Points are copied into leaf order so leaf
    scans are contiguous.
    """

    cdef Node* nodes
    cdef long n_nodes
    cdef long cap_nodes
    cdef double* op      # original points, flat 3n
    cdef double* pp      # permuted points, flat 3n
    cdef i64* perm
    cdef readonly long n
    cdef readonly int leaf_size
    cdef readonly int depth

    def __cinit__(self, points, int leaf_size=16):
        cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] pts
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected (N, 3) points, got shape {tuple(np.asarray(points).shape)}")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.leaf_size = leaf_size
        self.n = pts.shape[0]
        self.depth = 0
        self.nodes = NULL
        self.op = NULL
        self.pp = NULL
        self.perm = NULL
        self.n_nodes = 0
        self.cap_nodes = 0

        cdef long i, d
        if self.n == 0:
            return
        self.op = <double*> malloc(self.n * 3 * sizeof(double))
        self.pp = <double*> malloc(self.n * 3 * sizeof(double))
        self.perm = <i64*> malloc(self.n * sizeof(i64))
        self.cap_nodes = 64
        self.nodes = <Node*> malloc(self.cap_nodes * sizeof(Node))
        if self.op == NULL or self.pp == NULL or self.perm == NULL or self.nodes == NULL:
            raise MemoryError()
        for i in range(self.n):
            self.perm[i] = i
            for d in range(3):
                self.op[3 * i + d] = pts[i, d]
        self._build(0, self.n, 1)
        for i in range(self.n):
            for d in range(3):
                self.pp[3 * i + d] = self.op[3 * self.perm[i] + d]

    def __dealloc__(self):
        if self.nodes != NULL:
            free(self.nodes)
        if self.op != NULL:
            free(self.op)
        if self.pp != NULL:
            free(self.pp)
        if self.perm != NULL:
            free(self.perm)

    cdef long _alloc_node(self) except -1:
        cdef Node* grown
        if self.n_nodes == self.cap_nodes:
            self.cap_nodes *= 2
            grown = <Node*> malloc(self.cap_nodes * sizeof(Node))
            if grown == NULL:
                raise MemoryError()
            for i in range(self.n_nodes):
                grown[i] = self.nodes[i]
            free(self.nodes)
            self.nodes = grown
        self.n_nodes += 1
        return self.n_nodes - 1

    cdef inline bint _key_less(self, i64 a, i64 b, int axis) noexcept nogil:
        cdef double va = self.op[3 * a + axis]
        cdef double vb = self.op[3 * b + axis]
        if va < vb:
            return True
        if va > vb:
            return False
        return a < b

    cdef void _select(self, long lo, long hi, long k, int axis) noexcept nogil:
        # Hoare quickselect with median-of-three pivots over perm[lo:hi].
        # Keys (coordinate, index) are all distinct, which guarantees progress.
        cdef long l = lo, h = hi - 1
        cdef long i, j, mid
        cdef i64 piv, tmp
        while l < h:
            mid = l + (h - l) // 2
            if self._key_less(self.perm[mid], self.perm[l], axis):
                tmp = self.perm[l]; self.perm[l] = self.perm[mid]; self.perm[mid] = tmp
            if self._key_less(self.perm[h], self.perm[l], axis):
                tmp = self.perm[l]; self.perm[l] = self.perm[h]; self.perm[h] = tmp
            if self._key_less(self.perm[h], self.perm[mid], axis):
                tmp = self.perm[mid]; self.perm[mid] = self.perm[h]; self.perm[h] = tmp
            piv = self.perm[mid]
            i = l - 1
            j = h + 1
            while True:
                i += 1
                while self._key_less(self.perm[i], piv, axis):
                    i += 1
                j -= 1
                while self._key_less(piv, self.perm[j], axis):
                    j -= 1
                if i >= j:
                    break
                tmp = self.perm[i]; self.perm[i] = self.perm[j]; self.perm[j] = tmp
            if k <= j:
                h = j
            else:
                l = j + 1

    cdef long _build(self, long lo, long hi, int level) except -1:
        cdef long nid = self._alloc_node()
        cdef long mid, lid, rid
        cdef int ax
        cdef double sv
        if level > self.depth:
            self.depth = level
        if hi - lo <= self.leaf_size:
            self.nodes[nid].axis = -1
            self.nodes[nid].split_val = 0.0
            self.nodes[nid].left = -1
            self.nodes[nid].right = -1
            self.nodes[nid].start = lo
            self.nodes[nid].end = hi
            return nid
        ax = (level - 1) % 3
        mid = lo + (hi - lo) // 2
        self._select(lo, hi, mid, ax)
        # Capture the split value now: the child builds re-partition perm and
        # move the element that currently sits at mid. The node array may
        # also be realloc'd by the recursion, so fields are written last.
        sv = self.op[3 * self.perm[mid] + ax]
        lid = self._build(lo, mid, level + 1)
        rid = self._build(mid, hi, level + 1)
        self.nodes[nid].axis = ax
        self.nodes[nid].split_val = sv
        self.nodes[nid].left = <int> lid
        self.nodes[nid].right = <int> rid
        self.nodes[nid].start = lo
        self.nodes[nid].end = hi
        return nid

    cdef long _query_into(self, double cx, double cy, double cz, double r, i64* out) noexcept nogil:
        cdef int stack[STACK_MAX]
        cdef int sp = 0
        cdef long nid, i, cnt = 0
        cdef double r2 = r * r
        cdef double c, dx, dy, dz
        cdef Node nd
        if self.n == 0:
            return 0
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            nid = stack[sp]
            nd = self.nodes[nid]
            if nd.axis < 0:
                for i in range(nd.start, nd.end):
                    dx = self.pp[3 * i] - cx
                    dy = self.pp[3 * i + 1] - cy
                    dz = self.pp[3 * i + 2] - cz
                    if dx * dx + dy * dy + dz * dz <= r2:
                        out[cnt] = self.perm[i]
                        cnt += 1
            else:
                if nd.axis == 0:
                    c = cx
                elif nd.axis == 1:
                    c = cy
                else:
                    c = cz
                if c - r <= nd.split_val:
                    stack[sp] = nd.left
                    sp += 1
                if c + r >= nd.split_val:
                    stack[sp] = nd.right
                    sp += 1
        return cnt

    def radius_query(self, center, double r):
        """Indices of all points with distance <= r from center, ascending."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.asarray(center, dtype=np.float64).reshape(3)
        if self.n == 0:
            return np.empty(0, dtype=np.int64)
        cdef i64* buf = <i64*> malloc(self.n * sizeof(i64))
        if buf == NULL:
            raise MemoryError()
        cdef long cnt
        try:
            cnt = self._query_into(c[0], c[1], c[2], r, buf)
            res = np.empty(cnt, dtype=np.int64)
            for i in range(cnt):
                res[i] = buf[i]
        finally:
            free(buf)
        res.sort()
        return res

    def radius_count(self, center, double r):
        return int(self.radius_query(center, r).size)

    def dbscan(self, double eps, long min_points):
        """Density clustering over the indexed points.

        Returns int64 labels: -1 noise, otherwise dense cluster ids ordered
        by each cluster's first core point. Matches the python fallback
        label for label.
        """
        cdef cnp.ndarray[cnp.int64_t, ndim=1] labels_np = np.full(self.n, -2, dtype=np.int64)
        if self.n == 0:
            return labels_np
        cdef i64* labels = <i64*> cnp.PyArray_DATA(labels_np)
        cdef i64* nbuf = <i64*> malloc(self.n * sizeof(i64))
        cdef i64* queue = <i64*> malloc(self.n * sizeof(i64))
        if nbuf == NULL or queue == NULL:
            if nbuf != NULL:
                free(nbuf)
            if queue != NULL:
                free(queue)
            raise MemoryError()
        cdef long i, j, u, k, m, m2, qhead, qtail
        cdef i64 cluster = 0
        try:
            with nogil:
                for i in range(self.n):
                    if labels[i] != -2:
                        continue
                    m = self._query_into(self.op[3 * i], self.op[3 * i + 1], self.op[3 * i + 2], eps, nbuf)
                    if m < min_points:
                        labels[i] = -1
                        continue
                    labels[i] = cluster
                    qtail = 0
                    for k in range(m):
                        j = nbuf[k]
                        if j == i:
                            continue
                        if labels[j] == -2:
                            labels[j] = cluster
                            queue[qtail] = j
                            qtail += 1
                        elif labels[j] == -1:
                            labels[j] = cluster
                    qhead = 0
                    while qhead < qtail:
                        j = queue[qhead]
                        qhead += 1
                        m2 = self._query_into(self.op[3 * j], self.op[3 * j + 1], self.op[3 * j + 2], eps, nbuf)
                        if m2 >= min_points:
                            for k in range(m2):
                                u = nbuf[k]
                                if labels[u] == -2:
                                    labels[u] = cluster
                                    queue[qtail] = u
                                    qtail += 1
                                elif labels[u] == -1:
                                    labels[u] = cluster
                    cluster += 1
        finally:
            free(nbuf)
            free(queue)
        return labels_np

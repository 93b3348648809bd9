"""Static orthogonal range emptiness-with-witness structure.

A layered range tree: one balanced layer per dimension, realized as an
iterative segment tree over the points sorted by that coordinate. Every
canonical node of a non-final layer owns a child structure over its point
subset on the next dimension; the final layer stores a min-id segment tree,
so a query returns the smallest point id inside the box. Queries visit
O(log^d n) nodes; storage is O(n log^(d-1) n).
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import EmptyInput

_SENTINEL = 1 << 60


@dataclass
class QueryCounter:
    """Counts structure nodes touched by witness queries."""

    node_visits: int = 0


class _MinIdLayer:
    """Final dimension: sorted coords + segment tree of min point id."""

    __slots__ = ("coords", "seg", "m")

    def __init__(self, coords: List[float], ids: List[int]):
        m = len(ids)
        self.m = m
        self.coords = coords
        seg = [_SENTINEL] * (2 * m)
        seg[m:] = ids
        for i in range(m - 1, 0, -1):
            left, right = seg[2 * i], seg[2 * i + 1]
            seg[i] = left if left < right else right
        self.seg = seg

    def min_id(self, lo: float, hi: float, counter=None) -> int:
        l = bisect_left(self.coords, lo)
        r = bisect_right(self.coords, hi)
        if l >= r:
            return _SENTINEL
        l += self.m
        r += self.m
        best = _SENTINEL
        visits = 0
        seg = self.seg
        while l < r:
            if l & 1:
                if seg[l] < best:
                    best = seg[l]
                l += 1
                visits += 1
            if r & 1:
                r -= 1
                if seg[r] < best:
                    best = seg[r]
                visits += 1
            l >>= 1
            r >>= 1
            visits += 1
        if counter is not None:
            counter.node_visits += visits
        return best

    def node_count(self) -> int:
        return 2 * self.m


class _Layer:
    """Non-final dimension: segment tree whose nodes own next-dim layers."""

    __slots__ = ("coords", "assoc", "m")

    def __init__(self, coords: List[float], assoc: List[object]):
        self.coords = coords
        self.assoc = assoc
        self.m = len(coords)

    def node_count(self) -> int:
        total = 0
        for sub in self.assoc:
            if sub is not None:
                total += 1 + sub.node_count()
        return total


def _build_layer(points: np.ndarray, ids: List[int], dim: int, last_dim: int):
    order = sorted(ids, key=lambda i: (points[i, dim], i))
    coords = [float(points[i, dim]) for i in order]
    if dim == last_dim:
        return _MinIdLayer(coords, order)
    m = len(order)
    subsets: List[Optional[List[int]]] = [None] * (2 * m)
    for i, pid in enumerate(order):
        subsets[m + i] = [pid]
    for i in range(m - 1, 0, -1):
        subsets[i] = subsets[2 * i] + subsets[2 * i + 1]
    assoc: List[object] = [None] * (2 * m)
    for i in range(1, 2 * m):
        assoc[i] = _build_layer(points, subsets[i], dim + 1, last_dim)
    return _Layer(coords, assoc)


def _query_layer(layer, box_lo, box_hi, dim: int, counter) -> int:
    if isinstance(layer, _MinIdLayer):
        return layer.min_id(box_lo[dim], box_hi[dim], counter)
    l = bisect_left(layer.coords, box_lo[dim])
    r = bisect_right(layer.coords, box_hi[dim])
    if l >= r:
        return _SENTINEL
    l += layer.m
    r += layer.m
    best = _SENTINEL
    visits = 0
    assoc = layer.assoc
    while l < r:
        if l & 1:
            sub = _query_layer(assoc[l], box_lo, box_hi, dim + 1, counter)
            if sub < best:
                best = sub
            l += 1
            visits += 1
        if r & 1:
            r -= 1
            sub = _query_layer(assoc[r], box_lo, box_hi, dim + 1, counter)
            if sub < best:
                best = sub
            visits += 1
        l >>= 1
        r >>= 1
        visits += 1
    if counter is not None:
        counter.node_visits += visits
    return best


class RangeReporter:
    """Immutable after build; concurrent queries are safe."""

    def __init__(self, points):
        points = np.ascontiguousarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise EmptyInput("range reporter needs at least one point")
        if not np.all(np.isfinite(points)):
            raise EmptyInput("range reporter requires finite points")
        self.n, self.dim = points.shape
        self._root = _build_layer(points, list(range(self.n)), 0, self.dim - 1)
        self.node_count = self._root.node_count()

    def witness_in_box(self, box_lo, box_hi, counter: Optional[QueryCounter] = None
                       ) -> Optional[int]:
        """Smallest id of a point inside the closed box, or None if empty."""
        best = _query_layer(self._root, box_lo, box_hi, 0, counter)
        return None if best >= _SENTINEL else best


def build(points) -> RangeReporter:
    return RangeReporter(points)

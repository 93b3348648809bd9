"""Precomputed compressed Euclidean quadtree for the logarithmic fast path.

The root is the smallest enclosing divergence-cube of the point set: per
dimension an interval of equal rooted side s (domain permitting). Cells
bisect at Euclidean midpoints, so the whole tree is integer arithmetic on
fixed-point coordinates and all divergence numerics happen once, in
preprocessing. The curvature ratio c0 sandwiches the rooted side of any
level-i cell within [s / (c0 2^i), c0 s / 2^i], which is what lets a query
jump straight to the level whose cells match the rough-neighbor radius.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .divergence import DivergenceSpec, Side, StructuralConstants, lower_bound_to_box
from .errors import Clipped, NotRooted
from .numeric import Precision, point_at_distance, query_precision
from .quadtree_search import QueryStats, _ball_swap, shrink_cutoff
from .ring_tree import rough_nn

BITS = 42
_BUILD_ALPHA = 1e-9


class EquadNode:
    __slots__ = ("level", "idx", "children", "ids", "rep", "count",
                 "box_lo", "box_hi", "max_side")

    def __init__(self, level, idx, box_lo, box_hi, max_side, rep, count,
                 children=None, ids=None):
        self.level = level
        self.idx = idx
        self.box_lo = box_lo
        self.box_hi = box_hi
        self.max_side = max_side
        self.rep = rep
        self.count = count
        self.children = children
        self.ids = ids

    @property
    def is_leaf(self) -> bool:
        return self.ids is not None


@dataclass
class CompressedQuadtree:
    root: EquadNode
    root_lo: np.ndarray          # per-dimension interval starts A_k
    root_hi: np.ndarray          # per-dimension interval ends B_k
    root_sides: np.ndarray       # rooted side of each root interval
    s: float                     # target (max) rooted side
    c0: float
    points: np.ndarray
    ints: np.ndarray             # fixed-point coordinates, shape (n, d)
    node_count: int
    max_level: int
    _tk_cache: Dict[Tuple[int, int], np.ndarray] = None

    def occupied_indices(self, dim: int, level: int) -> np.ndarray:
        """Sorted distinct level-cell indices holding points, per dimension.

        This is the per-dimension interval-tree view of the quadtree,
        materialized lazily one level at a time.
        """
        if self._tk_cache is None:
            self._tk_cache = {}
        key = (dim, level)
        got = self._tk_cache.get(key)
        if got is None:
            shift = BITS - level
            got = np.unique(self.ints[:, dim] >> shift)
            self._tk_cache[key] = got
        return got


def _enclosing_cube(points: np.ndarray, spec: DivergenceSpec, prec: Precision,
                    c0: float):
    """Per-dimension intervals of equal rooted side s enclosing the points.

    Extends each coordinate range upward to side s, spilling downward when
    the domain clips; a fully clipped dimension keeps the domain interval
    and its own (smaller) recorded side.
    """
    d = spec.dim
    lo = np.empty(d)
    hi = np.empty(d)
    sides = np.empty(d)
    mins = points.min(axis=0)
    maxs = points.max(axis=0)
    raw_sides = np.array([spec.dist1(k, float(mins[k]), float(maxs[k]))
                          for k in range(d)])
    s = float(raw_sides.max())
    if s <= 0.0:
        # all points identical; fall back to a small sliver of the domain
        for k in range(d):
            lo[k] = mins[k]
            hi[k] = min(float(spec.domain.hi[k]),
                        float(mins[k]) + 1e-9 * (spec.domain.hi[k] - spec.domain.lo[k]))
            if hi[k] <= lo[k]:
                lo[k] = max(float(spec.domain.lo[k]), hi[k] - 1e-12)
            sides[k] = spec.dist1(k, float(lo[k]), float(hi[k]))
        return lo, hi, sides, float(sides.max())
    for k, gen in enumerate(spec.generators):
        dlo, dhi = float(spec.domain.lo[k]), float(spec.domain.hi[k])
        a = float(mins[k])
        try:
            b = point_at_distance(gen, spec.kind_id, spec.rooted, a, s, True, prec,
                                  lo=a, hi=dhi, c0=c0)
        except Clipped as clip:
            b = float(clip.endpoint)
            try:
                a = point_at_distance(gen, spec.kind_id, spec.rooted, b, s, False,
                                      prec, lo=dlo, hi=b, c0=c0, swap=True)
            except Clipped as clip2:
                a = float(clip2.endpoint)
        # the marches hit s only to within alpha; the box must still contain
        # every point exactly or downstream box pruning would be unsound
        a = min(a, float(mins[k]))
        b = max(b, float(maxs[k]))
        lo[k], hi[k] = a, b
        sides[k] = spec.dist1(k, a, b)
    return lo, hi, sides, s


def _node_box(tree_lo, tree_hi, level, idx):
    frac = 2.0 ** (-level)
    lo = tree_lo + (np.asarray(idx, dtype=float) * frac) * (tree_hi - tree_lo)
    hi = tree_lo + ((np.asarray(idx, dtype=float) + 1.0) * frac) * (tree_hi - tree_lo)
    return lo, hi


def build_equadtree(points: np.ndarray, spec: DivergenceSpec,
                    constants: StructuralConstants,
                    geometry: Optional[tuple] = None,
                    validate: bool = True) -> CompressedQuadtree:
    """Compressed quadtree over fixed-point coordinates; O(n) nodes.

    ``geometry`` replays a previously computed root cube (deserialization),
    skipping the enclosing-cube marches so the rebuild is bit-exact.
    """
    if not spec.rooted:
        raise NotRooted("the precomputed fast path requires a rooted divergence")
    points = spec.check_points(points)
    n, d = points.shape
    if geometry is not None:
        root_lo, root_hi, root_sides, s = geometry
        root_lo = np.asarray(root_lo, dtype=float)
        root_hi = np.asarray(root_hi, dtype=float)
        root_sides = np.asarray(root_sides, dtype=float)
    else:
        prec = Precision(_BUILD_ALPHA)
        root_lo, root_hi, root_sides, s = _enclosing_cube(points, spec, prec,
                                                          constants.c0)

    scale = (2.0 ** BITS) / (root_hi - root_lo)
    ints = np.floor((points - root_lo) * scale).astype(np.int64)
    np.clip(ints, 0, (1 << BITS) - 1, out=ints)

    node_count = 0
    max_level = 0

    def make_node(rows: np.ndarray) -> EquadNode:
        nonlocal node_count, max_level
        node_count += 1
        sub = ints[rows]
        mins = sub.min(axis=0)
        maxs = sub.max(axis=0)
        xor = mins ^ maxs
        if not np.any(xor):
            level = BITS
            idx = tuple(int(v) for v in mins)
            lo, hi = _node_box(root_lo, root_hi, level, idx)
            max_level = max(max_level, level)
            side = max(spec.dist1(k, float(lo[k]), float(hi[k])) for k in range(d))
            return EquadNode(level, idx, lo, hi, side, int(rows.min()), rows.size,
                             ids=np.sort(rows))
        prefix = np.array([BITS - int(v).bit_length() for v in xor])
        level = int(prefix.min())
        max_level = max(max_level, level)
        shift = BITS - level
        idx = tuple(int(v) for v in (mins >> shift))
        lo, hi = _node_box(root_lo, root_hi, level, idx)
        side = max(spec.dist1(k, float(lo[k]), float(hi[k])) for k in range(d))
        child_bit = shift - 1
        codes = np.zeros(rows.size, dtype=np.int64)
        for k in range(d):
            codes |= ((sub[:, k] >> child_bit) & 1) << k
        order = np.argsort(codes, kind="stable")
        codes_sorted = codes[order]
        rows_sorted = rows[order]
        boundaries = np.nonzero(np.diff(codes_sorted))[0] + 1
        groups = np.split(rows_sorted, boundaries)
        children = [make_node(np.sort(g)) for g in groups]
        rep = min(ch.rep for ch in children)
        return EquadNode(level, idx, lo, hi, side, rep, rows.size, children=children)

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * BITS * (d + 2) + n))
    try:
        root = make_node(np.arange(n))
    finally:
        sys.setrecursionlimit(old)

    tree = CompressedQuadtree(
        root=root, root_lo=root_lo, root_hi=root_hi, root_sides=root_sides,
        s=s, c0=constants.c0, points=points, ints=ints,
        node_count=node_count, max_level=max_level,
    )
    if validate:
        _validate_level_sides(tree, spec)
    return tree


def _validate_level_sides(tree: CompressedQuadtree, spec: DivergenceSpec,
                          rel_tol: float = 1e-6):
    """Check the per-level rooted-side sandwich on every numerically
    meaningful node; boxes near float resolution are skipped because their
    side evaluation is cancellation-dominated."""
    c0 = tree.c0
    min_width = 1e-7 * (tree.root_hi - tree.root_lo)

    def visit(node: EquadNode):
        if node.level > 0:
            for k in range(spec.dim):
                width = node.box_hi[k] - node.box_lo[k]
                if width < min_width[k]:
                    continue
                side = spec.dist1(k, float(node.box_lo[k]), float(node.box_hi[k]))
                s_k = tree.root_sides[k]
                lo_bound = s_k / (c0 * 2.0 ** node.level)
                hi_bound = c0 * s_k / 2.0 ** node.level
                if not (lo_bound * (1 - rel_tol) <= side <= hi_bound * (1 + rel_tol)):
                    raise ValueError(
                        f"level-{node.level} side {side} outside "
                        f"[{lo_bound}, {hi_bound}] in dimension {k}"
                    )
        if node.children:
            for ch in node.children:
                visit(ch)

    visit(tree.root)


def _find_canonical(tree: CompressedQuadtree, level: int, idx: Tuple[int, ...]
                    ) -> Optional[EquadNode]:
    """The compressed node representing the canonical cell, or None if empty."""
    node = tree.root
    d = len(idx)
    while True:
        if node.level >= level:
            shift = node.level - level
            ok = all((node.idx[k] >> shift) == idx[k] for k in range(d))
            return node if ok else None
        shift = level - node.level
        ok = all(node.idx[k] == (idx[k] >> shift) for k in range(d))
        if not ok:
            return None
        if node.is_leaf:
            return None
        nxt = None
        for ch in node.children:
            if ch.level >= level:
                sh = ch.level - level
                if all((ch.idx[k] >> sh) == idx[k] for k in range(d)):
                    nxt = ch
                    break
            else:
                sh = level - ch.level
                if all(ch.idx[k] == (idx[k] >> sh) for k in range(d)):
                    nxt = ch
                    break
        if nxt is None:
            return None
        if nxt.level >= level:
            return nxt
        node = nxt


@dataclass
class CanonicalCell:
    """A canonical level-i cell together with its compressed node."""

    level: int
    idx: Tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray
    node: EquadNode


def cells_at_level_for_ball(tree: CompressedQuadtree, spec: DivergenceSpec, q,
                            r: float, prec: Optional[Precision] = None
                            ) -> List[CanonicalCell]:
    """All nonempty canonical cells at the c0-chosen level meeting B(q, r).

    The level is i = floor(log2(s / (c0 r))) clamped into the tree, so the
    returned cells have rooted side between r and c0^2 r (domain clipping
    aside). Index ranges per dimension come from a numeric ball bound
    followed by an exact clamp test at the edges.
    """
    if not r > 0:
        raise ValueError("ball radius must be positive")
    if prec is None:
        prec = Precision(1e-6)
    q = np.asarray(q, dtype=float)
    ratio = tree.s / (tree.c0 * r)
    if ratio <= 1.0:
        i = 0
    else:
        i = int(math.floor(math.log2(ratio)))
    i = max(0, min(i, tree.max_level))
    swap = _ball_swap(spec)
    left_side = spec.side is Side.LEFT and not spec.symmetric

    def dim_dist(k, x, qk):
        if left_side:
            return spec.dist1(k, qk, x)
        return spec.dist1(k, x, qk)

    ranges = []
    for k, gen in enumerate(spec.generators):
        a_k = float(tree.root_lo[k])
        b_k = float(tree.root_hi[k])
        qk = float(np.clip(q[k], a_k, b_k))
        try:
            blo = point_at_distance(gen, spec.kind_id, spec.rooted, qk, r, False,
                                    prec, lo=a_k, hi=b_k, c0=tree.c0, swap=swap)
        except Clipped as clip:
            blo = float(clip.endpoint)
        try:
            bhi = point_at_distance(gen, spec.kind_id, spec.rooted, qk, r, True,
                                    prec, lo=a_k, hi=b_k, c0=tree.c0, swap=swap)
        except Clipped as clip:
            bhi = float(clip.endpoint)
        width = (b_k - a_k) / (1 << i)
        k0 = int(np.clip(math.floor((blo - a_k) / width), 0, (1 << i) - 1))
        k1 = int(np.clip(math.floor((bhi - a_k) / width), 0, (1 << i) - 1))

        def intersects(kk: int) -> bool:
            u = a_k + kk * width
            v = a_k + (kk + 1) * width
            c = min(max(float(q[k]), u), v)
            return dim_dist(k, c, float(q[k])) <= r * (1.0 + prec.alpha)

        while k0 > 0 and intersects(k0 - 1):
            k0 -= 1
        while k0 <= k1 and not intersects(k0):
            k0 += 1
        while k1 < (1 << i) - 1 and intersects(k1 + 1):
            k1 += 1
        while k1 >= k0 and not intersects(k1):
            k1 -= 1
        if k1 < k0:
            return []
        occupied = tree.occupied_indices(k, i)
        sel = occupied[(occupied >= k0) & (occupied <= k1)]
        if sel.size == 0:
            return []
        ranges.append([int(v) for v in sel])

    cells: List[CanonicalCell] = []

    def product(k, acc):
        if k == spec.dim:
            idx = tuple(acc)
            node = _find_canonical(tree, i, idx)
            if node is not None:
                lo, hi = _node_box(tree.root_lo, tree.root_hi, i, idx)
                # per-dimension ranges are a product superset; keep only
                # cells whose composed clamp distance meets the ball
                if lower_bound_to_box(spec, q, lo, hi,
                                      validate=False) <= r * (1.0 + prec.alpha):
                    cells.append(CanonicalCell(i, idx, lo, hi, node))
            return
        for v in ranges[k]:
            product(k + 1, acc + [v])

    product(0, [])
    return cells


def query_fast(index, q, eps: float, collect_trace: bool = False
               ) -> Tuple[int, float, QueryStats]:
    """(1+eps)-approximate nearest neighbor through the precomputed tree.

    Same prune rule and shrink cutoff as the runtime quadtree; children are
    precomputed compressed nodes, so no witness queries are needed and no
    divergence bisections happen at query time.
    """
    spec: DivergenceSpec = index.spec
    tree: CompressedQuadtree = index.equad
    if tree is None:
        raise NotRooted("fast path not built")
    q = spec.check_point(q, "q")
    from .quadtree_search import clamp_eps

    eps = clamp_eps(eps)
    stats = QueryStats(strategy="fast")
    if collect_trace:
        stats.trace = []
    points = index.points
    mu = index.constants.mu

    best_id, best_d = rough_nn(index.ring, spec, q, stats)
    if best_d <= 0.0:
        return best_id, 0.0, stats

    prec = query_precision(eps, spec.dim)
    seeds = cells_at_level_for_ball(tree, spec, q, best_d, prec)
    queue = deque()
    seen = set()
    for cell in seeds:
        node = cell.node
        if id(node) in seen:
            continue
        seen.add(id(node))
        d_rep = spec.dist_query(points[node.rep], q)
        stats.distance_evals += 1
        if d_rep < best_d or (d_rep == best_d and node.rep < best_id):
            best_id, best_d = node.rep, d_rep
        queue.append(node)

    while queue:
        if best_d <= 0.0:
            break
        stats.max_queue = max(stats.max_queue, len(queue))
        node = queue.popleft()
        stats.cells_expanded += 1
        stats.max_depth = max(stats.max_depth, node.level)
        if node.is_leaf:
            dists = spec.dist_rows_query(points[node.ids], q)
            stats.distance_evals += dists.size
            row = int(np.argmin(dists))
            cand_id = int(node.ids[row])
            cand_d = float(dists[row])
            if cand_d < best_d or (cand_d == best_d and cand_id < best_id):
                best_id, best_d = cand_id, cand_d
            continue
        if node.max_side < shrink_cutoff(spec, mu, eps, best_d):
            continue
        for child in node.children:
            d_rep = spec.dist_query(points[child.rep], q)
            stats.distance_evals += 1
            if d_rep < best_d or (d_rep == best_d and child.rep < best_id):
                best_id, best_d = child.rep, d_rep
            lb = lower_bound_to_box(spec, q, child.box_lo, child.box_hi,
                                    validate=False)
            if lb >= (1.0 - 0.5 * eps) * best_d:
                if stats.trace is not None:
                    stats.trace.append(("prune", child.box_lo.copy(),
                                        child.box_hi.copy(), best_d))
                continue
            if not child.is_leaf and child.max_side < shrink_cutoff(spec, mu, eps,
                                                                    best_d):
                if stats.trace is not None:
                    stats.trace.append(("cutoff", child.box_lo.copy(),
                                        child.box_hi.copy(), best_d))
                continue
            queue.append(child)
    return best_id, best_d, stats

"""Ring-separator tree: the rough approximate-nearest-neighbor stage.

Each internal node stores a center point, an inner radius and an outer
radius a factor (1+t) larger. Points inside the outer ball go to the inner
child, points outside the inner ball go to the outer child, so the annulus
is duplicated into both and can never fall off the search path. A query is
one root-to-leaf descent plus an exhaustive scan of the leaf.

Balls over the data use the data-side orientation (left-balls for
right-sided queries), query distances the query side, which is what makes
the construction carry over to asymmetric divergences unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .divergence import DivergenceSpec
from .errors import EmptyInput

_BRUTE_FORCE_CAP = 2048
_SAMPLED_CENTER_CAP = 32


@dataclass(frozen=True)
class BallEstimate:
    """A center point id and a radius whose ball covers >= ceil(n/c) points."""

    center: int
    radius: float
    covered: int


@dataclass(frozen=True)
class RingTreeParams:
    t: Optional[float] = None
    c: Optional[float] = None
    seed: int = 0
    max_retries: Optional[int] = None
    leaf_size: int = 8

    def resolved_t(self, n: int) -> float:
        if self.t is not None:
            return self.t
        return 1.0 / max(1.0, math.log2(max(n, 2)))

    def resolved_retries(self, n: int) -> int:
        if self.max_retries is not None:
            return self.max_retries
        return 3 * max(1, math.ceil(math.log(max(n, 2))))


def default_split_constant(n: int, d: int, mu: float, symmetric: bool) -> float:
    """The analysis constant, capped: it is astronomically large for d >= 3
    and only affects balance and depth, never answer correctness."""
    exp = d if symmetric else 2 * d
    paper = 2.0 * (4.0 * (mu + 1.0) * math.sqrt(d)) ** exp
    return float(min(paper, max(8.0, n / 4.0)))


class RingNode:
    __slots__ = ("rep", "inner_radius", "outer_radius", "inner", "outer", "leaf_ids")

    def __init__(self, rep, inner_radius=0.0, outer_radius=0.0,
                 inner=None, outer=None, leaf_ids=None):
        self.rep = rep
        self.inner_radius = inner_radius
        self.outer_radius = outer_radius
        self.inner = inner
        self.outer = outer
        self.leaf_ids = leaf_ids

    @property
    def is_leaf(self) -> bool:
        return self.leaf_ids is not None


@dataclass
class RingTree:
    root: RingNode
    points: np.ndarray
    t: float
    c: float
    seed: int
    depth: int
    stored_ids: int
    n: int


def _kth_radius(dists: np.ndarray, k: int) -> float:
    k = min(k, dists.size)
    return float(np.partition(dists, k - 1)[k - 1])


def approx_min_ball(points: np.ndarray, spec: DivergenceSpec, c: float,
                    rng: np.random.Generator,
                    ids: Optional[np.ndarray] = None,
                    max_retries: int = 8) -> BallEstimate:
    """Randomized (mu+1)-approximation of the smallest ball covering n/c points.

    Samples centers with probability c/n, takes each sampled center's
    ceil(n/c)-th smallest data-side distance by selection, and keeps the
    minimizer. Falls back to scanning every center, so the result is total.
    """
    points = np.asarray(points, dtype=float)
    if ids is None:
        ids = np.arange(points.shape[0])
    n = ids.size
    if n == 0:
        raise EmptyInput("approx_min_ball needs at least one point")
    c = float(min(max(c, 1.0), n))
    k = max(1, math.ceil(n / c))
    sub = points[ids]

    def radius_for(center_row: int) -> float:
        dists = spec.dist_rows_data(sub[center_row], sub)
        return _kth_radius(dists, k)

    candidate_rows: Optional[np.ndarray] = None
    for _ in range(max_retries):
        mask = rng.random(n) < c / n
        if np.any(mask):
            candidate_rows = np.nonzero(mask)[0]
            break
    if candidate_rows is None:
        candidate_rows = np.arange(n)
    if candidate_rows.size > _SAMPLED_CENTER_CAP:
        # keep build time near-linear per node; a worse ball only costs
        # balance (caught by the retry loop), never answer correctness
        candidate_rows = rng.choice(candidate_rows, _SAMPLED_CENTER_CAP,
                                    replace=False)
        candidate_rows.sort()

    best_row, best_radius = -1, math.inf
    for row in candidate_rows:
        rad = radius_for(int(row))
        if rad < best_radius or (rad == best_radius and
                                 (best_row < 0 or ids[row] < ids[best_row])):
            best_row, best_radius = int(row), rad
    dists = spec.dist_rows_data(sub[best_row], sub)
    covered = int(np.count_nonzero(dists <= best_radius))
    return BallEstimate(center=int(ids[best_row]), radius=best_radius, covered=covered)


def _slab_split(spec, points, ids, ball: BallEstimate, t: float
                ) -> Optional[Tuple[float, float, np.ndarray, np.ndarray]]:
    """Choose the emptiest geometric slab in [r1, 2 r1] as the separating ring."""
    r1 = ball.radius
    if not r1 > 0:
        return None
    dists = spec.dist_rows_data(points[ball.center], points[ids])
    m = max(1, math.ceil(math.log(2.0) / math.log1p(t)))
    bounds = r1 * (1.0 + t) ** np.arange(m + 1)
    counts = np.searchsorted(np.sort(dists), bounds, side="right")
    slab_counts = counts[1:] - counts[:-1]
    j = int(np.argmin(slab_counts))
    r_v = float(bounds[j])
    r_out = float(bounds[j + 1])
    inner = ids[dists <= r_out]
    outer = ids[dists > r_v]
    return r_v, r_out, inner, outer


def _median_split(spec, points, ids, center: int, t: float
                  ) -> Optional[Tuple[float, float, np.ndarray, np.ndarray]]:
    """Last-resort ring at a radius that guarantees both children shrink."""
    dists = spec.dist_rows_data(points[center], points[ids])
    values = np.unique(dists)
    if values.size < 2:
        return None
    n = ids.size
    best = None
    best_cost = n + 1
    for r_v in values[:-1]:
        r_out = (1.0 + t) * r_v
        inner_ct = int(np.count_nonzero(dists <= r_out))
        outer_ct = int(np.count_nonzero(dists > r_v))
        if inner_ct >= n or outer_ct >= n:
            continue
        cost = max(inner_ct, outer_ct)
        if cost < best_cost:
            best_cost = cost
            best = (float(r_v), float(r_out))
    if best is None:
        return None
    r_v, r_out = best
    return r_v, r_out, ids[dists <= r_out], ids[dists > r_v]


def build(points: np.ndarray, spec: DivergenceSpec, params: RingTreeParams,
          mu: float = 1.5) -> RingTree:
    """Build the ring tree by recursive ring separation.

    Retries the randomized ball a few times per node, then scans all centers
    (small nodes only), then falls back to a balance-seeking median ring;
    nodes that cannot be separated at all become leaves, which queries scan
    exhaustively, so correctness never depends on the split quality.
    """
    points = spec.check_points(points)
    n = points.shape[0]
    t = params.resolved_t(n)
    c = params.c if params.c is not None else default_split_constant(
        n, spec.dim, mu, spec.symmetric)
    retries = params.resolved_retries(n)
    rng = np.random.default_rng(params.seed)
    leaf_size = max(1, params.leaf_size)

    depth_seen = 0
    stored = 0

    def split_node(ids: np.ndarray):
        n_node = ids.size
        c_node = float(np.clip(c, 2.0, max(2.0, n_node / 2.0)))
        limit = (1.0 - 1.0 / c_node) * n_node
        attempt_balls: List[BallEstimate] = []
        for _ in range(retries):
            ball = approx_min_ball(points, spec, c_node, rng, ids=ids)
            attempt_balls.append(ball)
            split = _slab_split(spec, points, ids, ball, t)
            if split is not None and split[2].size <= limit and split[3].size <= limit:
                return ball, split
        if n_node <= _BRUTE_FORCE_CAP:
            k = max(2, math.ceil(n_node / c_node))
            best_center, best_radius = -1, math.inf
            sub = points[ids]
            for row in range(n_node):
                rad = _kth_radius(spec.dist_rows_data(sub[row], sub), k)
                if rad < best_radius:
                    best_center, best_radius = int(ids[row]), rad
            ball = BallEstimate(best_center, best_radius, 0)
            split = _slab_split(spec, points, ids, ball, t)
            if split is not None and split[2].size <= limit and split[3].size <= limit:
                return ball, split
        center = attempt_balls[0].center if attempt_balls else int(ids[0])
        split = _median_split(spec, points, ids, center, t)
        if split is not None and split[2].size < n_node and split[3].size < n_node:
            return BallEstimate(center, split[0], 0), split
        return None

    # Iterative construction: lopsided splits can make the tree deep.
    holder = RingNode(rep=-1)
    stack = [(np.arange(n), 1, holder, "inner")]
    while stack:
        ids, depth, parent, slot = stack.pop()
        depth_seen = max(depth_seen, depth)
        result = None if ids.size <= leaf_size else split_node(ids)
        if result is None:
            stored += ids.size
            setattr(parent, slot, RingNode(rep=int(ids[0]), leaf_ids=np.sort(ids)))
            continue
        ball, (r_v, r_out, inner_ids, outer_ids) = result
        node = RingNode(rep=ball.center, inner_radius=r_v, outer_radius=r_out)
        setattr(parent, slot, node)
        stack.append((outer_ids, depth + 1, node, "outer"))
        stack.append((inner_ids, depth + 1, node, "inner"))
    root = holder.inner
    return RingTree(root=root, points=points, t=t, c=float(c), seed=params.seed,
                    depth=depth_seen, stored_ids=stored, n=n)


def rough_nn(tree: RingTree, spec: DivergenceSpec, q,
             stats=None) -> Tuple[int, float]:
    """Single root-to-leaf descent; returns (point id, query-side distance)."""
    q = spec.check_point(q, "q")
    node = tree.root
    best_id = -1
    best_d = math.inf
    half_t = 0.5 * tree.t
    evals = 0
    while not node.is_leaf:
        d_rep = spec.dist_query(tree.points[node.rep], q)
        evals += 1
        if d_rep < best_d or (d_rep == best_d and node.rep < best_id):
            best_id, best_d = node.rep, d_rep
        node = node.inner if d_rep < (1.0 + half_t) * node.inner_radius else node.outer
    leaf_pts = tree.points[node.leaf_ids]
    dists = spec.dist_rows_query(leaf_pts, q)
    evals += dists.size
    row = int(np.argmin(dists))
    if dists[row] < best_d or (dists[row] == best_d and int(node.leaf_ids[row]) < best_id):
        best_id, best_d = int(node.leaf_ids[row]), float(dists[row])
    if stats is not None:
        stats.distance_evals += evals
    return best_id, best_d

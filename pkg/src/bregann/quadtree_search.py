"""Runtime divergence-quadtree search for (1+eps)-approximate neighbors.

The query seeds a FIFO queue with at most 2^d orthant cubes covering the
rough-neighbor ball, then repeatedly bisects cells per dimension at
divergence-balanced points. A child survives only if the range reporter
certifies it nonempty (returning its representative) and its clamp-composed
lower bound stays below (1 - eps/2) of the current best distance; that
prune keeps the (1+eps) guarantee unconditional. A curvature-estimate
cutoff stops bisecting cells too small to matter, which bounds the depth
without affecting correctness: their representatives were already scored.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .divergence import DivergenceSpec, Side, lower_bound_to_box
from .errors import Clipped
from .numeric import Precision, bisect_interval, point_at_distance, query_precision
from .ring_tree import rough_nn

MU_SAFETY = 1.05


@dataclass
class QueryStats:
    """Observability counters for one query."""

    cells_expanded: int = 0
    max_depth: int = 0
    witness_queries: int = 0
    distance_evals: int = 0
    max_queue: int = 0
    strategy: str = ""
    trace: Optional[list] = None


@dataclass
class Cell:
    """An axis-parallel box with its witness representative.

    Boxes are closed; half-open composition is realized by nudging interior
    high edges down one ulp at construction time, so a boundary point is
    witnessed by exactly one sibling. ``corner`` is the low corner, whose
    data-side ball of radius sqrt(d) * max_side covers the cell.
    """

    lo: np.ndarray
    hi: np.ndarray
    max_side: float
    depth: int = 0
    rep: Optional[int] = None

    @property
    def corner(self) -> np.ndarray:
        return self.lo


def _cell_max_side(spec: DivergenceSpec, lo: np.ndarray, hi: np.ndarray) -> float:
    side = 0.0
    for k in range(spec.dim):
        side = max(side, spec.dist1(k, float(lo[k]), float(hi[k])))
    return side


def _ball_swap(spec: DivergenceSpec) -> bool:
    # Ball membership is query-side: right-sided queries use D(x, q) <= r,
    # so the per-dimension march measures distance with x in first position.
    return not (spec.side is Side.LEFT and not spec.symmetric)


def cover_ball_with_orthant_cubes(spec: DivergenceSpec, q, r: float,
                                  prec: Precision, c0: Optional[float] = None
                                  ) -> List[Cell]:
    """At most 2^d cubes of per-dimension side r covering the query ball.

    Cubes clip at the domain boundary; the clipped union still covers the
    ball's intersection with the domain, which is where all points live.
    """
    if not r > 0:
        raise ValueError("cover radius must be positive")
    q = np.asarray(q, dtype=float)
    swap = _ball_swap(spec)
    per_dim: List[List[Tuple[float, float]]] = []
    for k, gen in enumerate(spec.generators):
        dlo = float(spec.domain.lo[k])
        dhi = float(spec.domain.hi[k])
        qk = float(q[k])
        try:
            above = point_at_distance(gen, spec.kind_id, spec.rooted, qk, r, True,
                                      prec, dlo, dhi, c0=c0, swap=swap)
        except Clipped as clip:
            above = float(clip.endpoint)
        try:
            below = point_at_distance(gen, spec.kind_id, spec.rooted, qk, r, False,
                                      prec, dlo, dhi, c0=c0, swap=swap)
        except Clipped as clip:
            below = float(clip.endpoint)
        intervals = []
        low_hi = np.nextafter(qk, -math.inf)
        if below <= low_hi:
            intervals.append((below, low_hi))
        if qk <= above:
            intervals.append((qk, above))
        per_dim.append(intervals)

    cells: List[Cell] = []
    def product(k, lo_acc, hi_acc):
        if k == spec.dim:
            lo = np.array(lo_acc)
            hi = np.array(hi_acc)
            cells.append(Cell(lo, hi, _cell_max_side(spec, lo, hi), depth=0))
            return
        for u, v in per_dim[k]:
            product(k + 1, lo_acc + [u], hi_acc + [v])

    product(0, [], [])
    return cells


def bisect_cell(spec: DivergenceSpec, cell: Cell, prec: Precision) -> List[Cell]:
    """Split each side at its divergence-balanced point; children partition
    the parent half-openly. Dimensions too narrow to split are kept whole;
    returns [] when no dimension can split."""
    per_dim: List[List[Tuple[float, float]]] = []
    any_split = False
    for k, gen in enumerate(spec.generators):
        lo = float(cell.lo[k])
        hi = float(cell.hi[k])
        mid = bisect_interval(gen, spec.kind_id, spec.rooted, lo, hi, prec)
        low_hi = np.nextafter(mid, -math.inf)
        if lo < mid < hi and low_hi >= lo:
            per_dim.append([(lo, low_hi), (mid, hi)])
            any_split = True
        else:
            per_dim.append([(lo, hi)])
    if not any_split:
        return []

    children: List[Cell] = []

    def product(k, lo_acc, hi_acc):
        if k == spec.dim:
            lo = np.array(lo_acc)
            hi = np.array(hi_acc)
            children.append(
                Cell(lo, hi, _cell_max_side(spec, lo, hi), depth=cell.depth + 1)
            )
            return
        for u, v in per_dim[k]:
            product(k + 1, lo_acc + [u], hi_acc + [v])

    product(0, [], [])
    return children


def shrink_cutoff(spec: DivergenceSpec, mu: float, eps: float, d_near: float) -> float:
    """Side length (kind units) below which a cell cannot contain a point
    closer than (1 - eps/2) * d_near, given the defect constant.

    For raw kinds the defect constant lives in rooted units, so the bound
    is computed there and squared back.
    """
    mu_safe = MU_SAFETY * mu
    sqrt_d = math.sqrt(spec.dim)
    if spec.rooted:
        thr = eps * d_near / (2.0 * mu_safe * sqrt_d)
        if not spec.symmetric:
            thr /= mu_safe + 1.0
        return thr
    rooted_near = math.sqrt(d_near)
    thr = eps * rooted_near / (4.0 * mu_safe * sqrt_d)
    if not spec.symmetric:
        thr /= mu_safe + 1.0
    return thr * thr


def clamp_eps(eps: float) -> float:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps > 1.0:
        warnings.warn("eps > 1 clamped to 1; the pruning argument needs eps <= 1")
        return 1.0
    return float(eps)


def query_approx_nn(index, q, eps: float, collect_trace: bool = False
                    ) -> Tuple[int, float, QueryStats]:
    """(1+eps)-approximate nearest neighbor via runtime quadtree refinement."""
    spec: DivergenceSpec = index.spec
    q = spec.check_point(q, "q")
    eps = clamp_eps(eps)
    prec = query_precision(eps, spec.dim)
    stats = QueryStats(strategy="generic")
    if collect_trace:
        stats.trace = []
    points = index.points
    reporter = index.reporter
    mu = index.constants.mu
    c0 = index.constants.c0

    best_id, best_d = rough_nn(index.ring, spec, q, stats)
    if best_d <= 0.0:
        return best_id, 0.0, stats

    queue = deque()
    for cell in cover_ball_with_orthant_cubes(spec, q, best_d, prec, c0=c0):
        stats.witness_queries += 1
        wid = reporter.witness_in_box(cell.lo, cell.hi)
        if wid is None:
            continue
        cell.rep = wid
        d_rep = spec.dist_query(points[wid], q)
        stats.distance_evals += 1
        if d_rep < best_d or (d_rep == best_d and wid < best_id):
            best_id, best_d = wid, d_rep
        queue.append(cell)

    while queue:
        stats.max_queue = max(stats.max_queue, len(queue))
        curr = queue.popleft()
        stats.cells_expanded += 1
        stats.max_depth = max(stats.max_depth, curr.depth)
        if curr.max_side < shrink_cutoff(spec, mu, eps, best_d):
            continue
        for child in bisect_cell(spec, curr, prec):
            lb = lower_bound_to_box(spec, q, child.lo, child.hi, validate=False)
            if lb >= (1.0 - 0.5 * eps) * best_d:
                if stats.trace is not None:
                    stats.trace.append(("prune", child.lo.copy(), child.hi.copy(),
                                        best_d))
                continue
            if curr.rep is not None and np.all(points[curr.rep] >= child.lo) and \
                    np.all(points[curr.rep] <= child.hi):
                wid = curr.rep
            else:
                stats.witness_queries += 1
                wid = reporter.witness_in_box(child.lo, child.hi)
            if wid is None:
                continue
            child.rep = wid
            d_rep = spec.dist_query(points[wid], q)
            stats.distance_evals += 1
            if d_rep < best_d or (d_rep == best_d and wid < best_id):
                best_id, best_d = wid, d_rep
            if child.max_side < shrink_cutoff(spec, mu, eps, best_d):
                if stats.trace is not None:
                    stats.trace.append(("cutoff", child.lo.copy(), child.hi.copy(),
                                        best_d))
                continue
            queue.append(child)
    return best_id, best_d, stats

"""1-D numeric procedures: distance marching, balanced bisection, gridding.

All three operate on a single generator with an explicit distance flavor
(primal/symmetrized, raw/rooted) and are pure functions of their inputs.
The marching loop (``point_at_distance``) is the hot kernel behind cube
covers and interval grids, so it dispatches to the compiled backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _backend
from ._backend import MARCH_CLIPPED, MARCH_NONFINITE
from .divergence import _d2phi_arr
from .errors import Clipped, NonFinite
from .generators import ScalarGenerator

DEFAULT_ALPHA = 1e-6


@dataclass(frozen=True)
class Precision:
    """Relative tolerance for distance placement and bisection."""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


def query_precision(eps: float, dim: int) -> Precision:
    """Tolerance used inside query paths: keeps the (1+alpha)^d distortion
    well under eps/4."""
    return Precision(alpha=min(1e-3, eps / (8.0 * dim)))


@dataclass
class Breakpoints:
    """Sorted breakpoints of one interval with the intended per-piece step."""

    points: List[float]
    target_step: float

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("breakpoints must hold at least the two endpoints")
        for u, v in zip(self.points, self.points[1:]):
            if not u < v:
                raise ValueError("breakpoints must be strictly increasing")

    @property
    def piece_count(self) -> int:
        return len(self.points) - 1


@dataclass
class MarchStats:
    """Optional instrumentation for the marching loop."""

    iterations: int = 0


def quick_c0(gen: ScalarGenerator, lo: float, hi: float, grid: int = 65) -> float:
    """Cheap curvature-ratio estimate used to seed the march initializer.

    An underestimate only costs extra bracketing doublings, so a coarse
    grid is enough here.
    """
    xs = np.linspace(lo, hi, grid)
    vals = _d2phi_arr(gen, xs)
    vmax = float(np.max(vals))
    vmin = float(np.min(vals))
    if not (vmin > 0 and math.isfinite(vmax)):
        raise NonFinite("phi'' non-positive or non-finite on the interval")
    return math.sqrt(vmax / vmin)


def point_at_distance(gen: ScalarGenerator, kind_id: int, rooted: bool, q: float,
                      r: float, above: bool, prec: Precision,
                      lo: float, hi: float, c0: Optional[float] = None,
                      swap: bool = False, stats: Optional[MarchStats] = None) -> float:
    """Point x with |D(q, x) - r| <= alpha * r on the chosen side of q.

    ``lo``/``hi`` bound the march (domain or grid interval). Raises
    :class:`Clipped` with the endpoint when no point at distance
    (1 - alpha) r exists before it. ``swap`` measures D(x, q) instead,
    which asymmetric ball covers need.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    if not lo <= q <= hi:
        raise ValueError(f"q={q} outside march interval [{lo}, {hi}]")
    if c0 is None:
        c0 = quick_c0(gen, lo, hi)
    x, iters, status = _backend.march(
        gen, kind_id, rooted, swap, q, r, above, prec.alpha, c0, lo, hi
    )
    if stats is not None:
        stats.iterations = iters
    if status == MARCH_CLIPPED:
        raise Clipped(x)
    if status == MARCH_NONFINITE:
        raise NonFinite(f"generator evaluated non-finite near x={x}")
    return x


def bisect_interval(gen: ScalarGenerator, kind_id: int, rooted: bool,
                    a: float, b: float, prec: Precision) -> float:
    """Balance point x of [a, b]: D(a, x) and D(x, b) agree within (1 +- alpha).

    Degenerate intervals (b - a underflow) return ``a``. Distances are
    taken left-to-right, which is what the asymmetric cell bisection rule
    requires.
    """
    if not a < b:
        return a
    x, _ = _backend.balance(gen, kind_id, rooted, a, b, prec.alpha)
    return x


def grid_interval(gen: ScalarGenerator, kind_id: int, rooted: bool,
                  a: float, b: float, eps: float, prec: Precision,
                  c0: Optional[float] = None) -> Breakpoints:
    """Greedy left-to-right packing of [a, b] into pieces of distance eps*s.

    s = D(a, b). Every interior piece has distance eps*s within the
    tolerance; the final piece may be shorter. Running into ``b`` is the
    terminal case of the marching clip contract.
    """
    if not a < b:
        raise ValueError("grid_interval requires a < b")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must be in (0, 1]")
    s = _backend.d1_scalar(gen, kind_id, rooted, a, b)
    if not s > 0.0:
        raise ValueError("interval has zero distance")
    if c0 is None:
        c0 = quick_c0(gen, a, b)
    r = eps * s
    points = [a]
    x = a
    while True:
        try:
            nxt = point_at_distance(
                gen, kind_id, rooted, x, r, True, prec, lo=x, hi=b, c0=c0
            )
        except Clipped as clip:
            points.append(float(clip.endpoint))
            break
        if nxt >= b or nxt <= x:
            points.append(b)
            break
        points.append(nxt)
        x = nxt
    return Breakpoints(points=points, target_step=r)

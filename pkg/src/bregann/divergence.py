"""Decomposable divergences over box domains, plus their structural constants.

A :class:`DivergenceSpec` bundles one scalar generator per coordinate with a
distance flavor: primal (asymmetric) or symmetrized, raw or square-rooted,
and a query side for the asymmetric case. The two constants that drive the
search structures are estimated here:

* ``mu``  -- the triangle-defect constant: how much |D(a,q) - D(b,q)| can
  exceed D(a,b). Estimated by sampling random triples plus a dense
  per-dimension scan of the coincident-pair limit, whose closed form only
  involves phi' and phi''.
* ``c0``  -- per-dimension curvature ratio max over i of
  sqrt(max phi_i'' / min phi_i'') on the domain, found by a grid scan
  refined with golden-section.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _backend
from ._backend import KIND_PRIMAL, KIND_SYMMETRIZED
from .errors import DomainViolation, NotRooted
from .generators import GeneratorKind, ScalarGenerator, generator_by_name


class Kind(enum.Enum):
    PRIMAL = "primal"
    SYMMETRIZED = "symmetrized"


class Side(enum.Enum):
    RIGHT = "right"
    LEFT = "left"


_KIND_ID = {Kind.PRIMAL: KIND_PRIMAL, Kind.SYMMETRIZED: KIND_SYMMETRIZED}


@dataclass(frozen=True)
class DomainBox:
    """Axis-parallel box the points and queries must live in."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError("domain lo/hi must be equal-length 1-D vectors")
        if not np.all(lo < hi):
            raise ValueError("domain requires lo[i] < hi[i] in every dimension")

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))


@dataclass(frozen=True)
class StructuralConstants:
    """Point estimates of the search constants for one spec and domain."""

    mu: float
    c0: float
    sample_count: int
    seed: int

    def __post_init__(self):
        if not self.mu >= 1.0:
            raise ValueError(f"mu must be >= 1, got {self.mu}")
        if not self.c0 >= 1.0:
            raise ValueError(f"c0 must be >= 1, got {self.c0}")


class DivergenceSpec:
    """d scalar generators + domain + distance flavor.

    Immutable after construction; all evaluators are safe for concurrent
    use. ``side`` picks the asymmetric query orientation and is ignored
    for symmetrized kinds.
    """

    def __init__(self, generators: Sequence[ScalarGenerator], domain: DomainBox,
                 kind: Kind = Kind.SYMMETRIZED, rooted: bool = True,
                 side: Side = Side.RIGHT):
        self.generators = tuple(generators)
        self.domain = domain
        self.kind = kind
        self.rooted = bool(rooted)
        self.side = side
        if len(self.generators) != domain.dim:
            raise ValueError(
                f"{len(self.generators)} generators for a {domain.dim}-dimensional domain"
            )
        for k, gen in enumerate(self.generators):
            vlo, vhi = gen.validity
            if not (vlo < domain.lo[k] and domain.hi[k] < vhi):
                raise ValueError(
                    f"domain interval [{domain.lo[k]}, {domain.hi[k]}] of dimension {k} "
                    f"not strictly inside generator validity ({vlo}, {vhi})"
                )
        self.kind_id = _KIND_ID[kind]
        self.all_builtin = all(g.gen_id >= 0 for g in self.generators)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def symmetric(self) -> bool:
        return self.kind is Kind.SYMMETRIZED

    # -- validation ---------------------------------------------------------

    def check_point(self, x, what: str = "point"):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainViolation(f"{what} has shape {x.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(x)):
            raise DomainViolation(f"{what} has non-finite coordinates")
        if not self.domain.contains_point(x):
            raise DomainViolation(f"{what} {x.tolist()} outside domain")
        return x

    def check_points(self, P, what: str = "points"):
        P = np.ascontiguousarray(P, dtype=float)
        if P.ndim != 2 or P.shape[1] != self.dim:
            raise DomainViolation(f"{what} must be (n, {self.dim}), got {P.shape}")
        ok = np.all(np.isfinite(P), axis=1)
        ok &= np.all(P >= self.domain.lo, axis=1) & np.all(P <= self.domain.hi, axis=1)
        if not np.all(ok):
            bad = np.nonzero(~ok)[0]
            raise DomainViolation(
                f"{what} rows outside domain: {bad[:20].tolist()}", rows=bad.tolist()
            )
        return P

    # -- evaluators (no domain checks; callers validate at the boundary) ----

    def raw1(self, dim: int, x: float, y: float) -> float:
        """Un-rooted per-coordinate divergence D_k(x, y)."""
        return _backend.d1_scalar(self.generators[dim], self.kind_id, False, x, y)

    def dist1(self, dim: int, x: float, y: float) -> float:
        """Per-coordinate distance in kind units (rooted if the spec is)."""
        return _backend.d1_scalar(self.generators[dim], self.kind_id, self.rooted, x, y)

    def dist_point(self, x, y) -> float:
        """Full-dimensional D(x, y) in kind units."""
        acc = 0.0
        for k, gen in enumerate(self.generators):
            acc += _backend.d1_scalar(gen, self.kind_id, False, x[k], y[k])
        if acc < 0.0:
            acc = 0.0
        return math.sqrt(acc) if self.rooted else acc

    def dist_query(self, p, q) -> float:
        """Query-side distance from data point p to query q."""
        if self.side is Side.LEFT and not self.symmetric:
            return self.dist_point(q, p)
        return self.dist_point(p, q)

    def dist_data(self, m, x) -> float:
        """Data-side (ball) distance from a center m to a point x."""
        if self.side is Side.LEFT and not self.symmetric:
            return self.dist_point(x, m)
        return self.dist_point(m, x)

    def dist_rows_query(self, P, q) -> np.ndarray:
        """Query-side distances from every row of P to q."""
        swap = self.side is Side.LEFT and not self.symmetric
        return _backend.dist_rows(self.generators, self.kind_id, self.rooted, P, q, swap)

    def dist_rows_data(self, m, P) -> np.ndarray:
        """Data-side distances from center m to every row of P."""
        swap = not (self.side is Side.LEFT and not self.symmetric)
        return _backend.dist_rows(self.generators, self.kind_id, self.rooted, P, m, swap)

    def dist_pairs(self, X, Y) -> np.ndarray:
        return _backend.dist_pairs(self.generators, self.kind_id, self.rooted, X, Y)


def eval_divergence(spec: DivergenceSpec, x, y) -> float:
    """D(x, y) with domain validation; zero iff x == y."""
    x = spec.check_point(x, "x")
    y = spec.check_point(y, "y")
    return spec.dist_point(x, y)


def lower_bound_to_box(spec: DivergenceSpec, q, box_lo, box_hi,
                       validate: bool = True) -> float:
    """Lower bound on the query-side distance from q to any point in the box.

    Per coordinate the closest admissible value is q_k clamped into the box,
    by monotonicity; contributions compose per decomposability. O(d).
    """
    if validate:
        q = spec.check_point(q, "q")
        box_lo = np.asarray(box_lo, dtype=float)
        box_hi = np.asarray(box_hi, dtype=float)
        if np.any(box_lo < spec.domain.lo - 1e-12) or np.any(box_hi > spec.domain.hi + 1e-12):
            raise DomainViolation("box not contained in domain")
        if np.any(box_lo > box_hi):
            raise DomainViolation("box has lo > hi")
    left_side = spec.side is Side.LEFT and not spec.symmetric
    acc = 0.0
    for k in range(spec.dim):
        qk = q[k]
        if qk < box_lo[k]:
            c = box_lo[k]
        elif qk > box_hi[k]:
            c = box_hi[k]
        else:
            continue
        if left_side:
            acc += spec.raw1(k, qk, c)
        else:
            acc += spec.raw1(k, c, qk)
    if acc < 0.0:
        acc = 0.0
    return math.sqrt(acc) if spec.rooted else acc


# ---------------------------------------------------------------------------
# structural constants


def _dphi_arr(gen: ScalarGenerator, x: np.ndarray) -> np.ndarray:
    gid = gen.gen_id
    if gid == 0:
        return 2.0 * x
    if gid == 1:
        return np.log(x) + 1.0
    if gid == 2:
        return -1.0 / x
    return np.vectorize(gen.dphi, otypes=[float])(x)


def _d2phi_arr(gen: ScalarGenerator, x: np.ndarray) -> np.ndarray:
    gid = gen.gen_id
    if gid == 0:
        return np.full_like(x, 2.0)
    if gid == 1:
        return 1.0 / x
    if gid == 2:
        return 1.0 / (x * x)
    return np.vectorize(gen.d2phi, otypes=[float])(x)


def _raw_col(gen: ScalarGenerator, kind_id: int, x, y) -> np.ndarray:
    from . import _kernels_py

    return np.maximum(_kernels_py.d1_column(gen, kind_id, x, y), 0.0)


def _mu_limit_grid(gen: ScalarGenerator, kind_id: int, lo: float, hi: float,
                   grid: int = 1024) -> float:
    """Supremum of the coincident-pair limit of the defect ratio on a grid.

    For the symmetrized rooted distance the limit at (a, q) is
    (sqrt(T) + 1/sqrt(T)) / 2 with T = (phi'(q) - phi'(a)) / (phi''(a) (q - a)).
    For the primal rooted distance the right- and left-sided limits reduce to
    |phi'(q) - phi'(a)| / sqrt(2 D(a,q) phi''(a)) and
    sqrt(phi''(a)) |q - a| / sqrt(2 D(q,a)) respectively.
    """
    xs = np.linspace(lo, hi, grid)
    a, q = np.meshgrid(xs, xs, indexing="ij")
    mask = a != q
    a, q = a[mask], q[mask]
    dpa = _dphi_arr(gen, a)
    dpq = _dphi_arr(gen, q)
    d2a = _d2phi_arr(gen, a)
    if kind_id == KIND_SYMMETRIZED:
        T = (dpq - dpa) / (d2a * (q - a))
        T = T[T > 0]
        s = np.sqrt(T)
        return float(np.max(0.5 * (s + 1.0 / s)))
    breg_aq = _raw_col(gen, KIND_PRIMAL, a, q)
    breg_qa = _raw_col(gen, KIND_PRIMAL, q, a)
    good = breg_aq > 0
    g_right = np.abs(dpq - dpa)[good] / np.sqrt(2.0 * breg_aq[good] * d2a[good])
    good_l = breg_qa > 0
    g_left = np.sqrt(d2a[good_l]) * np.abs(q - a)[good_l] / np.sqrt(2.0 * breg_qa[good_l])
    return float(max(np.max(g_right), np.max(g_left)))


def _mu_triple_grid(gen: ScalarGenerator, kind_id: int, lo: float, hi: float,
                    grid: int = 48) -> float:
    """Max defect ratio over a dense grid of 1-D triples (a, b, q)."""
    xs = np.linspace(lo, hi, grid)
    a, b, q = (v.ravel() for v in np.meshgrid(xs, xs, xs, indexing="ij"))
    if kind_id == KIND_SYMMETRIZED:
        daq = np.sqrt(_raw_col(gen, kind_id, a, q))
        dbq = np.sqrt(_raw_col(gen, kind_id, b, q))
        dab = np.sqrt(_raw_col(gen, kind_id, a, b))
        mask = dab > 0
        return float(np.max(np.abs(daq - dbq)[mask] / dab[mask]))
    daq = np.sqrt(_raw_col(gen, KIND_PRIMAL, a, q))
    dbq = np.sqrt(_raw_col(gen, KIND_PRIMAL, b, q))
    dba = np.sqrt(_raw_col(gen, KIND_PRIMAL, b, a))
    dqa = np.sqrt(_raw_col(gen, KIND_PRIMAL, q, a))
    dqb = np.sqrt(_raw_col(gen, KIND_PRIMAL, q, b))
    dab = np.sqrt(_raw_col(gen, KIND_PRIMAL, a, b))
    mask_r = dba > 0
    best = np.max(np.abs(daq - dbq)[mask_r] / dba[mask_r])
    mask_l = dab > 0
    best = max(best, np.max(np.abs(dqa - dqb)[mask_l] / dab[mask_l]))
    return float(best)


def estimate_mu(spec: DivergenceSpec, samples: int = 20000, seed: int = 0) -> float:
    """Point estimate of the triangle-defect constant over the domain.

    Combines (a) random d-dimensional triples with side-appropriate defect
    ratios and (b) per-dimension dense scans of the coincident-pair limit
    and of 1-D triples; the d-dimensional constant equals the per-dimension
    max by the Cauchy-Schwarz lifting argument. Raw (un-rooted) divergences
    admit no finite constant, hence the rooted precondition.
    """
    if not spec.rooted:
        raise NotRooted("defect constant is only finite for rooted distances")
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    rng = np.random.default_rng(seed)
    lo, hi = spec.domain.lo, spec.domain.hi
    d = spec.dim

    A = rng.uniform(lo, hi, size=(samples, d))
    B = rng.uniform(lo, hi, size=(samples, d))
    Q = rng.uniform(lo, hi, size=(samples, d))
    best = 1.0
    if spec.symmetric:
        num = np.abs(spec.dist_pairs(A, Q) - spec.dist_pairs(B, Q))
        den = spec.dist_pairs(A, B)
        mask = den > 0
        if np.any(mask):
            best = max(best, float(np.max(num[mask] / den[mask])))
    else:
        num_r = np.abs(spec.dist_pairs(A, Q) - spec.dist_pairs(B, Q))
        den_r = spec.dist_pairs(B, A)
        num_l = np.abs(spec.dist_pairs(Q, A) - spec.dist_pairs(Q, B))
        den_l = spec.dist_pairs(A, B)
        for num, den in ((num_r, den_r), (num_l, den_l)):
            mask = den > 0
            if np.any(mask):
                best = max(best, float(np.max(num[mask] / den[mask])))

    for k, gen in enumerate(spec.generators):
        best = max(best, _mu_limit_grid(gen, spec.kind_id, lo[k], hi[k]))
        best = max(best, _mu_triple_grid(gen, spec.kind_id, lo[k], hi[k]))
    return best


def _golden_min(f, a: float, b: float, rel_tol: float = 1e-9) -> float:
    """Golden-section minimum of f on [a, b]; returns the minimal value."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    scale = max(1.0, abs(a), abs(b))
    while (b - a) > rel_tol * scale:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return min(f1, f2, f(0.5 * (a + b)))


def compute_c0(spec: DivergenceSpec, grid: int = 4096) -> float:
    """Max over dimensions of sqrt(max phi'' / min phi'') on the domain.

    Grid scan refined by golden-section around the grid extrema; exact for
    monotone or constant curvature since the grid includes the endpoints.
    """
    best = 1.0
    for k, gen in enumerate(spec.generators):
        lo, hi = spec.domain.lo[k], spec.domain.hi[k]
        xs = np.linspace(lo, hi, grid)
        vals = _d2phi_arr(gen, xs)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"phi'' must be finite and positive on dimension {k}")
        imax = int(np.argmax(vals))
        imin = int(np.argmin(vals))
        f = gen.d2phi
        a_max = xs[max(imax - 1, 0)]
        b_max = xs[min(imax + 1, grid - 1)]
        hi_val = max(float(vals[imax]), -_golden_min(lambda x: -f(x), a_max, b_max))
        a_min = xs[max(imin - 1, 0)]
        b_min = xs[min(imin + 1, grid - 1)]
        lo_val = min(float(vals[imin]), _golden_min(f, a_min, b_min))
        best = max(best, math.sqrt(hi_val / lo_val))
    return best


def estimate_constants(spec: DivergenceSpec, samples: int = 20000,
                       seed: int = 0) -> StructuralConstants:
    """Estimate both constants; mu falls back to the rooted twin for raw kinds.

    Raw divergences have no finite defect constant, but their search paths
    still want a mu for bookkeeping; the rooted version of the same spec is
    the meaningful surrogate there.
    """
    probe = spec
    if not spec.rooted:
        probe = DivergenceSpec(spec.generators, spec.domain, spec.kind, True, spec.side)
    mu = estimate_mu(probe, samples=samples, seed=seed)
    c0 = compute_c0(spec)
    return StructuralConstants(mu=mu, c0=c0, sample_count=samples, seed=seed)


def spec_from_config(divergence: str, domain_lo, domain_hi, kind: str = "symmetrized",
                     rooted: bool = True, side: str = "right") -> DivergenceSpec:
    """Build a spec from CLI/config values (generator names, JSON domain)."""
    lo = np.asarray(domain_lo, dtype=float)
    hi = np.asarray(domain_hi, dtype=float)
    gens = [generator_by_name(divergence) for _ in range(lo.size)]
    return DivergenceSpec(
        gens,
        DomainBox(lo, hi),
        Kind(kind),
        rooted,
        Side(side),
    )

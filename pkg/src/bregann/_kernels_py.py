"""Pure-Python/numpy kernels: the fallback backend.

The compiled extension (``_kernels``) implements the same entry points for
the three built-in generators; this module is the reference implementation
and the only path that supports custom generators (Python callables).

Distance flavor is encoded as ``kind`` (0 primal, 1 symmetrized) plus a
``rooted`` flag. ``swap`` flips the argument order of the fixed point in
the scalar maps, which is how asymmetric left/right orientations are
expressed one dimension at a time.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

KIND_PRIMAL = 0
KIND_SYMMETRIZED = 1

MARCH_OK = 0
MARCH_CLIPPED = 1
MARCH_NONFINITE = 2

_MAX_HALVINGS = 200


# ---------------------------------------------------------------------------
# scalar 1-D divergences


def _breg1(gen, x, y):
    gid = gen.gen_id
    if gid == 0:
        d = x - y
        return d * d
    if gid == 1:
        return x * math.log(x / y) - x + y
    if gid == 2:
        t = x / y
        return t - math.log(t) - 1.0
    v = gen.phi(x) - gen.phi(y) - gen.dphi(y) * (x - y)
    return v if v > 0.0 else 0.0


def _sym1(gen, x, y):
    gid = gen.gen_id
    if gid == 0:
        d = x - y
        return d * d
    if gid == 1:
        return 0.5 * (x - y) * (math.log(x) - math.log(y))
    if gid == 2:
        d = x - y
        return 0.5 * d * d / (x * y)
    v = 0.5 * (x - y) * (gen.dphi(x) - gen.dphi(y))
    return v if v > 0.0 else 0.0


def d1_scalar(gen, kind, rooted, x, y):
    """Distance between two scalars under one generator, in kind units."""
    v = _sym1(gen, x, y) if kind == KIND_SYMMETRIZED else _breg1(gen, x, y)
    return math.sqrt(v) if rooted else v


def d2phi_scalar(gen, x):
    gid = gen.gen_id
    if gid == 0:
        return 2.0
    if gid == 1:
        return 1.0 / x
    if gid == 2:
        return 1.0 / (x * x)
    return gen.d2phi(x)


# ---------------------------------------------------------------------------
# vectorized column kernels


def _col_breg(gen, x, y):
    gid = gen.gen_id
    if gid == 0:
        d = x - y
        return d * d
    if gid == 1:
        return x * np.log(x / y) - x + y
    if gid == 2:
        t = x / y
        return t - np.log(t) - 1.0
    # Custom generators: elementwise via the callables.
    xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    vals = np.empty(xb.shape, dtype=float)
    flat_x, flat_y, flat_v = xb.ravel(), yb.ravel(), vals.ravel()
    for i in range(flat_x.size):
        flat_v[i] = _breg1(gen, flat_x[i], flat_y[i])
    return vals


def _col_sym(gen, x, y):
    gid = gen.gen_id
    if gid == 0:
        d = x - y
        return d * d
    if gid == 1:
        return 0.5 * (x - y) * (np.log(x) - np.log(y))
    if gid == 2:
        d = x - y
        return 0.5 * d * d / (x * y)
    xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    vals = np.empty(xb.shape, dtype=float)
    flat_x, flat_y, flat_v = xb.ravel(), yb.ravel(), vals.ravel()
    for i in range(flat_x.size):
        flat_v[i] = _sym1(gen, flat_x[i], flat_y[i])
    return vals


def d1_column(gen, kind, x, y):
    """Raw (un-rooted) per-coordinate divergence, broadcasting over arrays."""
    if kind == KIND_SYMMETRIZED:
        return _col_sym(gen, x, y)
    return _col_breg(gen, x, y)


def dist_rows(gens, kind, rooted, P, q, swap=False):
    """Distances between every row of ``P`` and the point ``q``.

    Returns D(P[i], q) by default, D(q, P[i]) when ``swap`` is set.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    acc = np.zeros(n, dtype=float)
    for k, gen in enumerate(gens):
        col = P[:, k]
        if swap:
            acc += d1_column(gen, kind, q[k], col)
        else:
            acc += d1_column(gen, kind, col, q[k])
    if rooted:
        return np.sqrt(np.maximum(acc, 0.0))
    return np.maximum(acc, 0.0)


def dist_pairs(gens, kind, rooted, X, Y):
    """Row-wise distances D(X[i], Y[i])."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    acc = np.zeros(X.shape[0], dtype=float)
    for k, gen in enumerate(gens):
        acc += d1_column(gen, kind, X[:, k], Y[:, k])
    if rooted:
        return np.sqrt(np.maximum(acc, 0.0))
    return np.maximum(acc, 0.0)


# ---------------------------------------------------------------------------
# 1-D marching and balancing loops


def march(gen, kind, rooted, swap, q, r, above, alpha, c0, lo, hi):
    """Step-halving march to a point at distance ``r`` from ``q``.

    Returns ``(x, halving_iters, status)``. The scalar map is
    f(x) = D(q, x), or D(x, q) when ``swap``; ``above`` chooses the side.
    The initial offset solves the curvature-scaled linearization
    sqrt(phi''(q)/2)/c0 * |x0 - q| = r_rooted and is doubled until it
    brackets the target, which at most a couple of doublings guarantee.
    """

    def f(x):
        if swap:
            return d1_scalar(gen, kind, rooted, x, q)
        return d1_scalar(gen, kind, rooted, q, x)

    if r <= 0.0:
        return q, 0, MARCH_OK
    end = hi if above else lo
    fe = f(end)
    if not math.isfinite(fe):
        return end, 0, MARCH_NONFINITE
    if fe < (1.0 - alpha) * r:
        return end, 0, MARCH_CLIPPED
    if fe <= (1.0 + alpha) * r:
        return end, 0, MARCH_OK

    rr = r if rooted else math.sqrt(r)
    curv = d2phi_scalar(gen, q)
    if not (curv > 0.0 and math.isfinite(curv)):
        return q, 0, MARCH_NONFINITE
    off = c0 * rr * math.sqrt(2.0) / math.sqrt(curv)
    span = abs(end - q)
    if not (off > 0.0):
        off = span * 0.5

    def at(offset):
        x = q + offset if above else q - offset
        if above and x > end:
            return end
        if not above and x < end:
            return end
        return x

    x0 = at(off)
    fx0 = f(x0)
    while fx0 < r and x0 != end:
        off *= 2.0
        x0 = at(off)
        fx0 = f(x0)
    if not math.isfinite(fx0):
        return x0, 0, MARCH_NONFINITE

    step = abs(x0 - q) * 0.5
    x = x0
    best_x, best_err = x0, abs(fx0 - r)
    for it in range(_MAX_HALVINGS):
        fx = f(x)
        if not math.isfinite(fx):
            return x, it, MARCH_NONFINITE
        err = abs(fx - r)
        if err <= alpha * r:
            return x, it + 1, MARCH_OK
        if err < best_err:
            best_x, best_err = x, err
        if fx < r:
            x = x + step if above else x - step
        else:
            x = x - step if above else x + step
        step *= 0.5
    return best_x, _MAX_HALVINGS, MARCH_OK


def balance(gen, kind, rooted, a, b, alpha):
    """Balance point x in (a, b) with D(a, x) and D(x, b) within (1 +- alpha).

    Euclidean bisection on the monotone difference D(x, b) - D(a, x); the
    balance window around the crossing has positive width for any positive
    alpha, so termination is a few dozen halvings at most.
    """
    if not a < b:
        return a, 0
    lo_x, hi_x = a, b
    x = 0.5 * (a + b)
    for it in range(_MAX_HALVINGS):
        x = 0.5 * (lo_x + hi_x)
        if not lo_x < x < hi_x:
            return x, it
        da = d1_scalar(gen, kind, rooted, a, x)
        db = d1_scalar(gen, kind, rooted, x, b)
        if (1.0 - alpha) * da < db < (1.0 + alpha) * da:
            return x, it + 1
        if db >= da:
            lo_x = x
        else:
            hi_x = x
    return x, _MAX_HALVINGS

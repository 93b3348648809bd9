# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the built-in generators.

Mirrors the API of ``_kernels_py`` but dispatches on integer generator ids
(0 squared-norm, 1 KL, 2 Itakura-Saito). Custom generators never reach
this module; the import-time backend selection routes them to Python.
"""

from libc cimport math as cmath

import numpy as np
cimport numpy as cnp

BACKEND = "compiled"

KIND_PRIMAL = 0
KIND_SYMMETRIZED = 1

MARCH_OK = 0
MARCH_CLIPPED = 1
MARCH_NONFINITE = 2

DEF MAX_HALVINGS = 200


cdef inline double _breg1(int gid, double x, double y) noexcept nogil:
    cdef double d, t
    if gid == 0:
        d = x - y
        return d * d
    elif gid == 1:
        return x * cmath.log(x / y) - x + y
    else:
        t = x / y
        return t - cmath.log(t) - 1.0


cdef inline double _sym1(int gid, double x, double y) noexcept nogil:
    cdef double d
    if gid == 0:
        d = x - y
        return d * d
    elif gid == 1:
        return 0.5 * (x - y) * (cmath.log(x) - cmath.log(y))
    else:
        d = x - y
        return 0.5 * d * d / (x * y)


cdef inline double _raw1(int gid, int kind, double x, double y) noexcept nogil:
    if kind == 1:  # symmetrized
        return _sym1(gid, x, y)
    return _breg1(gid, x, y)


cdef inline double _d1(int gid, int kind, bint rooted, double x, double y) noexcept nogil:
    cdef double v = _raw1(gid, kind, x, y)
    if v < 0.0:
        v = 0.0
    if rooted:
        return cmath.sqrt(v)
    return v


cdef inline double _d2phi(int gid, double x) noexcept nogil:
    if gid == 0:
        return 2.0
    elif gid == 1:
        return 1.0 / x
    else:
        return 1.0 / (x * x)


def d1_scalar(int gen_id, int kind, bint rooted, double x, double y):
    return _d1(gen_id, kind, rooted, x, y)


def d2phi_scalar(int gen_id, double x):
    return _d2phi(gen_id, x)


def dist_rows(int[:] gen_ids, int kind, bint rooted, double[:, :] P, double[:] q,
              bint swap=False):
    """Distances between every row of P and the point q."""
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t d = P.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, k
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                if swap:
                    acc += _raw1(gen_ids[k], kind, q[k], P[i, k])
                else:
                    acc += _raw1(gen_ids[k], kind, P[i, k], q[k])
            if acc < 0.0:
                acc = 0.0
            o[i] = cmath.sqrt(acc) if rooted else acc
    return out


def dist_pairs(int[:] gen_ids, int kind, bint rooted, double[:, :] X, double[:, :] Y):
    """Row-wise distances D(X[i], Y[i])."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, k
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                acc += _raw1(gen_ids[k], kind, X[i, k], Y[i, k])
            if acc < 0.0:
                acc = 0.0
            o[i] = cmath.sqrt(acc) if rooted else acc
    return out


def march(int gen_id, int kind, bint rooted, bint swap, double q, double r,
          bint above, double alpha, double c0, double lo, double hi):
    """Step-halving march; see the Python twin for the contract."""
    cdef double end, fe, rr, curv, off, x0, fx0, step, x, fx, err, best_x, best_err
    cdef int it

    if r <= 0.0:
        return q, 0, MARCH_OK
    end = hi if above else lo
    fe = _d1(gen_id, kind, rooted, q, end) if not swap else _d1(gen_id, kind, rooted, end, q)
    if not cmath.isfinite(fe):
        return end, 0, MARCH_NONFINITE
    if fe < (1.0 - alpha) * r:
        return end, 0, MARCH_CLIPPED
    if fe <= (1.0 + alpha) * r:
        return end, 0, MARCH_OK

    rr = r if rooted else cmath.sqrt(r)
    curv = _d2phi(gen_id, q)
    if not (curv > 0.0 and cmath.isfinite(curv)):
        return q, 0, MARCH_NONFINITE
    off = c0 * rr * cmath.sqrt(2.0) / cmath.sqrt(curv)
    if not off > 0.0:
        off = 0.5 * cmath.fabs(end - q)

    x0 = q + off if above else q - off
    if (above and x0 > end) or ((not above) and x0 < end):
        x0 = end
    fx0 = _d1(gen_id, kind, rooted, q, x0) if not swap else _d1(gen_id, kind, rooted, x0, q)
    while fx0 < r and x0 != end:
        off *= 2.0
        x0 = q + off if above else q - off
        if (above and x0 > end) or ((not above) and x0 < end):
            x0 = end
        fx0 = _d1(gen_id, kind, rooted, q, x0) if not swap else _d1(gen_id, kind, rooted, x0, q)
    if not cmath.isfinite(fx0):
        return x0, 0, MARCH_NONFINITE

    step = 0.5 * cmath.fabs(x0 - q)
    x = x0
    best_x = x0
    best_err = cmath.fabs(fx0 - r)
    for it in range(MAX_HALVINGS):
        fx = _d1(gen_id, kind, rooted, q, x) if not swap else _d1(gen_id, kind, rooted, x, q)
        if not cmath.isfinite(fx):
            return x, it, MARCH_NONFINITE
        err = cmath.fabs(fx - r)
        if err <= alpha * r:
            return x, it + 1, MARCH_OK
        if err < best_err:
            best_x = x
            best_err = err
        if fx < r:
            x = x + step if above else x - step
        else:
            x = x - step if above else x + step
        step *= 0.5
    return best_x, MAX_HALVINGS, MARCH_OK


def balance(int gen_id, int kind, bint rooted, double a, double b, double alpha):
    """Balance point of [a, b]; see the Python twin for the contract."""
    cdef double lo_x, hi_x, x, da, db
    cdef int it
    if not a < b:
        return a, 0
    lo_x = a
    hi_x = b
    x = 0.5 * (a + b)
    for it in range(MAX_HALVINGS):
        x = 0.5 * (lo_x + hi_x)
        if not (lo_x < x < hi_x):
            return x, it
        da = _d1(gen_id, kind, rooted, a, x)
        db = _d1(gen_id, kind, rooted, x, b)
        if (1.0 - alpha) * da < db < (1.0 + alpha) * da:
            return x, it + 1
        if db >= da:
            lo_x = x
        else:
            hi_x = x
    return x, MAX_HALVINGS

"""Backend selection: compiled kernels when available, Python otherwise.

The compiled extension only understands the built-in generators, so the
dispatchers below fall back to the Python kernels whenever a custom
generator is involved. Set ``BREGANN_PURE_PYTHON=1`` to force the Python
backend (used by the backend-equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py as _py

if os.environ.get("BREGANN_PURE_PYTHON", "") not in ("", "0"):
    _ck = None
else:
    try:
        from . import _kernels as _ck
    except ImportError:
        _ck = None

HAVE_COMPILED = _ck is not None

KIND_PRIMAL = _py.KIND_PRIMAL
KIND_SYMMETRIZED = _py.KIND_SYMMETRIZED
MARCH_OK = _py.MARCH_OK
MARCH_CLIPPED = _py.MARCH_CLIPPED
MARCH_NONFINITE = _py.MARCH_NONFINITE


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "python"


def _ids(gens):
    return np.array([g.gen_id for g in gens], dtype=np.int32)


def dist_rows(gens, kind, rooted, P, q, swap=False):
    if HAVE_COMPILED and all(g.gen_id >= 0 for g in gens):
        return _ck.dist_rows(_ids(gens), kind, rooted,
                             np.ascontiguousarray(P, dtype=np.float64),
                             np.ascontiguousarray(q, dtype=np.float64), swap)
    return _py.dist_rows(gens, kind, rooted, P, q, swap)


def dist_pairs(gens, kind, rooted, X, Y):
    if HAVE_COMPILED and all(g.gen_id >= 0 for g in gens):
        return _ck.dist_pairs(_ids(gens), kind, rooted,
                              np.ascontiguousarray(X, dtype=np.float64),
                              np.ascontiguousarray(Y, dtype=np.float64))
    return _py.dist_pairs(gens, kind, rooted, X, Y)


def d1_scalar(gen, kind, rooted, x, y):
    if HAVE_COMPILED and gen.gen_id >= 0:
        return _ck.d1_scalar(gen.gen_id, kind, rooted, x, y)
    return _py.d1_scalar(gen, kind, rooted, x, y)


def march(gen, kind, rooted, swap, q, r, above, alpha, c0, lo, hi):
    if HAVE_COMPILED and gen.gen_id >= 0:
        return _ck.march(gen.gen_id, kind, rooted, swap, q, r, above, alpha, c0, lo, hi)
    return _py.march(gen, kind, rooted, swap, q, r, above, alpha, c0, lo, hi)


def balance(gen, kind, rooted, a, b, alpha):
    if HAVE_COMPILED and gen.gen_id >= 0:
        return _ck.balance(gen.gen_id, kind, rooted, a, b, alpha)
    return _py.balance(gen, kind, rooted, a, b, alpha)

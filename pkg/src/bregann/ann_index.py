"""Index facade: spec + constants + ring tree + range reporter (+ fast path).

Also hosts the brute-force oracle (``exact_nn``) and the index file codec.

File format (all little-endian): magic ``BANN``, format version u16, header
length u32, JSON header (spec, domain, constants, seeds, n, d), then
length-prefixed sections: raw point data (f64, row-major), the packed ring
tree, and the fast-path root geometry. The reporter and the quadtree node
set rebuild deterministically from the points, so the sections stay small
and a rebuild with the same seed is byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import euclid_quadtree, quadtree_search
from .divergence import (
    DivergenceSpec,
    DomainBox,
    Kind,
    Side,
    StructuralConstants,
    estimate_constants,
)
from .errors import DomainViolation, FastPathUnavailable, NotRooted
from .generators import generator_by_name
from .quadtree_search import QueryStats
from .range_report import RangeReporter
from .ring_tree import RingNode, RingTree, RingTreeParams, build as build_ring_tree

MAGIC = b"BANN"
FORMAT_VERSION = 1
LIB_VERSION = "0.1.0"


@dataclass(frozen=True)
class BuildParams:
    seed: int = 0
    samples: int = 20000
    fast_path: bool = True
    leaf_size: int = 8
    ring_t: Optional[float] = None
    ring_c: Optional[float] = None
    constants: Optional[StructuralConstants] = None

    def ring_params(self) -> RingTreeParams:
        return RingTreeParams(t=self.ring_t, c=self.ring_c, seed=self.seed,
                              leaf_size=self.leaf_size)


@dataclass
class AnnIndex:
    spec: DivergenceSpec
    constants: StructuralConstants
    points: np.ndarray
    ring: RingTree
    reporter: RangeReporter
    equad: Optional[euclid_quadtree.CompressedQuadtree]
    params: BuildParams
    constants_provenance: str
    build_meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def query(self, q, eps: float, strategy: str = "auto",
              collect_trace: bool = False) -> Tuple[int, float, QueryStats]:
        """Dispatch one query; always honors the (1+eps) contract."""
        if strategy not in ("auto", "generic", "fast"):
            raise ValueError(f"unknown strategy {strategy!r}")
        if strategy == "fast" and self.equad is None:
            raise FastPathUnavailable(
                "index was built without the fast path (raw kind or disabled)"
            )
        if strategy == "auto":
            strategy = "fast" if self.equad is not None else "generic"
        if strategy == "fast":
            return euclid_quadtree.query_fast(self, q, eps, collect_trace)
        return quadtree_search.query_approx_nn(self, q, eps, collect_trace)


def exact_nn(points, spec: DivergenceSpec, q) -> Tuple[int, float]:
    """Linear-scan oracle with query-side distances; smallest id wins ties."""
    points = spec.check_points(points)
    q = spec.check_point(q, "q")
    dists = spec.dist_rows_query(points, q)
    row = int(np.argmin(dists))
    return row, float(dists[row])


def build_index(points, spec: DivergenceSpec, params: Optional[BuildParams] = None
                ) -> AnnIndex:
    params = params or BuildParams()
    points = spec.check_points(points)
    if points.shape[0] < 1:
        raise DomainViolation("need at least one point")
    if params.constants is not None:
        constants = params.constants
        provenance = "supplied"
    else:
        constants = estimate_constants(spec, samples=params.samples, seed=params.seed)
        provenance = "estimated"
    ring = build_ring_tree(points, spec, params.ring_params(), mu=constants.mu)
    reporter = RangeReporter(points)
    equad = None
    if params.fast_path:
        if spec.rooted:
            equad = euclid_quadtree.build_equadtree(points, spec, constants)
        # raw kinds silently skip the fast path; an explicit "fast" query
        # strategy on such an index raises FastPathUnavailable.
    meta = {"seed": params.seed, "version": LIB_VERSION,
            "constants_provenance": provenance}
    return AnnIndex(spec=spec, constants=constants, points=points, ring=ring,
                    reporter=reporter, equad=equad, params=params,
                    constants_provenance=provenance, build_meta=meta)


# ---------------------------------------------------------------------------
# serialization


def _pack_ring(tree: RingTree) -> bytes:
    reps, r_in, r_out, inner, outer, leaf_off, leaf_len = [], [], [], [], [], [], []
    leaf_ids: list = []

    # Iterative preorder; ring trees can be deep when splits are lopsided.
    stack = [(tree.root, -1, "")]
    while stack:
        node, parent, slot = stack.pop()
        my = len(reps)
        if parent >= 0:
            (inner if slot == "inner" else outer)[parent] = my
        reps.append(node.rep)
        r_in.append(node.inner_radius)
        r_out.append(node.outer_radius)
        inner.append(-1)
        outer.append(-1)
        if node.is_leaf:
            leaf_off.append(len(leaf_ids))
            leaf_len.append(node.leaf_ids.size)
            leaf_ids.extend(int(v) for v in node.leaf_ids)
        else:
            leaf_off.append(-1)
            leaf_len.append(0)
            stack.append((node.outer, my, "outer"))
            stack.append((node.inner, my, "inner"))
    head = struct.pack("<qqddqqq", len(reps), len(leaf_ids), tree.t, tree.c,
                       tree.seed, tree.depth, tree.stored_ids)
    arrays = [
        np.asarray(reps, dtype="<i8"), np.asarray(r_in, dtype="<f8"),
        np.asarray(r_out, dtype="<f8"), np.asarray(inner, dtype="<i8"),
        np.asarray(outer, dtype="<i8"), np.asarray(leaf_off, dtype="<i8"),
        np.asarray(leaf_len, dtype="<i8"),
        np.asarray(leaf_ids, dtype="<i8"),
    ]
    return head + b"".join(a.tobytes() for a in arrays)


def _unpack_ring(blob: bytes, points: np.ndarray) -> RingTree:
    head_size = struct.calcsize("<qqddqqq")
    n_nodes, n_leaf, t, c, seed, depth, stored = struct.unpack("<qqddqqq",
                                                               blob[:head_size])
    off = head_size

    def take(dtype, count):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr

    reps = take("<i8", n_nodes)
    r_in = take("<f8", n_nodes)
    r_out = take("<f8", n_nodes)
    inner = take("<i8", n_nodes)
    outer = take("<i8", n_nodes)
    leaf_off = take("<i8", n_nodes)
    leaf_len = take("<i8", n_nodes)
    leaf_ids = take("<i8", n_leaf)

    nodes = []
    for i in range(n_nodes):
        if leaf_off[i] >= 0:
            ids = np.array(leaf_ids[leaf_off[i]:leaf_off[i] + leaf_len[i]],
                           dtype=np.int64)
            nodes.append(RingNode(rep=int(reps[i]), inner_radius=float(r_in[i]),
                                  outer_radius=float(r_out[i]), leaf_ids=ids))
        else:
            nodes.append(RingNode(rep=int(reps[i]), inner_radius=float(r_in[i]),
                                  outer_radius=float(r_out[i])))
    for i in range(n_nodes):
        if leaf_off[i] < 0:
            nodes[i].inner = nodes[int(inner[i])]
            nodes[i].outer = nodes[int(outer[i])]
    root = nodes[0]
    return RingTree(root=root, points=points, t=float(t), c=float(c),
                    seed=int(seed), depth=int(depth), stored_ids=int(stored),
                    n=points.shape[0])


def _spec_to_json(spec: DivergenceSpec) -> dict:
    for gen in spec.generators:
        if gen.gen_id < 0:
            raise ValueError("custom generators cannot be serialized by name")
    return {
        "generators": [gen.kind.value for gen in spec.generators],
        "domain": {"lo": spec.domain.lo.tolist(), "hi": spec.domain.hi.tolist()},
        "kind": spec.kind.value,
        "rooted": spec.rooted,
        "side": spec.side.value,
    }


def _spec_from_json(blob: dict) -> DivergenceSpec:
    gens = [generator_by_name(name) for name in blob["generators"]]
    return DivergenceSpec(
        gens,
        DomainBox(np.asarray(blob["domain"]["lo"]), np.asarray(blob["domain"]["hi"])),
        Kind(blob["kind"]),
        bool(blob["rooted"]),
        Side(blob["side"]),
    )


def serialize_index(index: AnnIndex) -> bytes:
    header = {
        "constants": {
            "mu": index.constants.mu,
            "c0": index.constants.c0,
            "sample_count": index.constants.sample_count,
            "seed": index.constants.seed,
            "provenance": index.constants_provenance,
        },
        "d": index.spec.dim,
        "n": index.n,
        "params": {
            "seed": index.params.seed,
            "samples": index.params.samples,
            "fast_path": index.params.fast_path,
            "leaf_size": index.params.leaf_size,
            "ring_t": index.params.ring_t,
            "ring_c": index.params.ring_c,
        },
        "spec": _spec_to_json(index.spec),
        "version": LIB_VERSION,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(header_bytes)), header_bytes]

    sections = [np.ascontiguousarray(index.points, dtype="<f8").tobytes(),
                _pack_ring(index.ring)]
    if index.equad is not None:
        eq = index.equad
        sections.append(struct.pack("<d", eq.s)
                        + np.asarray(eq.root_lo, dtype="<f8").tobytes()
                        + np.asarray(eq.root_hi, dtype="<f8").tobytes()
                        + np.asarray(eq.root_sides, dtype="<f8").tobytes())
    else:
        sections.append(b"")
    for sec in sections:
        out.append(struct.pack("<Q", len(sec)))
        out.append(sec)
    return b"".join(out)


def deserialize_index(blob: bytes) -> AnnIndex:
    if blob[:4] != MAGIC:
        raise ValueError("not an index file (bad magic)")
    version, header_len = struct.unpack("<HI", blob[4:10])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    off = 10
    header = json.loads(blob[off:off + header_len].decode())
    off += header_len

    def take_section():
        nonlocal off
        (length,) = struct.unpack("<Q", blob[off:off + 8])
        off += 8
        sec = blob[off:off + length]
        off += length
        return sec

    points_blob = take_section()
    ring_blob = take_section()
    equad_blob = take_section()

    spec = _spec_from_json(header["spec"])
    n, d = header["n"], header["d"]
    points = np.frombuffer(points_blob, dtype="<f8").reshape(n, d).copy()
    cj = header["constants"]
    constants = StructuralConstants(mu=cj["mu"], c0=cj["c0"],
                                    sample_count=cj["sample_count"], seed=cj["seed"])
    pj = header["params"]
    params = BuildParams(seed=pj["seed"], samples=pj["samples"],
                         fast_path=pj["fast_path"], leaf_size=pj["leaf_size"],
                         ring_t=pj["ring_t"], ring_c=pj["ring_c"])
    ring = _unpack_ring(ring_blob, points)
    reporter = RangeReporter(points)
    equad = None
    if equad_blob:
        d_ = spec.dim
        (s,) = struct.unpack("<d", equad_blob[:8])
        rest = np.frombuffer(equad_blob, dtype="<f8", offset=8)
        root_lo = rest[:d_].copy()
        root_hi = rest[d_:2 * d_].copy()
        root_sides = rest[2 * d_:3 * d_].copy()
        equad = euclid_quadtree.build_equadtree(
            points, spec, constants,
            geometry=(root_lo, root_hi, root_sides, s), validate=False,
        )
    meta = {"seed": params.seed, "version": header["version"],
            "constants_provenance": cj["provenance"]}
    return AnnIndex(spec=spec, constants=constants, points=points, ring=ring,
                    reporter=reporter, equad=equad, params=params,
                    constants_provenance=cj["provenance"], build_meta=meta)


def save_index(index: AnnIndex, path) -> int:
    blob = serialize_index(index)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_index(path) -> AnnIndex:
    with open(path, "rb") as fh:
        return deserialize_index(fh.read())

"""Ring separator construction and the rough-neighbor guarantee."""

import math

import numpy as np
import pytest

from bregann.divergence import Kind, estimate_mu
from bregann.ring_tree import (
    RingTreeParams,
    approx_min_ball,
    build,
    default_split_constant,
    rough_nn,
)

from conftest import make_spec


def brute_force_min_ball_radius(P, spec, k):
    """Smallest k-point ball radius over all data centers (the oracle the
    randomized estimate is compared against)."""
    best = math.inf
    for i in range(P.shape[0]):
        dists = np.sort(spec.dist_rows_data(P[i], P))
        best = min(best, dists[k - 1])
    return best


class TestApproxMinBall:
    def test_identical_points(self, kl_sym_rooted_2d):
        P = np.tile([[0.5, 0.5]], (20, 1))
        ball = approx_min_ball(P, kl_sym_rooted_2d, 4.0, np.random.default_rng(0))
        assert ball.radius == 0.0
        assert ball.covered == 20

    def test_c_equals_n_single_point_ball(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(1)
        P = rng.uniform(0.1, 0.9, (16, 2))
        ball = approx_min_ball(P, kl_sym_rooted_2d, 16.0, rng)
        assert ball.radius == 0.0

    def test_line_fixture_vs_brute_force(self):
        spec = make_spec("sqeuclidean", [0.0], [16.0])
        P = np.arange(16, dtype=float).reshape(-1, 1)
        mu = 1.0  # rooted squared norm is a metric
        c = 4.0
        k = math.ceil(16 / c)
        oracle = brute_force_min_ball_radius(P, spec, k)
        ball = approx_min_ball(P, spec, c, np.random.default_rng(2))
        assert ball.covered >= k
        assert ball.radius <= (mu + 1.0) * oracle + 1e-12

    def test_covered_count_honest(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(3)
        P = rng.uniform(0.1, 0.9, (200, 2))
        ball = approx_min_ball(P, kl_sym_rooted_2d, 10.0, rng)
        dists = kl_sym_rooted_2d.dist_rows_data(P[ball.center], P)
        assert np.count_nonzero(dists <= ball.radius) == ball.covered
        assert ball.covered >= math.ceil(200 / 10)


class TestBuild:
    def test_single_point(self, kl_sym_rooted_2d):
        tree = build(np.array([[0.5, 0.5]]), kl_sym_rooted_2d, RingTreeParams(seed=0))
        assert tree.root.is_leaf
        assert tree.depth == 1

    def test_structure_invariants_random(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(4)
        P = rng.uniform(0.1, 0.9, (1000, 2))
        params = RingTreeParams(seed=5)
        tree = build(P, kl_sym_rooted_2d, params, mu=1.22)
        assert tree.depth <= tree.c * math.log(1000) + 1
        assert tree.stored_ids <= 16 * 1000

        # every node's points are inside the outer ball or outside the inner
        # radius; annulus members appear in both children
        spec = kl_sym_rooted_2d

        def collect(node):
            if node.is_leaf:
                return set(int(v) for v in node.leaf_ids)
            inner = collect(node.inner)
            outer = collect(node.outer)
            d_in = spec.dist_rows_data(P[node.rep], P[sorted(inner)])
            assert np.all(d_in <= node.outer_radius * (1 + 1e-12))
            d_out = spec.dist_rows_data(P[node.rep], P[sorted(outer)])
            assert np.all(d_out > node.inner_radius * (1 - 1e-12))
            return inner | outer

        all_ids = collect(tree.root)
        assert all_ids == set(range(1000))

    def test_outer_radius_ratio(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(6)
        P = rng.uniform(0.1, 0.9, (300, 2))
        tree = build(P, kl_sym_rooted_2d, RingTreeParams(seed=1), mu=1.22)

        def walk(node):
            if node.is_leaf:
                return
            assert node.outer_radius >= node.inner_radius
            walk(node.inner)
            walk(node.outer)

        walk(tree.root)

    def test_two_clusters_split_at_root(self):
        spec = make_spec("sqeuclidean", [0.0, 0.0], [10.0, 10.0])
        rng = np.random.default_rng(7)
        a = rng.normal(1.0, 0.05, (500, 2)).clip(0, 10)
        b = rng.normal(9.0, 0.05, (500, 2)).clip(0, 10)
        P = np.vstack([a, b])
        params = RingTreeParams(seed=2, c=8.0)
        tree = build(P, spec, params, mu=1.0)
        c_node = min(8.0, 1000 / 2.0)
        limit = (1 - 1 / c_node) * 1000

        def sizes(node):
            if node.is_leaf:
                return node.leaf_ids.size
            si = sizes(node.inner)
            so = sizes(node.outer)
            return si + so

        assert sizes(tree.root.inner) <= limit + 1000  # duplication allowed
        # balance property: neither child carries every id
        def id_set(node):
            if node.is_leaf:
                return set(int(v) for v in node.leaf_ids)
            return id_set(node.inner) | id_set(node.outer)

        assert len(id_set(tree.root.inner)) <= limit
        assert len(id_set(tree.root.outer)) <= limit

    def test_determinism(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(8)
        P = rng.uniform(0.1, 0.9, (200, 2))
        t1 = build(P, kl_sym_rooted_2d, RingTreeParams(seed=3), mu=1.22)
        t2 = build(P, kl_sym_rooted_2d, RingTreeParams(seed=3), mu=1.22)

        def flat(node, acc):
            acc.append((node.rep, node.inner_radius, node.outer_radius,
                        None if not node.is_leaf else tuple(node.leaf_ids)))
            if not node.is_leaf:
                flat(node.inner, acc)
                flat(node.outer, acc)
            return acc

        assert flat(t1.root, []) == flat(t2.root, [])


class TestRoughNN:
    def test_query_equals_data_point(self, kl_sym_rooted_2d):
        rng = np.random.default_rng(9)
        P = rng.uniform(0.1, 0.9, (100, 2))
        tree = build(P, kl_sym_rooted_2d, RingTreeParams(seed=4), mu=1.22)
        pid, dist = rough_nn(tree, kl_sym_rooted_2d, P[37])
        assert dist >= 0
        if pid != 37:
            # a duplicate-coordinate point may shadow it, but distance is 0
            assert dist == 0.0

    def test_two_points_exact(self, kl_sym_rooted_2d):
        P = np.array([[0.2, 0.2], [0.8, 0.8]])
        tree = build(P, kl_sym_rooted_2d, RingTreeParams(seed=0), mu=1.22)
        q = np.array([0.25, 0.25])
        pid, dist = rough_nn(tree, kl_sym_rooted_2d, q)
        assert pid == 0

    @pytest.mark.parametrize("kind,side", [
        (Kind.SYMMETRIZED, "right"),
        (Kind.PRIMAL, "right"),
        (Kind.PRIMAL, "left"),
    ])
    def test_ratio_bound(self, kind, side):
        from bregann.divergence import Side

        spec = make_spec("kl", [0.1, 0.1], [0.9, 0.9], kind=kind,
                         side=Side(side))
        rng = np.random.default_rng(10)
        P = rng.uniform(0.1, 0.9, (500, 2))
        mu = estimate_mu(spec, samples=5000, seed=0)
        tree = build(P, spec, RingTreeParams(seed=5), mu=mu)
        bound = mu + 2 * mu * mu * math.log2(500)
        for _ in range(200):
            q = rng.uniform(0.1, 0.9, 2)
            pid, dist = rough_nn(tree, spec, q)
            exact = float(np.min(spec.dist_rows_query(P, q)))
            if exact > 0:
                assert dist / exact <= bound

    def test_default_split_constant_caps(self):
        assert default_split_constant(1000, 2, 1.22, True) <= 2 * (
            4 * 2.22 * math.sqrt(2)) ** 2 + 1e-9
        assert default_split_constant(10_000, 3, 1.22, True) == max(8.0, 2500.0)

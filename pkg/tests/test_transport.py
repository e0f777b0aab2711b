"""Tests for exact p-Wasserstein distances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qflow.space import cycle_graph, grid_graph, path_graph
from qflow.transport import (TransportError, as_probability, bruteforce_transport_cost,
                             metric_speed, normalized_distance, polytope_vertices, verify_dual,
                             wasserstein_distance, wasserstein_p)

from conftest import seeds


def random_probability(rng, n, sparse=False):
    w = rng.random(n)
    if sparse:
        w[rng.random(n) < 0.4] = 0.0
        if w.sum() == 0.0:
            w[0] = 1.0
    return w / w.sum()


class TestWasserstein:
    def test_identity(self, rng):
        sp = grid_graph(2, 3)
        mu = random_probability(rng, 6)
        d, plan = wasserstein_p(sp, mu, mu, 2.5)
        assert d == 0.0
        np.testing.assert_allclose(plan.pi, np.diag(mu), atol=1e-14)

    def test_two_point_dirac(self, two_point):
        # one unit of mass over distance one, with the 1/p factor
        assert wasserstein_distance(two_point, [1, 0], [0, 1], 2.0) == pytest.approx(0.5 ** 0.5)
        assert wasserstein_distance(two_point, [1, 0], [0, 1], 2.0, True) == pytest.approx(1.0)

    def test_normalizations_differ_by_p_root(self, rng):
        sp = path_graph(5)
        a, b = random_probability(rng, 5), random_probability(rng, 5)
        for p in (1.5, 2.5):
            scaled = wasserstein_distance(sp, a, b, p)
            standard = wasserstein_distance(sp, a, b, p, True)
            assert standard == pytest.approx(p ** (1.0 / p) * scaled, rel=1e-12)

    def test_uniform_to_endpoint(self):
        sp = path_graph(4, length=1.0, measure=0.25)
        a, b = np.full(4, 0.25), np.array([0.0, 0.0, 0.0, 1.0])
        d, plan = wasserstein_p(sp, a, b, 3.0)
        # every vertex ships its quarter to the endpoint
        expected_cost = 0.25 * (27.0 + 8.0 + 1.0)
        assert plan.cost == pytest.approx(expected_cost, rel=1e-12)
        assert plan.cost == pytest.approx(bruteforce_transport_cost(sp.distance ** 3, a, b), rel=1e-12)
        assert d == pytest.approx(normalized_distance(expected_cost, 3.0))

    @given(seed=seeds, n=st.integers(2, 4), p=st.sampled_from([1.5, 2.0, 2.5]))
    @settings(max_examples=25, deadline=None)
    def test_lp_matches_polytope_vertices(self, seed, n, p):
        rng = np.random.default_rng(seed)
        sp = cycle_graph(n) if n >= 3 else path_graph(n)
        a, b = random_probability(rng, n, True), random_probability(rng, n, True)
        _, plan = wasserstein_p(sp, a, b, p)
        oracle = bruteforce_transport_cost(sp.distance ** p, a, b)
        assert abs(plan.cost - oracle) <= 1e-10 * max(1.0, oracle)

    @given(seed=seeds, p=st.sampled_from([1.25, 2.0, 2.75]))
    @settings(max_examples=20, deadline=None)
    def test_metric_axioms(self, seed, p):
        rng = np.random.default_rng(seed)
        sp = grid_graph(3, 3)
        a, b, c = (random_probability(rng, 9, True) for _ in range(3))
        ab, bc, ac = (wasserstein_distance(sp, x, y, p) for x, y in ((a, b), (b, c), (a, c)))
        assert ab == pytest.approx(wasserstein_distance(sp, b, a, p), abs=1e-10)
        assert ac <= ab + bc + 1e-9

    def test_rejects_non_probability(self):
        sp = path_graph(3)
        with pytest.raises(TransportError, match="not probability vectors"):
            wasserstein_distance(sp, [0.5, 0.5, 0.5], [1, 0, 0], 2.0)
        with pytest.raises(TransportError, match="not probability vectors"):
            as_probability([1.2, -0.2])


class TestDualCertificate:
    def test_optimal_plan_certified(self, rng):
        sp = grid_graph(3, 3)
        a, b = random_probability(rng, 9), random_probability(rng, 9)
        _, plan = wasserstein_p(sp, a, b, 2.5)
        rep = verify_dual(plan)
        assert abs(rep["gap"]) <= 1e-9
        assert rep["dual_infeasibility"] <= 1e-9
        assert rep["slackness"] <= 1e-9
        assert max(rep["row_marginal"], rep["col_marginal"]) <= 1e-12

    def test_perturbed_potentials_are_infeasible(self, rng):
        sp = path_graph(5)
        a, b = random_probability(rng, 5), random_probability(rng, 5)
        _, plan = wasserstein_p(sp, a, b, 2.0)
        plan.u = plan.u + 0.1
        assert verify_dual(plan)["dual_infeasibility"] >= 0.1 - 1e-12

    def test_weak_duality_for_product_plan(self, rng):
        sp = path_graph(5)
        a, b = random_probability(rng, 5), random_probability(rng, 5)
        _, plan = wasserstein_p(sp, a, b, 2.0)
        product = np.outer(a, b)
        assert np.sum(product * plan.cost_matrix) > plan.dual_value + 1e-6


class TestBruteForce:
    def test_vertices_are_feasible(self, rng):
        a, b = random_probability(rng, 3), random_probability(rng, 3)
        verts = polytope_vertices(a, b)
        np.testing.assert_allclose(verts.sum(axis=2), np.broadcast_to(a, (len(verts), 3)), atol=1e-12)
        np.testing.assert_allclose(verts.sum(axis=1), np.broadcast_to(b, (len(verts), 3)), atol=1e-12)
        assert verts.min() >= 0.0

    def test_two_by_two_vertex_count(self):
        # the polytope of 2x2 couplings with generic marginals is a segment
        assert len(polytope_vertices([0.3, 0.7], [0.6, 0.4])) == 2

    def test_size_limit(self):
        with pytest.raises(TransportError, match="bruteforce limit"):
            polytope_vertices(np.full(6, 1 / 6), np.full(6, 1 / 6))


class TestMetricSpeed:
    def test_stationary(self, rng):
        sp = path_graph(4)
        f = np.full(4, 1.0)
        np.testing.assert_array_equal(metric_speed(sp, [0, 0.5, 1.0], [f, f, f], 2.5), 0.0)

    def test_mixture_of_diracs_has_constant_speed(self):
        sp = path_graph(5)
        a = np.eye(5)[0] / sp.measure
        b = np.eye(5)[4] / sp.measure
        t = np.linspace(0.0, 1.0, 5)
        states = [(1 - s) * a + s * b for s in t]
        speed = metric_speed(sp, t, states, 2.0)
        np.testing.assert_allclose(speed / speed.mean(), 1.0, rtol=0.05)

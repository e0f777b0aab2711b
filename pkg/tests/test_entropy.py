"""Tests for the Renyi entropy, Fisher information and slope estimates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qflow.entropy import (SlopeSearch, U_p, U_p_prime, entropy_report, fisher_information,
                           fisher_vertex_form, renyi_entropy, renyi_entropy_density,
                           simplex_grid, slope_bruteforce, slope_upper_bound)
from qflow.space import GOLDEN, DomainError, Exponents, path_graph

QUICK = SlopeSearch(resolution=20, radii=(0.1, 0.02), directions=8, random_points=40, seed=0)


class TestEntropy:
    def test_uniform_density_has_zero_entropy(self):
        sp = path_graph(7)
        assert renyi_entropy_density(sp, np.ones(7), 2.5) == pytest.approx(0.0, abs=1e-15)

    def test_two_point_value(self, two_point):
        # U(2) (1/2) + U(0) (1/2) with U(x) = (x^{1/2} - x) / (-1/4)
        value = renyi_entropy(two_point, [1.0, 0.0], 2.5)
        assert value == pytest.approx(-4.0 * (np.sqrt(2.0) - 2.0) / 2.0, rel=1e-14)
        assert value == pytest.approx(1.17157, abs=1e-5)

    def test_p_equal_two_rejected(self):
        with pytest.raises(DomainError, match="use log entropy"):
            U_p(1.0, 2.0)

    @pytest.mark.parametrize("p", [1.3, 1.7, 2.3, 2.8])
    def test_second_derivative(self, p):
        x, h = np.linspace(0.2, 3.0, 15), 1e-4
        second = (U_p(x + h, p) - 2 * U_p(x, p) + U_p(x - h, p)) / h ** 2
        np.testing.assert_allclose(second, x ** (1 - p), rtol=1e-5)
        first = (U_p(x + h, p) - U_p(x - h, p)) / (2 * h)
        np.testing.assert_allclose(first, U_p_prime(x, p), rtol=1e-6)

    @given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.5]))
    @settings(max_examples=30, deadline=None)
    def test_minimized_by_uniform_density(self, seed, p):
        sp = path_graph(5)
        nu = np.random.default_rng(seed).dirichlet(np.ones(5))
        assert renyi_entropy(sp, nu, p) >= renyi_entropy(sp, sp.measure, p) - 1e-14


class TestFisher:
    def test_single_edge_quadratic(self):
        sp = path_graph(2, length=1.0, measure=1.0, conductance=1.0)
        # q = 2, r = 1/2: 2 * 4 * (1/2) |2 - 1|^2
        assert fisher_information(sp, [1.0, 4.0], Exponents.from_p(2.0)) == pytest.approx(4.0)

    def test_constant_is_zero(self):
        sp = path_graph(6)
        for p in (1.5, 2.5):
            e = Exponents.from_p(p)
            assert fisher_information(sp, np.full(6, 0.7), e) == 0.0
            assert fisher_vertex_form(sp, np.full(6, 0.7), e) == 0.0

    def test_golden_case_uses_logarithm(self):
        sp = path_graph(2, length=1.0, measure=1.0, conductance=1.0)
        e = Exponents.from_q(GOLDEN)
        assert fisher_information(sp, [1.0, np.e], e) == pytest.approx(1.0, rel=1e-12)
        with pytest.raises(DomainError, match="log of zero"):
            fisher_information(sp, [0.0, 1.0], e)

    def test_forms_agree_under_refinement(self):
        e = Exponents.from_p(2.5)
        errors = []
        for n in (16, 32, 64, 128):
            sp = path_graph(n)
            x = (np.arange(n) + 0.5) / n
            f = 1.5 + np.cos(np.pi * x)
            edge, vertex = fisher_information(sp, f, e), fisher_vertex_form(sp, f, e)
            errors.append(abs(edge - vertex) / edge)
        ratios = np.array(errors[:-1]) / np.array(errors[1:])
        assert np.all(ratios >= 1.5)


class TestSlope:
    def test_uniform_has_zero_slope(self):
        sp = path_graph(3)
        assert slope_upper_bound(sp, np.ones(3), 1.5) == 0.0
        assert slope_bruteforce(sp, sp.measure, 1.5, search=QUICK) == 0.0

    def test_density_bounded_below(self):
        with pytest.raises(DomainError, match="density not bounded below"):
            slope_upper_bound(path_graph(3), [0.0, 1.5, 1.5], 1.5)

    def test_bruteforce_limit(self):
        sp = path_graph(7)
        with pytest.raises(DomainError, match="bruteforce limit"):
            slope_bruteforce(sp, sp.measure, 2.5)

    @pytest.mark.parametrize("p", [1.5, 2.5])
    def test_bruteforce_below_upper_bound(self, p):
        sp = path_graph(3)
        rho = np.array([0.5, 1.0, 1.5])
        rho = rho / sp.integrate(rho)
        low = slope_bruteforce(sp, rho * sp.measure, p, search=QUICK)
        assert 0.0 < low <= 1.1 * slope_upper_bound(sp, rho, p)

    def test_argmax_decreases_entropy(self, two_point):
        mu0 = np.array([0.7, 0.3])
        value, nu = slope_bruteforce(two_point, mu0, 2.5, search=QUICK, return_argmax=True)
        assert value > 0.0
        assert renyi_entropy(two_point, nu, 2.5) < renyi_entropy(two_point, mu0, 2.5)

    def test_simplex_grid(self):
        pts = simplex_grid(3, 4)
        assert len(pts) == 15
        np.testing.assert_allclose(pts.sum(axis=1), 1.0)

    def test_report(self, two_point):
        rep = entropy_report(two_point, [0.7, 0.3], 2.5)
        assert rep.slope_bruteforce is None
        assert rep.slope_estimate == pytest.approx(slope_upper_bound(two_point, [1.4, 0.6], 2.5))
        assert '"value"' in rep.to_json()

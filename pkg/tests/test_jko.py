"""Tests for the minimizing-movement scheme and its comparison with the heat flow."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qflow.entropy import renyi_entropy
from qflow.heatflow import ProximalConfig, run_flow
from qflow.jko import (JkoConfig, frank_wolfe_gap, identification_check, jko_objective, jko_step,
                       jko_value, kuwada_ratios, midpoint_convexity_gap, run_jko, uniqueness_check)
from qflow.space import DomainError, path_graph


def two_point_phi(s, mu_k0, cfg):
    """Φ along ν = (s, 1 - s) on the two-point space: mass |μ_k0 - s| moves distance one."""
    U = lambda x: (x ** (3 - cfg.p) - x) / ((3 - cfg.p) * (2 - cfg.p))
    return 0.5 * U(2 * s) + 0.5 * U(2 * (1 - s)) + cfg.penalty * np.abs(mu_k0 - s)


class TestConfig:
    def test_rejects_p_two(self):
        with pytest.raises(DomainError, match="use log entropy"):
            JkoConfig(0.1, 2.0)

    def test_rejects_p_out_of_range(self):
        with pytest.raises(DomainError, match=r"p out of \(1,3\)"):
            JkoConfig(0.1, 3.5)

    def test_penalty_normalizations(self):
        scaled, standard = JkoConfig(0.1, 2.5), JkoConfig(0.1, 2.5, normalization="standard")
        assert standard.penalty == pytest.approx(1.0 / (2.5 * 0.1 ** 1.5))
        assert scaled.penalty == pytest.approx(standard.penalty / 2.5)


class TestStep:
    def test_uniform_is_fixed(self):
        sp = path_graph(5)
        nu = jko_step(sp, sp.measure, JkoConfig(0.1, 2.5))
        np.testing.assert_allclose(nu, sp.measure, atol=1e-12)

    @pytest.mark.parametrize("norm, tau, expected", [
        ("scaled", 0.05, 0.9), ("scaled", 0.3, 0.714509), ("scaled", 1.0, 0.539841),
        ("standard", 0.3, 0.871750), ("standard", 1.0, 0.597603)])
    def test_two_point_matches_grid_search(self, two_point, norm, tau, expected):
        cfg = JkoConfig(tau, 2.5, normalization=norm)
        nu = jko_step(two_point, [0.9, 0.1], cfg)
        s = np.linspace(0.5, 0.9, 400_001)
        grid_min = s[np.argmin(two_point_phi(s, 0.9, cfg))]
        assert nu[0] == pytest.approx(grid_min, abs=1e-5)
        assert nu[0] == pytest.approx(expected, abs=1e-6)

    def test_small_tau_keeps_the_measure(self, two_point):
        # the movement penalty dominates; the state sticks
        nu = jko_step(two_point, [0.9, 0.1], JkoConfig(1e-3, 2.5))
        np.testing.assert_allclose(nu, [0.9, 0.1], atol=1e-12)

    @given(seed=st.integers(0, 1000), p=st.sampled_from([1.5, 2.5]))
    @settings(max_examples=10, deadline=None)
    def test_optimality_certificate(self, seed, p):
        rng = np.random.default_rng(seed)
        sp = path_graph(5)
        mu_k = rng.dirichlet(np.ones(5))
        cfg = JkoConfig(0.05, p)
        nu, info = jko_step(sp, mu_k, cfg, return_info=True)
        C = sp.distance ** p
        assert frank_wolfe_gap(sp, info["coupling"], mu_k, C, cfg.penalty, p) <= cfg.tol
        assert info["objective"] == pytest.approx(jko_objective(sp, info["coupling"], C, cfg.penalty, p))
        best = jko_value(sp, mu_k, nu, cfg)
        for other in [mu_k, sp.measure, *rng.dirichlet(np.ones(5), size=10)]:
            assert best <= jko_value(sp, mu_k, other, cfg) + 1e-9


class TestTrajectory:
    def test_uniform_is_stationary(self):
        sp = path_graph(6)
        traj = run_jko(sp, sp.measure, 0.2, JkoConfig(0.05, 2.5))
        for s in traj.states:
            np.testing.assert_allclose(s, 1.0, atol=1e-12)

    def test_entropy_decreases(self):
        sp = path_graph(8)
        x = (np.arange(8) + 0.5) / 8
        f = 1.0 + np.cos(np.pi * x)
        f /= sp.integrate(f)
        traj = run_jko(sp, f * sp.measure, 0.3, JkoConfig(0.1, 1.5))
        assert np.all(np.diff(traj.diagnostics["entropy"]) <= 1e-12)
        np.testing.assert_allclose(traj.diagnostics["mass"], 1.0, rtol=1e-12)
        edi = traj.meta["edi"]
        # the drop pays at least for the kinetic part
        assert edi["entropy_drop"] >= edi["kinetic"] - 1e-9

    def test_csv_columns(self):
        sp = path_graph(4)
        text = run_jko(sp, sp.measure, 0.1, JkoConfig(0.1, 2.5)).to_csv()
        assert text.splitlines()[1].startswith("t,mass,")


class TestComparison:
    def test_uniform_data_gives_zero_distance(self):
        sp = path_graph(6)
        rep = identification_check(sp, np.ones(6), 0.05, [0.05, 0.025], 2.5)
        assert rep.D == [0.0, 0.0]
        assert [r["tau"] for r in rep.to_rows()] == [0.05, 0.025]

    def test_identification_needs_positive_density(self):
        sp = path_graph(4)
        with pytest.raises(DomainError):
            identification_check(sp, [0.0, 1.0, 1.0, 2.0], 0.1, [0.1], 2.5)

    def test_kuwada_ratio_on_stationary_flow(self):
        sp = path_graph(5)
        traj = run_flow(sp, np.ones(5), 0.1, ProximalConfig(0.05), 5.0 / 3.0)
        np.testing.assert_array_equal(kuwada_ratios(sp, traj, 2.5), 0.0)

    def test_uniqueness_on_two_points(self, two_point):
        rep = uniqueness_check(two_point, [0.9, 0.1], 1.0, JkoConfig(0.3, 2.5))
        assert rep["divergence"] <= 1e-8
        assert rep["runs"] == 4

    def test_uniqueness_single_start(self):
        sp = path_graph(3)
        rep = uniqueness_check(sp, [0.5, 0.3, 0.2], 0.1, JkoConfig(0.1, 1.5), inits=("product",))
        assert rep["runs"] == 1 and rep["divergence"] == 0.0

    def test_midpoint_convexity(self, rng):
        sp = path_graph(6)
        for _ in range(20):
            f, g = 0.1 + rng.random(6), 0.1 + rng.random(6)
            assert midpoint_convexity_gap(sp, f, g, 1.5) <= 1e-12

    def test_entropy_value_of_jko_fixed_point(self, two_point):
        nu = jko_step(two_point, [0.5, 0.5], JkoConfig(0.5, 1.5))
        assert renyi_entropy(two_point, nu, 1.5) == pytest.approx(0.0, abs=1e-12)

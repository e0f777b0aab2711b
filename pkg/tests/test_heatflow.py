"""Tests for the proximal q-heat flow and its structural checks."""

import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import spsolve

from qflow.calculus import cheeger_energy
from qflow.heatflow import (CSV_COLUMNS, CSV_SCHEMA, ConvergenceError, ProximalConfig,
                            comparison_check, dissipation_identity_check, entropy_dissipation_check,
                            explicit_step, implicit_step, lr_contraction_check, momentum_bound,
                            momentum_entropy_check, residual_floor, run_flow, step_residual)
from qflow.space import DomainError, cycle_graph, grid_graph, path_graph

from conftest import positive_density


class TestImplicitStep:
    def test_constant_is_fixed(self):
        sp = grid_graph(3, 3)
        f = np.full(9, 0.4)
        for q in (1.5, 2.0, 3.0):
            np.testing.assert_array_equal(implicit_step(sp, f, ProximalConfig(0.1), q), f)

    def test_quadratic_case_is_linear_solve(self, rng):
        sp = grid_graph(3, 4)
        f, tau = rng.random(sp.n), 0.05
        B = sp.incidence()
        L = (B.T @ sps.diags(sp.conductance / sp.length) @ B).tocsc()
        expected = spsolve((sps.diags(sp.measure) + tau * L).tocsc(), sp.measure * f)
        g = implicit_step(sp, f, ProximalConfig(tau, tol=1e-12), 2.0)
        np.testing.assert_allclose(g, expected, rtol=1e-10)

    @pytest.mark.parametrize("q", [1.4, 1.7, 2.5, 3.0])
    def test_residual_and_mass(self, rng, q):
        sp = cycle_graph(12)
        f = positive_density(rng, sp)
        g, info = implicit_step(sp, f, ProximalConfig(1e-2), q, return_info=True)
        assert info["residual"] <= max(1e-10, residual_floor(sp, f, g, 1e-2, q, info["smoothing"]))
        assert sp.integrate(g) == pytest.approx(sp.integrate(f), rel=1e-12)
        assert cheeger_energy(sp, g, q) <= cheeger_energy(sp, f, q)

    def test_agrees_with_explicit_step_for_small_tau(self, rng):
        sp = path_graph(6)
        f = positive_density(rng, sp)
        tau = 1e-6
        g = implicit_step(sp, f, ProximalConfig(tau, tol=1e-13), 3.0)
        # the schemes differ at second order in tau
        increment = explicit_step(sp, f, tau, 3.0) - f
        np.testing.assert_allclose(g - f, increment, rtol=1e-2, atol=1e-3 * np.abs(increment).max())

    def test_not_converged_reports_residual(self, rng):
        sp = path_graph(10)
        f = positive_density(rng, sp)
        with pytest.raises(ConvergenceError, match="prox not converged") as err:
            implicit_step(sp, f, ProximalConfig(1.0, tol=1e-14, max_iter=1), 3.0)
        assert err.value.residual > 1e-14

    def test_step_residual_vanishes_at_solution(self, rng):
        sp = path_graph(5)
        f = positive_density(rng, sp)
        g = implicit_step(sp, f, ProximalConfig(0.1, tol=1e-12), 2.5)
        assert step_residual(sp, f, g, 0.1, 2.5) <= 1e-12
        assert step_residual(sp, f, f, 0.1, 2.5) > 1e-3


class TestTrajectory:
    def test_diagnostics(self, rng):
        sp = path_graph(16)
        f = positive_density(rng, sp)
        traj = run_flow(sp, f, 0.05, ProximalConfig(1e-2), 5.0 / 3.0)
        assert len(traj) == 6
        np.testing.assert_allclose(traj.diagnostics["mass"], 1.0, rtol=1e-12)
        assert np.all(np.diff(traj.diagnostics["cheeger"]) <= 1e-15)
        assert np.all(np.diff(traj.diagnostics["entropy"]) <= 1e-15)
        assert np.isnan(traj.diagnostics["moment"]).all()

    def test_csv_is_deterministic(self, rng, tmp_path):
        sp = path_graph(8)
        f = positive_density(rng, sp)
        texts = [run_flow(sp, f, 0.03, ProximalConfig(1e-2), 3.0).to_csv() for _ in range(2)]
        assert texts[0] == texts[1]
        lines = texts[0].splitlines()
        assert lines[0] == f"# schema: {CSV_SCHEMA}"
        assert lines[1].split(",") == list(CSV_COLUMNS)
        assert len(lines) == 2 + 4

    def test_checkpoint(self, rng, tmp_path):
        sp = path_graph(4)
        traj = run_flow(sp, positive_density(rng, sp), 0.02, ProximalConfig(1e-2), 2.0)
        path = tmp_path / "states.json"
        traj.checkpoint(path)
        assert path.read_text().startswith("[[")


class TestStructure:
    def test_identical_initial_data(self, rng):
        sp = cycle_graph(8)
        f = positive_density(rng, sp)
        rep = lr_contraction_check(sp, f, f, 1.0, 0.1, ProximalConfig(1e-2), 2.5)
        assert rep["status"] == "identical"

    @pytest.mark.parametrize("r", [1.0, 2.0, 3.0])
    def test_lr_contraction(self, rng, r):
        sp = cycle_graph(8)
        f, g = positive_density(rng, sp), positive_density(rng, sp)
        rep = lr_contraction_check(sp, f, g, r, 0.1, ProximalConfig(1e-2, tol=1e-12), 2.5)
        assert rep["ratio"] <= 1.0 + 1e-8

    @given(seed=st.integers(0, 1000), q=st.sampled_from([1.5, 2.0, 3.0]))
    @settings(max_examples=10, deadline=None)
    def test_comparison_principle(self, seed, q):
        rng = np.random.default_rng(seed)
        sp = path_graph(10)
        g0 = rng.random(10)
        f0 = g0 + 0.1 - 0.5 * rng.random(10)
        f0 = np.minimum(f0, g0 + 0.1)
        rep = comparison_check(sp, f0, g0, 0.1, 0.05, ProximalConfig(1e-2, tol=1e-12), q)
        assert rep["passed"]


class TestDissipation:
    def test_linear_integrand_conserves(self, rng):
        sp = path_graph(16)
        f = positive_density(rng, sp)
        rep = dissipation_identity_check(sp, f, lambda u: u, np.ones_like, 0.1, ProximalConfig(1e-2), 3.0)
        assert rep["defect"] <= 1e-10

    def test_convex_integrand_defect_is_nonpositive_per_step(self, rng):
        sp = path_graph(16)
        f = positive_density(rng, sp)
        rep = dissipation_identity_check(sp, f, lambda u: u * u, lambda u: 2 * u, 0.1,
                                         ProximalConfig(1e-2), 2.0)
        assert np.all(rep["per_step"] <= 1e-14)

    def test_defect_halves_with_tau(self):
        sp = path_graph(16)
        x = (np.arange(16) + 0.5) / 16
        f = 1.0 + 0.5 * np.cos(np.pi * x)
        defects = [entropy_dissipation_check(sp, f, 2.5, 0.1, ProximalConfig(t))["defect"]
                   for t in (1e-2, 5e-3)]
        assert defects[0] / defects[1] >= 1.8


class TestMomentum:
    def test_flat_weight_gives_constant_bound(self):
        sp = path_graph(8)
        f = np.ones(8)
        for p in (1.5, 2.5):
            rep = momentum_entropy_check(sp, f, np.full(8, 0.1), p, 0.2, ProximalConfig(1e-2))
            np.testing.assert_allclose(rep["S_t"], rep["S_t"][0], rtol=1e-14)
            np.testing.assert_allclose(rep["moment"], rep["moment"][0], rtol=1e-12)
            assert rep["passed"]

    def test_weight_condition(self):
        sp = path_graph(4, length=1.0, measure=1.0)
        with pytest.raises(DomainError, match="weight condition violated"):
            momentum_bound(sp, np.ones(4), np.full(4, 0.01), 2.5)

    def test_distance_weight(self):
        sp = path_graph(32)
        x = (np.arange(32) + 0.5) / 32
        f = 1.5 + np.cos(np.pi * x)
        f /= sp.integrate(f)
        V = np.maximum(0.1, 0.5 * sp.distance[0])
        for p in (1.5, 2.5):
            rep = momentum_entropy_check(sp, f, V, p, 0.2, ProximalConfig(1e-2))
            assert rep["moment_ok"] and rep["fisher_ok"]

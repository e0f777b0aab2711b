"""
Verification suites
===================

A suite runs one family of checks and returns a :class:`SuiteResult`
holding named :class:`Check` records (observed value, limit, verdict) and
plot-ready data. Suites register themselves with :func:`suite`, which also
records the statement each one verifies; ``qflow list-suites`` prints that
table straight from the registry.

Every suite accepts keyword overrides for its fixture. Without overrides
it runs the acceptance fixture.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import calculus as calc
from .config import ExperimentConfig, coordinate, initial_density, weight_function
from .entropy import SlopeSearch, fisher_vertex_form, slope_bruteforce, slope_upper_bound
from .heatflow import (FlowTrajectory, ProximalConfig, comparison_check, dissipation_identity_check,
                       entropy_dissipation_check, lr_contraction_check, momentum_bound,
                       momentum_entropy_check, run_flow)
from .jko import (JkoConfig, identification_check, kuwada_ratios, midpoint_convexity_gap,
                  uniqueness_check)
from .space import (Exponents, MetricMeasureSpace, cycle_graph, exp_p, from_edges, grid_graph, ln_p,
                    path_graph, plog_inequality_gap)
from .transport import polytope_vertices, solve_transport, wasserstein_distance


@dataclass
class Check:
    name: str
    observed: float
    limit: float
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: observed {self.observed:.6g}, limit {self.limit:.6g}"


def at_most(name: str, observed: float, limit: float) -> Check:
    observed = float(observed)
    return Check(name, observed, float(limit), bool(observed <= limit))


def at_least(name: str, observed: float, limit: float) -> Check:
    observed = float(observed)
    return Check(name, observed, float(limit), bool(observed >= limit))


@dataclass
class SuiteResult:
    name: str
    theorem: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {
            "suite": self.name,
            "verifies": self.theorem,
            "passed": self.passed,
            "elapsed": self.elapsed,
            "checks": [{"name": c.name, "observed": c.observed, "limit": c.limit,
                        "passed": c.passed} for c in self.checks],
        }


@dataclass(frozen=True)
class Suite:
    name: str
    theorem: str
    func: Callable
    config_keys: tuple

    def run(self, cfg: ExperimentConfig | None = None, **overrides) -> SuiteResult:
        cfg = cfg or ExperimentConfig()
        start = time.perf_counter()
        checks, data = self.func(np.random.default_rng(cfg.seed), **overrides)
        return SuiteResult(self.name, self.theorem, checks, data, time.perf_counter() - start)

    def overrides_from(self, cfg: ExperimentConfig) -> dict:
        """Fixture overrides taken from an experiment configuration."""
        space = cfg.build_space()
        out = {}
        if "space" in self.config_keys:
            out["space"] = space
        if "f0" in self.config_keys:
            out["f0"] = initial_density(space, cfg.init)
        if "p" in self.config_keys:
            out["p"] = cfg.p
        if "T" in self.config_keys:
            out["T"] = cfg.T
        if "taus" in self.config_keys:
            out["taus"] = list(cfg.tau)
        if "tau" in self.config_keys:
            out["tau"] = cfg.tau[0]
        if "normalization" in self.config_keys:
            out["normalization"] = cfg.normalization
        if "V" in self.config_keys:
            out["V"] = weight_function(space, cfg.weight)
        return out


REGISTRY: dict = {}


def suite(name: str, verifies: str, config_keys: tuple = ()):
    """Register a suite under ``name`` together with the statement it verifies."""
    def wrap(func):
        REGISTRY[name] = Suite(name, verifies, func, tuple(config_keys))
        return func
    return wrap


def list_suites() -> str:
    width = max(len(n) for n in REGISTRY)
    return "\n".join(f"{name.ljust(width)} → {s.theorem}" for name, s in REGISTRY.items())


# --------------------------------------------------------------------------
# random fixtures
# --------------------------------------------------------------------------

def random_space(rng, n_max: int = 25) -> MetricMeasureSpace:
    """Random connected graph with random lengths, conductances and measure."""
    kind = rng.integers(4)
    if kind == 0:
        n = int(rng.integers(2, n_max + 1))
        base = path_graph(n)
    elif kind == 1:
        n = int(rng.integers(3, n_max + 1))
        base = cycle_graph(n)
    elif kind == 2:
        nx = int(rng.integers(2, 6))
        base = grid_graph(nx, int(rng.integers(2, 6)))
    else:
        n = int(rng.integers(3, n_max + 1))
        edges = [(int(rng.integers(i)), i) for i in range(1, n)]  # random spanning tree
        extra = int(rng.integers(0, n))
        edges += [tuple(sorted(rng.choice(n, 2, replace=False).tolist())) for _ in range(extra)]
        return from_edges(n, [(i, j, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)) for i, j in edges],
                          rng.uniform(0.5, 2.0, n) / n, name="random")
    m = base.num_edges
    edges = [(int(i), int(j), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
             for i, j in zip(base.tail, base.head)]
    assert len(edges) == m
    return from_edges(base.n, edges, rng.uniform(0.5, 2.0, base.n) / base.n, name=base.name)


def random_contraction(rng) -> calc.Contraction:
    choice = rng.integers(5)
    if choice == 0:
        return calc.soft_clamp(rng.uniform(0.2, 2.0))
    if choice == 1:
        return calc.positive_part()
    if choice == 2:
        return calc.smooth_positive_part(rng.uniform(1e-3, 1e-1))
    if choice == 3:
        lo, hi = sorted(rng.uniform(-1.0, 1.0, 2))
        return calc.clamp(lo, hi)
    return calc.scaled(rng.uniform(0.0, 1.0))


def _scale(*arrays) -> float:
    return 1.0 + sum(float(np.sum(np.abs(a))) for a in arrays)


# --------------------------------------------------------------------------
# suites
# --------------------------------------------------------------------------

@suite("calculus", "q-Laplacian calculus and contraction inequalities")
def calculus_suite(rng, instances: int = 100, n_max: int = 25):
    """Exact discrete identities on random graphs.

    Floating-point limits are relative to the size of the summands:
    ``1e-12 * (1 + Σ|terms|)``.
    """
    worst = {k: 0.0 for k in ("sbp", "null_mass", "pairing", "pairing_sign", "monotonicity",
                              "conv_diff", "grad_contr")}
    for _ in range(instances):
        space = random_space(rng, n_max)
        q = float(rng.uniform(1.2, 4.0))
        f, g, h = rng.standard_normal((3, space.n))
        lap = calc.q_laplacian(space, f, q)
        terms = space.edge_mass * np.abs(calc.flux(space.gradient(f), q)) * np.abs(space.gradient(h))
        scale = _scale(terms, h * lap * space.measure)
        pairing = calc.dissipation_pairing(space, h, f, q)
        worst["sbp"] = max(worst["sbp"], abs(calc.inner(space, h, lap) + pairing) / scale)
        worst["null_mass"] = max(worst["null_mass"],
                                 abs(np.dot(lap, space.measure)) / _scale(lap * space.measure))

        phi = random_contraction(rng)
        phif = phi(f)
        pair_phi = calc.dissipation_pairing(space, phif, f, q)
        scale_phi = _scale(phif * lap * space.measure)
        worst["pairing"] = max(worst["pairing"],
                               abs(pair_phi + calc.inner(space, phif, lap)) / scale_phi)
        worst["pairing_sign"] = max(worst["pairing_sign"], -pair_phi / scale_phi)

        mono = calc.laplacian_monotonicity_gap(space, f, g, phi, q)
        worst["monotonicity"] = max(worst["monotonicity"], mono)

        for s in (1.0, q, 2.0 * q):
            psi = lambda t, s=s: np.power(t, s)
            gap = calc.conv_diff_gap(space, f, g, phi, psi, form="edge")
            ref = calc.local_edge_cost(space, f, psi) + calc.local_edge_cost(space, g, psi)
            worst["conv_diff"] = max(worst["conv_diff"], float(np.max(gap / (1.0 + ref))))
        e = calc.energy_contraction_gap(space, f, g, phi, q)
        ref = 1.0 + calc.cheeger_energy(space, f, q) + calc.cheeger_energy(space, g, q)
        worst["grad_contr"] = max(worst["grad_contr"], e / ref)
    checks = [
        at_most("summation by parts (relative)", worst["sbp"], 1e-12),
        at_most("null mass of the q-Laplacian (relative)", worst["null_mass"], 1e-12),
        at_most("dissipation pairing identity (relative)", worst["pairing"], 1e-12),
        at_most("dissipation pairing sign (relative)", worst["pairing_sign"], 1e-12),
        at_most("monotonicity gap", worst["monotonicity"], 1e-12),
        at_most("conv-diff per vertex, edge form (relative)", worst["conv_diff"], 1e-12),
        at_most("energy contraction (relative)", worst["grad_contr"], 1e-12),
    ]
    return checks, {"worst": worst, "instances": instances}


@suite("plog", "p-logarithm inequality")
def plog_suite(rng, points: int = 10_000):
    worst_inv = 0.0
    for p in (1.1, 1.5, 1.9, 2.1, 2.5, 2.9):
        s = np.logspace(-3, 3, 301)
        worst_inv = max(worst_inv, float(np.max(np.abs(exp_p(ln_p(s, p), p) / s - 1.0))))
        t = ln_p(s, p)
        worst_inv = max(worst_inv, float(np.max(np.abs(ln_p(exp_p(t, p), p) - t) / np.maximum(1.0, np.abs(t)))))
    x = rng.uniform(0.0, 10.0, points)
    V = rng.uniform(0.0, 5.0, points)
    ps = rng.choice([2.1, 2.5, 2.9], points)
    gaps = np.array([plog_inequality_gap(xi, vi, pi) for xi, vi, pi in zip(x, V, ps)])
    h = np.linspace(-0.5, 0.5, 1001)
    prod = max(float(np.max(exp_p(h, p) * exp_p(-h, p))) for p in (2.1, 2.5, 2.9))
    limit_err = 0.0
    for p in (2.0 - 1e-4, 2.0 + 1e-4):
        s = np.logspace(-2, 2, 41)
        limit_err = max(limit_err, float(np.max(np.abs(ln_p(s, p) - np.log(s)) / np.maximum(np.abs(np.log(s)), 1e-300))))
        t = np.linspace(-3, 3, 41)
        limit_err = max(limit_err, float(np.max(np.abs(exp_p(t, p) / np.exp(t) - 1.0))))
    checks = [
        at_most("exp_p/ln_p inversion (relative)", worst_inv, 1e-12),
        at_least("min plog inequality gap", float(gaps.min()), -1e-12),
        at_most("max exp_p(h) exp_p(-h) for |h| <= 0.5", prod, 2.0),
        at_most("p -> 2 limit (relative)", limit_err, 1e-3),
    ]
    return checks, {"min_gap": float(gaps.min()), "max_product": prod}


def _heat_fixtures():
    return [path_graph(32), grid_graph(5, 5)]


@suite("heat-structure", "q-heat flow comparison and contraction", config_keys=("space", "T", "tau"))
def heat_structure_suite(rng, space=None, ps=(1.5, 2.5), T: float = 0.2, tau: float = 1e-2):
    spaces = [space] if space is not None else _heat_fixtures()
    mass = comparison = contraction = cheeger_up = entropy_up = 0.0
    rows = []
    for sp in spaces:
        for p in ps:
            q = p / (p - 1.0)
            cfg = ProximalConfig(tau, tol=1e-11)
            f0 = rng.uniform(0.1, 1.0, sp.n)
            traj = run_flow(sp, f0, T, cfg, q)
            d = traj.diagnostics
            mass = max(mass, float(np.max(np.abs(d["mass"] - d["mass"][0])) / abs(d["mass"][0])))
            cheeger_up = max(cheeger_up, float(np.max(np.diff(d["cheeger"]))) / (1.0 + d["cheeger"][0]))
            entropy_up = max(entropy_up, float(np.max(np.diff(d["entropy"]))) / (1.0 + abs(d["entropy"][0])))
            C = 0.3
            g0 = f0 - C + rng.uniform(0.0, 0.5, sp.n)  # f0 <= g0 + C
            comparison = max(comparison, comparison_check(sp, f0, g0, C, T, cfg, q)["excess"])
            comparison = max(comparison, comparison_check(sp, np.zeros(sp.n), f0, 0.0, T, cfg, q)["excess"])
            for r in (1.0, 2.0, 3.0):
                g1 = rng.uniform(0.1, 1.0, sp.n)
                ratio = lr_contraction_check(sp, f0, g1, r, T, cfg, q)["ratio"]
                contraction = max(contraction, ratio)
                rows.append({"space": sp.name, "p": p, "r": r, "ratio": ratio})
    checks = [
        at_most("relative mass drift", mass, 1e-10),
        at_most("comparison principle excess", comparison, 1e-12),
        at_most("L^r contraction ratio, r in {1,2,3}", contraction, 1.0 + 1e-8),
        at_most("Cheeger energy increase (relative)", cheeger_up, 1e-12),
        at_most("entropy increase (relative)", entropy_up, 1e-12),
    ]
    return checks, {"contraction": rows}


@suite("dissipation", "energy dissipation identity", config_keys=("p", "T"))
def dissipation_suite(rng, n: int = 16, p: float = 2.5, T: float = 0.1,
                      taus=(1e-2, 5e-3, 2.5e-3)):
    sp = path_graph(n)
    x = coordinate(sp)
    f0 = 1.0 + 0.5 * np.cos(np.pi * x)
    table = {}
    sq = [dissipation_identity_check(sp, f0, lambda s: s * s, lambda s: 2.0 * s, T,
                                     ProximalConfig(t), 2.0)["defect"] for t in taus]
    up = [entropy_dissipation_check(sp, f0, p, T, ProximalConfig(t))["defect"] for t in taus]
    lin = dissipation_identity_check(sp, f0, lambda s: s, lambda s: np.ones_like(s), T,
                                     ProximalConfig(taus[0]), p / (p - 1.0))["defect"]
    table["s^2"] = sq
    table["U_p"] = up
    checks = [at_most("linear e: defect equals mass change", lin, 1e-10)]
    for name, vals in table.items():
        for a, b, ta in zip(vals, vals[1:], taus):
            checks.append(at_least(f"defect ratio e={name}, tau={ta:g} -> {ta / 2:g}", a / b, 1.8))
    return checks, {"taus": list(taus), "defects": table}


@suite("momentum", "momentum-entropy bound", config_keys=("V", "T", "tau"))
def momentum_suite(rng, n: int = 32, ps=(1.5, 2.5), T: float = 0.5, tau: float = 1e-2, V=None):
    sp = path_graph(n)
    V = np.maximum(0.1, 0.5 * sp.distance[0]) if V is None else V
    f0 = initial_density(sp, "bump:0.5")
    checks, data = [], {}
    for p in ps:
        rep = momentum_entropy_check(sp, f0, V, p, T, ProximalConfig(tau))
        S = rep["S_t"]
        checks.append(at_most(f"p={p}: max (M^q(t) - S_t)/S_t", float(np.max((rep["moment"] - S) / S)), 1e-6))
        cap = 4.0 / (3.0 - p) * S
        checks.append(at_most(f"p={p}: max (Fisher integral - 4 S_t/(3-p))/S_t",
                              float(np.max((rep["fisher_integral"] - cap) / S)), 1e-6))
        data[p] = {k: rep[k] for k in ("moment", "fisher_integral", "S_t", "weight_integral",
                                       "weighted_moment_integral", "z")}
    return checks, data


@suite("mass-preservation", "Thm q-mass-pres", config_keys=("space", "V", "T", "tau"))
def mass_preservation_suite(rng, space=None, ps=(1.5, 2.5), T: float = 0.5, tau: float = 1e-2, V=None):
    """Mass conservation together with the weight hypotheses of the theorem.

    Both weight integrals are reported; no conclusion is drawn from the
    stronger one.
    """
    sp = space if space is not None else path_graph(32)
    V = np.maximum(0.1, 0.5 * sp.distance[0]) if V is None else V
    f0 = initial_density(sp, "spike")
    checks, data = [], {}
    for p in ps:
        traj = run_flow(sp, f0, T, ProximalConfig(tau), p / (p - 1.0), V=V, p=p)
        m = traj.diagnostics["mass"]
        checks.append(at_most(f"p={p}: relative mass drift", float(np.max(np.abs(m - m[0])) / m[0]), 1e-10))
        if p > 2.0:
            b = momentum_bound(sp, f0, V, p)
            checks.append(at_most(f"p={p}: Σ exp_p(-V^p) μ", b.weight_integral, 1.0))
            data[p] = {"weight_integral": b.weight_integral,
                       "weighted_moment_integral": b.weighted_moment_integral}
    return checks, data


@suite("transport", "w_p as a transportation LP")
def transport_suite(rng, triples: int = 200):
    fixtures = [path_graph(2), path_graph(3), path_graph(4), path_graph(5), cycle_graph(3),
                cycle_graph(4), cycle_graph(5), grid_graph(2, 2),
                from_edges(5, [(0, 1, 1.0, 1.0), (0, 2, 0.5, 1.0), (0, 3, 2.0, 1.0), (3, 4, 0.7, 1.0)],
                           np.full(5, 0.2), name="star")]
    pairs_rng = np.random.default_rng(12345)  # fixed fixture set, independent of the seed
    worst = 0.0
    for sp in fixtures:
        n = sp.n
        pairs = [(np.full(n, 1.0 / n), np.eye(n)[-1])]
        pairs += [(pairs_rng.dirichlet(np.ones(n)), pairs_rng.dirichlet(np.ones(n))) for _ in range(3)]
        for a, b in pairs:
            verts = polytope_vertices(a, b)  # independent of the cost exponent
            for p in (1.5, 2.0, 2.5, 3.0):
                C = sp.distance ** p
                brute = float(np.min(np.einsum("vij,ij->v", verts, C)))
                worst = max(worst, abs(solve_transport(C, a, b)[3] - brute))
    sym = tri = 0.0
    for _ in range(triples):
        sp = random_space(rng, 12)
        p = float(rng.uniform(1.1, 3.0))
        a, b, c = rng.dirichlet(np.ones(sp.n), 3)
        dab = wasserstein_distance(sp, a, b, p)
        dba = wasserstein_distance(sp, b, a, p)
        dac = wasserstein_distance(sp, a, c, p)
        dcb = wasserstein_distance(sp, c, b, p)
        sym = max(sym, abs(dab - dba))
        tri = max(tri, dab - dac - dcb)
    checks = [
        at_most("LP cost vs brute-force vertex minimum", worst, 1e-10),
        at_most("w_p symmetry", sym, 1e-10),
        at_most("w_p triangle inequality excess", tri, 1e-9),
    ]
    return checks, {}


@suite("kuwada", "Kuwada lemma", config_keys=("p",))
def kuwada_suite(rng, ns=(16, 32, 64), p: float = 2.5, dt: float = 0.05, T: float = 0.1,
                 substeps: int = 10, floor: float = 0.0):
    """Kuwada ratios of the q-heat flow on refining 1-D grids.

    The flow is integrated with step ``dt/substeps`` and sampled every
    ``dt``; ``κ_k`` compares the finite-difference metric speed over each
    sampling interval with the vertex-form Fisher information at its left
    end. Ratios are computed for both normalizations of ``w_p``. The
    horizon matches the identification fixture; later in the flow the
    density flattens and the graph speed exceeds the continuum bound.
    """
    rows = []
    for n in ns:
        sp = path_graph(n)
        f0 = initial_density(sp, f"bump:{floor}")
        rows.append({"n": n,
                     "kappa_max": _kuwada_max(sp, f0, p, dt, T, substeps, False),
                     "kappa_max_standard": _kuwada_max(sp, f0, p, dt, T, substeps, True)})
    checks = []
    for key in ("kappa_max", "kappa_max_standard"):
        vals = [r[key] for r in rows]
        checks.append(at_most(f"{key} at n={ns[0]}", vals[0], 1.1))
        checks.append(at_most(f"{key} increase under refinement", max(np.diff(vals), default=0.0), 0.0))
    return checks, {"rows": rows, "dt": dt, "T": T}


def _kuwada_max(sp, f0, p, dt, T, substeps, standard):
    q = p / (p - 1.0)
    traj = run_flow(sp, f0, T, ProximalConfig(dt / substeps), q)
    sampled = FlowTrajectory(traj.times[::substeps], traj.states[::substeps])
    return float(np.max(kuwada_ratios(sp, sampled, p, standard)))


@suite("identify", "Identification Theorem",
       config_keys=("space", "f0", "p", "T", "taus", "normalization"))
def identify_suite(rng, space=None, f0=None, p: float = 2.5, T: float = 0.1,
                   taus=(1e-2, 5e-3, 2.5e-3), normalization: str = "standard"):
    sp = space if space is not None else path_graph(16)
    f0 = initial_density(sp, "bump") if f0 is None else f0
    rep = identification_check(sp, f0, T, list(taus), p, normalization)
    checks = [at_least(f"D ratio tau={a:g} -> {b:g}", r, 1.3)
              for a, b, r in zip(taus, taus[1:], rep.ratios)]
    members = [{k: v for k, v in m.items() if k == "kappa"} for m in rep.members]
    return checks, {"rows": rep.to_rows(), "normalization": rep.normalization,
                    "kappa": [m["kappa"].tolist() for m in members],
                    "heat": [m["heat"] for m in rep.members],
                    "jko": [m["jko"] for m in rep.members]}


@suite("uniqueness", "uniqueness of the entropy gradient flow", config_keys=("space", "f0", "p", "T", "tau"))
def uniqueness_suite(rng, space=None, f0=None, p: float = 2.5, T: float = 0.1, tau: float = 1e-2,
                     tol: float = 1e-10):
    sp = space if space is not None else path_graph(16)
    f0 = initial_density(sp, "bump") if f0 is None else f0
    rep = uniqueness_check(sp, f0 * sp.measure, T, JkoConfig(tau, p, tol=tol))
    two = path_graph(2, length=1.0, measure=[0.5, 0.5], conductance=1.0)
    rep2 = uniqueness_check(two, [0.9, 0.1], 1.0, JkoConfig(0.3, p, tol=tol))
    return [at_most("divergence across inner-solver starts", rep["divergence"], 10.0 * tol),
            at_most("divergence on the two-point space", rep2["divergence"], 1e-8)], \
        {"runs": rep["runs"], "divergence": rep["divergence"]}


SLOPE_SEARCH = SlopeSearch(resolution=40, radii=(0.2, 0.1, 0.05, 0.02, 0.01), directions=16,
                           random_points=200, seed=0)


def slope_fixtures():
    two = path_graph(2, length=1.0, measure=[0.5, 0.5], conductance=1.0)
    three = path_graph(3)
    return [
        ("two-point", two, np.array([0.7, 0.3]), 2.5),
        ("two-point", two, np.array([0.7, 0.3]), 1.5),
        ("two-point", two, np.array([0.2, 0.8]), 2.5),
        ("three-point", three, np.array([0.5, 1.0, 1.5]) / 3.0, 1.5),
        ("three-point", three, np.array([0.5, 1.0, 1.5]) / 3.0, 2.5),
        ("three-point", three, np.array([0.2, 0.3, 0.5]), 1.8),
    ]


@suite("slope", "descending-slope upper bound")
def slope_suite(rng, search: SlopeSearch = SLOPE_SEARCH):
    rows, worst = [], 0.0
    for name, sp, mu0, p in slope_fixtures():
        brute = slope_bruteforce(sp, mu0, p, search=search)
        upper = slope_upper_bound(sp, mu0 / sp.measure, p)
        worst = max(worst, brute / upper)
        rows.append({"space": name, "mu0": mu0.tolist(), "p": p, "bruteforce": brute, "upper": upper})
    return [at_most("max slope_bruteforce / slope_upper_bound", worst, 1.1)], {
        "rows": rows, "search": search.__dict__}


@suite("convexity", "joint convexity of the Fisher integrand for p <= 2")
def convexity_suite(rng, pairs: int = 200):
    worst = -np.inf
    for _ in range(pairs):
        sp = random_space(rng, 12)
        p = float(rng.choice([1.25, 1.5, 1.8, 2.0]))
        f = rng.uniform(0.05, 2.0, sp.n)
        g = rng.uniform(0.05, 2.0, sp.n)
        exps = Exponents.from_p(p)
        ref = 1.0 + fisher_vertex_form(sp, f, exps) + fisher_vertex_form(sp, g, exps)
        worst = max(worst, midpoint_convexity_gap(sp, f, g, p) / ref)
    return [at_most("midpoint convexity excess (relative)", worst, 1e-10)], {"worst": worst}

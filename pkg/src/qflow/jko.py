"""
Minimizing movements for the Renyi entropy in (P_p, w_p)
========================================================

One step maps ``μ_k`` to a minimizer of

    Φ(ν) = U_p(ν) + w_p(μ_k, ν)^p / (p τ^{p-1}).

Written in coupling variables ``π`` with row sums ``μ_k`` and column sums
``ν``, the problem is convex and smooth in the interior of the polytope:

    min_π  Σ_j U(ν_j/μ_j) μ_j + c <C, π>,   C_ij = d_ij^p,

with ``c = 1/(p τ^{p-1})`` for the standard distance and an extra ``1/p``
for the default normalization. It is solved by a primal log-barrier
method. The barrier Hessian is diagonal and the entropy Hessian couples
only entries of the same column, so each Newton system is solved in
``O(n^3)`` through the Sherman-Morrison-Woodbury identity.

The first-order residual reported for a step is the Frank-Wolfe gap
``<∇Φ(π), π> - Σ_i μ_i min_j ∂_ij Φ(π)``, an upper bound for
``Φ(π) - min Φ``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import U_p, U_p_prime, fisher_vertex_form, slope_upper_bound
from .heatflow import FlowTrajectory, ProximalConfig, run_flow
from .space import DomainError, Exponents, MetricMeasureSpace
from .transport import as_probability, density_to_probability, wasserstein_distance


class JkoConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class JkoConfig:
    """Controls of the minimizing-movement scheme.

    ``normalization`` selects the distance in the movement penalty:
    ``"scaled"`` keeps the ``1/p`` inside ``w_p^p``, ``"standard"`` drops it.
    ``init`` picks the starting coupling of the inner solver.
    """

    tau: float
    p: float
    tol: float = 1e-10
    max_steps: int = 10_000
    normalization: str = "scaled"
    init: str = "product"
    seed: int = 0
    max_newton: int = 500

    def __post_init__(self):
        if not (self.tau > 0.0 and self.tol > 0.0):
            raise ValueError("tau and tol must be positive")
        if self.p == 2.0:
            raise DomainError("use log entropy: the scheme needs p != 2")
        if not 1.0 < self.p < 3.0:
            raise DomainError("p out of (1,3)")
        if self.normalization not in ("scaled", "standard"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.init not in ("product", "diagonal", "random"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def standard(self) -> bool:
        return self.normalization == "standard"

    @property
    def penalty(self) -> float:
        """Factor ``c`` multiplying the raw cost ``<C, π>``."""
        c = 1.0 / (self.p * self.tau ** (self.p - 1.0))
        return c if self.standard else c / self.p


def _initial_coupling(mu_k: np.ndarray, cfg: JkoConfig) -> np.ndarray:
    n = mu_k.shape[0]
    if cfg.init == "product":
        return np.outer(mu_k, np.full(n, 1.0 / n))
    if cfg.init == "diagonal":
        theta = 1e-3
        return (1.0 - theta) * np.diag(mu_k) + theta * np.outer(mu_k, np.full(n, 1.0 / n))
    rng = np.random.default_rng(cfg.seed)
    rows = rng.dirichlet(np.ones(n), size=n)
    return mu_k[:, None] * rows


def jko_objective(space: MetricMeasureSpace, pi, C, c: float, p: float) -> float:
    nu = pi.sum(axis=0)
    return float(np.dot(U_p(nu / space.measure, p), space.measure) + c * np.sum(pi * C))


def _gradient(space, pi, C, c, p):
    nu = pi.sum(axis=0)
    return U_p_prime(nu / space.measure, p)[None, :] + c * C


def frank_wolfe_gap(space: MetricMeasureSpace, pi, mu_k, C, c: float, p: float) -> float:
    g = _gradient(space, pi, C, c, p)
    return float(np.sum(g * pi) - np.dot(mu_k, g.min(axis=1)))


def _newton_direction(space, pi, g_barrier, t, p):
    """Equality-constrained Newton step for ``t Φ(π) - Σ log π`` with fixed row sums.

    The Hessian is ``diag(1/π²)`` plus, per column ``j``, the rank-one term
    ``t U''(ν_j/μ_j)/μ_j 11ᵀ``. Its inverse is applied column by column; the
    expressions are arranged so that a dominant entry of a column never
    cancels against itself, which keeps the step accurate when the barrier
    parameter is large.
    """
    mu = space.measure
    n = pi.shape[0]
    nu = pi.sum(axis=0)
    dd = t * np.power(nu / mu, 1.0 - p) / mu
    P2 = pi * pi
    off = 1.0 - np.eye(n)
    # others[i, j] = Σ_{k != i} P2[k, j], summed without subtracting P2[i, j]
    others = np.einsum("ik,kj->ij", off, P2)
    inv_dd = 1.0 / dd
    denom = inv_dd + P2 + others

    def hinv(V):
        # P2_ij (V_ij inv_dd_j + Σ_k P2_kj (V_ij - V_kj)) / denom_ij
        cross = np.einsum("kj,ikj->ij", P2, V[:, None, :] - V[None, :, :])
        return P2 * (V * inv_dd[None, :] + cross) / denom

    # Schur complement A H^{-1} Aᵀ of the row-sum constraints
    S = -(P2 / denom) @ P2.T
    np.fill_diagonal(S, np.sum(P2 * (inv_dd[None, :] + others) / denom, axis=1))
    h = hinv(g_barrier)
    w = np.linalg.solve(S, -h.sum(axis=1))
    return -hinv(g_barrier + w[:, None])


def _support_components(support: np.ndarray):
    """Connected components of the bipartite support graph (rows ``i``, columns ``n + j``)."""
    n = support.shape[0]
    parent = list(range(2 * n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(*np.nonzero(support)):
        parent[find(i)] = find(n + j)
    return np.array([find(a) for a in range(2 * n)])


def _crossover(space, mu_k, C, c, p, support, nu_guess, lam_guess):
    """Solve the optimality system exactly on a fixed support.

    Unknowns are the row multipliers ``λ`` and the column masses ``ν`` of
    the active columns. Equations: ``λ_i = U'(ν_j/μ_j) + c C_ij`` on the
    support and mass balance on each connected component. Returns
    ``(π, ν, λ)`` or ``None`` when the support is inconsistent.
    """
    n = space.n
    mu = space.measure
    rows, cols = np.nonzero(support)
    active_cols = np.unique(cols)
    if np.setdiff1d(np.arange(n), rows).size:
        return None
    col_index = -np.ones(n, dtype=int)
    col_index[active_cols] = np.arange(active_cols.size)
    comp = _support_components(support)
    labels = np.unique(comp[np.concatenate([rows, n + cols])])
    nv = active_cols.size
    x = np.concatenate([lam_guess, nu_guess[active_cols]])
    if np.any(x[n:] <= 0.0):
        return None
    upp = lambda y: np.power(y, 1.0 - p)
    for _ in range(100):
        lam, nua = x[:n], x[n:]
        rho = nua[col_index[cols]] / mu[cols]
        F_edge = lam[rows] - U_p_prime(rho, p) - c * C[rows, cols]
        F_mass = np.array([mu_k[comp[:n] == lab].sum() - nua[comp[n + active_cols] == lab].sum()
                           for lab in labels])
        F = np.concatenate([F_edge, F_mass])
        Jm = np.zeros((F.size, n + nv))
        e = np.arange(rows.size)
        Jm[e, rows] = 1.0
        Jm[e, n + col_index[cols]] = -upp(rho) / mu[cols]
        for r, lab in enumerate(labels):
            Jm[rows.size + r, n + np.nonzero(comp[n + active_cols] == lab)[0]] = -1.0
        step = np.linalg.lstsq(Jm, -F, rcond=None)[0]
        alpha = 1.0
        while np.any(x[n:] + alpha * step[n:] <= 0.0):
            alpha *= 0.5
        x = x + alpha * step
        if np.max(np.abs(F)) < 1e-14 * max(1.0, np.max(np.abs(x[:n]))) or np.max(np.abs(step)) < 1e-16:
            break
    lam, nu = x[:n], np.zeros(n)
    nu[active_cols] = x[n:]
    # plan on the support from the two marginals
    B = np.zeros((2 * n, rows.size))
    B[rows, np.arange(rows.size)] = 1.0
    B[n + cols, np.arange(rows.size)] = 1.0
    vals = np.linalg.lstsq(B, np.concatenate([mu_k, nu]), rcond=None)[0]
    pi = np.zeros((n, n))
    pi[rows, cols] = vals
    return pi, nu, lam


def _certify(space, pi, nu, lam, mu_k, C, c, p):
    """Check primal and dual feasibility of a crossover candidate."""
    if pi.min() < -1e-13 or np.any(nu < 0.0):
        return False
    if np.max(np.abs(pi.sum(axis=1) - mu_k)) > 1e-12 or np.max(np.abs(pi.sum(axis=0) - nu)) > 1e-12:
        return False
    with np.errstate(divide="ignore"):
        g = U_p_prime(nu / space.measure, p)[None, :] + c * C
    reduced = g - lam[:, None]
    return bool(np.nanmin(reduced) >= -1e-10)


def jko_step(space: MetricMeasureSpace, mu_k, cfg: JkoConfig, return_info: bool = False):
    """One minimizing movement from the probability vector ``mu_k``.

    A log-barrier path-following phase locates the support of an optimal
    coupling; a crossover phase then solves the optimality system on that
    support exactly and certifies the result. If no candidate support
    certifies, the barrier iterate itself is returned when its
    Frank-Wolfe gap is below the tolerance.
    """
    mu_k = as_probability(mu_k)
    n, p = space.n, cfg.p
    C = space.distance ** p
    c = cfg.penalty
    pi = np.maximum(_initial_coupling(mu_k, cfg), 1e-300)

    def barrier(P, t):
        if np.any(P <= 0.0):
            return np.inf
        return t * jko_objective(space, P, C, c, p) - float(np.sum(np.log(P)))

    m = n * n
    t = 1.0
    t_final = 1e2 * m / cfg.tol
    newton = 0
    result = None
    while True:
        f_cur = barrier(pi, t)
        for _ in range(cfg.max_newton):
            grad = t * _gradient(space, pi, C, c, p) - 1.0 / pi
            d = _newton_direction(space, pi, grad, t, p)
            dec2 = -float(np.sum(grad * d))
            if dec2 <= 1e-12:
                break
            alpha = 1.0
            neg = d < 0.0
            if np.any(neg):
                alpha = min(1.0, 0.99 * float(np.min(-pi[neg] / d[neg])))
            while True:
                trial = pi + alpha * d
                f_trial = barrier(trial, t)
                if f_trial <= f_cur - 1e-4 * alpha * dec2 or alpha < 1e-12:
                    break
                alpha *= 0.5
            if alpha < 1e-12:
                break
            # re-impose the row sums against rounding drift
            pi = trial * (mu_k / trial.sum(axis=1))[:, None]
            f_cur = barrier(pi, t)
            newton += 1
        if t >= 1e3:
            nu_b = pi.sum(axis=0)
            g = _gradient(space, pi, C, c, p)
            lam_b = (g * pi).sum(axis=1) / mu_k
            for thresh in (1e2 / t, 1e3 / t, 1e4 / t):
                cand = _crossover(space, mu_k, C, c, p, pi > thresh, nu_b, lam_b)
                if cand is not None and _certify(space, *cand, mu_k, C, c, p):
                    result = cand
                    break
        if result is not None or t >= t_final:
            break
        t = min(t * 10.0, t_final)
    if result is not None:
        pi = np.maximum(result[0], 0.0)
        method = "crossover"
    else:
        method = "barrier"
    gap = frank_wolfe_gap(space, pi, mu_k, C, c, p)
    if gap > cfg.tol:
        raise JkoConvergenceError("jko inner solver not converged", gap)
    nu = pi.sum(axis=0)
    nu = nu / nu.sum()
    if return_info:
        return nu, {"residual": gap, "newton": newton, "coupling": pi, "method": method,
                    "objective": jko_objective(space, pi, C, c, p)}
    return nu


def jko_value(space: MetricMeasureSpace, mu_k, nu, cfg: JkoConfig) -> float:
    """``Φ(ν)`` evaluated with an exact transport solve."""
    w = wasserstein_distance(space, mu_k, nu, cfg.p, cfg.standard)
    rho = as_probability(nu) / space.measure
    return float(np.dot(U_p(rho, cfg.p), space.measure)
                 + w ** cfg.p / (cfg.p * cfg.tau ** (cfg.p - 1.0)))


def run_jko(space: MetricMeasureSpace, mu0, T: float, cfg: JkoConfig) -> FlowTrajectory:
    """``ceil(T/τ)`` minimizing movements with an energy-dissipation ledger.

    States are stored as densities w.r.t. the vertex measure so they
    compare directly with heat-flow states of unit mass.
    """
    p = cfg.p
    exps = Exponents.from_p(p)
    nu = as_probability(mu0)
    steps = min(cfg.max_steps, max(1, math.ceil(T / cfg.tau - 1e-9)))
    times, states = [0.0], [nu / space.measure]
    entropy = [float(np.dot(U_p(nu / space.measure, p), space.measure))]
    dist, residual, slope_q = [0.0], [0.0], [np.nan]
    for k in range(steps):
        new, info = jko_step(space, nu, cfg, return_info=True)
        dist.append(wasserstein_distance(space, nu, new, p, cfg.standard))
        residual.append(info["residual"])
        rho = new / space.measure
        entropy.append(float(np.dot(U_p(rho, p), space.measure)))
        slope_q.append(slope_upper_bound(space, rho, p) ** exps.q if np.all(rho > 0) else np.nan)
        times.append((k + 1) * cfg.tau)
        states.append(rho)
        nu = new
    dist = np.asarray(dist)
    entropy = np.asarray(entropy)
    speed = dist / cfg.tau
    kinetic = float(np.sum(speed[1:] ** p) * cfg.tau / p)
    slope_term = float(np.nansum(np.asarray(slope_q)[1:]) * cfg.tau / exps.q)
    drop = float(entropy[0] - entropy[-1])
    diag = {
        "entropy": entropy,
        "distance": dist,
        "speed": speed,
        "step_residual": np.asarray(residual),
        "slope_q": np.asarray(slope_q),
        "mass": np.array([float(np.dot(s, space.measure)) for s in states]),
    }
    meta = {
        "p": p, "tau": cfg.tau, "normalization": cfg.normalization,
        "edi": {
            "entropy_drop": drop,
            "kinetic": kinetic,
            "slope_term": slope_term,
            # relative shortfall of the drop against the kinetic term
            "edi_defect": (1.0 - drop / kinetic) if kinetic > 0.0 else 0.0,
        },
    }
    return FlowTrajectory(np.asarray(times), states, diag, meta)


# --------------------------------------------------------------------------
# comparison with the heat flow
# --------------------------------------------------------------------------

def kuwada_ratios(space: MetricMeasureSpace, traj: FlowTrajectory, p: float,
                  standard_normalization: bool = False) -> np.ndarray:
    """``κ_k = (w_p(μ_k, μ_{k+1}) / Δt)^p / F_vertex(f_k)`` along a trajectory."""
    exps = Exponents.from_p(p)
    out = []
    for k in range(len(traj) - 1):
        a, b = traj.states[k], traj.states[k + 1]
        dt = traj.times[k + 1] - traj.times[k]
        w = wasserstein_distance(space, density_to_probability(space, a),
                                 density_to_probability(space, b), p, standard_normalization)
        fisher = fisher_vertex_form(space, a / space.integrate(a), exps)
        out.append((w / dt) ** p / fisher if fisher > 0.0 else (0.0 if w == 0.0 else np.inf))
    return np.asarray(out)


def kuwada_check(space: MetricMeasureSpace, f0, T: float, tau: float, p: float,
                 standard_normalization: bool = False, heat_tol: float = 1e-10) -> dict:
    q = p / (p - 1.0)
    traj = run_flow(space, f0, T, ProximalConfig(tau, tol=heat_tol), q)
    kappa = kuwada_ratios(space, traj, p, standard_normalization)
    return {"n": space.n, "tau": tau, "kappa": kappa, "kappa_max": float(np.max(kappa))}


@dataclass
class IdentificationReport:
    taus: list
    D: list
    kuwada_max: list
    edi_defect: list
    normalization: str
    members: list = field(default_factory=list)

    @property
    def ratios(self) -> list:
        return [a / b if b > 0 else np.inf for a, b in zip(self.D[:-1], self.D[1:])]

    def to_rows(self) -> list:
        return [{"tau": t, "D": d, "kuwada_max": k, "edi_defect": e}
                for t, d, k, e in zip(self.taus, self.D, self.kuwada_max, self.edi_defect)]


def identification_check(space: MetricMeasureSpace, f0, T: float, taus, p: float,
                         normalization: str = "standard", heat_tol: float = 1e-10,
                         jko_tol: float = 1e-10) -> IdentificationReport:
    """Run both schemes for every ``τ`` and record ``D(τ) = max_k w_p(μ_k^heat, μ_k^jko)``.

    ``normalization`` applies to the movement penalty, to ``D`` and to the
    Kuwada ratios. With the default ``1/p`` inside ``w_p^p`` the scheme
    follows the heat flow run at a different speed, so the comparison uses
    the standard distance unless told otherwise.
    """
    f0 = np.asarray(f0, dtype=float)
    if np.any(f0 <= 0.0):
        raise DomainError("identification needs a strictly positive initial density")
    exps = Exponents.from_p(p)
    if exps.r <= 0.0:
        raise DomainError("identification needs r > 0")
    f0 = f0 / space.integrate(f0)
    standard = normalization == "standard"
    report = IdentificationReport([], [], [], [], normalization)
    for tau in taus:
        heat = run_flow(space, f0, T, ProximalConfig(tau, tol=heat_tol), exps.q)
        jko = run_jko(space, f0 * space.measure, T,
                      JkoConfig(tau, p, tol=jko_tol, normalization=normalization))
        D = max(wasserstein_distance(space, density_to_probability(space, a),
                                     density_to_probability(space, b), p, standard)
                for a, b in zip(heat.states, jko.states))
        kappa = kuwada_ratios(space, heat, p, standard)
        report.taus.append(tau)
        report.D.append(float(D))
        report.kuwada_max.append(float(np.max(kappa)))
        report.edi_defect.append(jko.meta["edi"]["edi_defect"])
        report.members.append({"heat": heat, "jko": jko, "kappa": kappa})
    return report


def uniqueness_check(space: MetricMeasureSpace, mu0, T: float, cfg: JkoConfig,
                     inits=("product", "diagonal", "random"), seeds=(0, 1)) -> dict:
    """Run the scheme from several inner-solver starts and compare the trajectories.

    ``divergence`` is the largest ``ℓ¹`` distance between corresponding
    iterates of any two runs.
    """
    runs = []
    for init in inits:
        for seed in (seeds if init == "random" else seeds[:1]):
            variant = JkoConfig(cfg.tau, cfg.p, cfg.tol, cfg.max_steps, cfg.normalization,
                                init, seed, cfg.max_newton)
            traj = run_jko(space, mu0, T, variant)
            runs.append(np.array([s * space.measure for s in traj.states]))
    ref = runs[0]
    divergence = max(float(np.max(np.abs(r - ref).sum(axis=1))) for r in runs)
    return {"runs": len(runs), "divergence": divergence, "tolerance": cfg.tol,
            "passed": divergence <= 10.0 * cfg.tol}


def midpoint_convexity_gap(space: MetricMeasureSpace, f, g, p: float) -> float:
    """``F((f+g)/2) - (F(f) + F(g))/2`` for the vertex-form Fisher functional.

    Nonpositive whenever ``p <= 2 <= q``: the integrand ``s^q / f^{p-1}`` is
    jointly convex and nondecreasing in ``s``, and the slope is convex in ``f``.
    """
    exps = Exponents.from_p(p)
    F = lambda u: fisher_vertex_form(space, u, exps)
    h = 0.5 * (np.asarray(f, dtype=float) + np.asarray(g, dtype=float))
    return F(h) - 0.5 * (F(f) + F(g))

"""
The q-heat flow by implicit Euler
=================================

One step of the scheme is the proximal map of the Cheeger energy in
``L²(μ)``,

    g = argmin_h  Ch_q(h) + (1/(2τ)) ||h - f||²_μ,

whose optimality condition ``(g - f)/τ = Δ_q g`` is what the step
residual measures. The subproblem is smooth and strictly convex (for
``q < 2`` after the edge smoothing of :mod:`qflow.calculus`) and is solved
by a damped Newton method with Armijo backtracking. Since the Hessian of
the Cheeger energy annihilates constants, every Newton step preserves the
mass ``Σ g μ`` exactly in exact arithmetic.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .calculus import cheeger_energy, dissipation_pairing, laplacian_hessian, q_laplacian
from .entropy import U_p, U_p_prime, fisher_information, renyi_entropy_density
from .space import DomainError, Exponents, MetricMeasureSpace, exp_p

CSV_SCHEMA = "qflow-trajectory/1"
CSV_COLUMNS = ("t", "mass", "cheeger", "entropy", "fisher", "moment", "S_t", "step_residual")


class ConvergenceError(RuntimeError):
    """The proximal subproblem did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ProximalConfig:
    """Step size and solver controls for :func:`implicit_step`.

    ``smoothing`` is relative: the edge smoothing used for ``q < 2`` is
    ``smoothing * max|f| / min(length)``.
    """

    tau: float
    tol: float = 1e-10
    max_iter: int = 200
    smoothing: float = 1e-9

    def __post_init__(self):
        if not (self.tau > 0.0 and self.tol > 0.0):
            raise ValueError("tau and tol must be positive")

    def epsilon(self, space: MetricMeasureSpace, f, q: float) -> float:
        if q >= 2.0:
            return 0.0
        scale = float(np.max(np.abs(f), initial=0.0)) / float(space.length.min())
        return self.smoothing * (scale if scale > 0.0 else 1.0)


def step_residual(space: MetricMeasureSpace, f, g, tau: float, q: float, eps: float = 0.0) -> float:
    """``||(g - f)/τ - Δ_q g||_{L²(μ)}``."""
    r = (np.asarray(g) - np.asarray(f)) / tau - q_laplacian(space, g, q, eps)
    return float(np.sqrt(np.dot(r * r, space.measure)))


RESIDUAL_FLOOR_FACTOR = 4.0
# relative smoothing of the first continuation stage for q < 2
CONTINUATION_START = 1e-3


def residual_floor(space: MetricMeasureSpace, f, g, tau: float, q: float, eps: float = 0.0) -> float:
    """Resolution of :func:`step_residual` at ``g`` in floating point.

    The residual moves by about ``(|H| |g|)_i / μ_i`` when every entry of
    ``g`` moves by one unit in the last place, where ``H`` is the Hessian
    of ``Ch_q`` (plus ``μ/τ``). For ``q < 2`` and nearly flat ``g`` the
    Hessian is large and this floor dominates any absolute tolerance.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    H = abs(laplacian_hessian(space, g, q, eps))
    size = (H @ np.abs(g)) / space.measure + (np.abs(g) + np.abs(f)) / tau
    return RESIDUAL_FLOOR_FACTOR * np.finfo(float).eps * float(np.sqrt(np.dot(size * size, space.measure)))


def _newton(space: MetricMeasureSpace, f, g, tau: float, q: float, eps: float,
            tol: float, max_iter: int):
    """Damped Newton for the smoothed proximal problem; returns ``(g, res, iterations)``."""
    mu = space.measure
    M = sparse.diags(mu / tau)

    def objective(u):
        d = u - f
        return cheeger_energy(space, u, q, eps) + 0.5 * np.dot(d * d, mu) / tau

    J = objective(g)
    res = step_residual(space, f, g, tau, q, eps)
    it = 0
    while res > tol and it < max_iter:
        if it >= 3 and res <= residual_floor(space, f, g, tau, q, eps):
            break
        it += 1
        grad = mu * ((g - f) / tau - q_laplacian(space, g, q, eps))
        H = (laplacian_hessian(space, g, q, eps) + M).tocsc()
        d = -spsolve(H, grad)
        slope0 = float(np.dot(grad, d))
        # Armijo on the objective. When the predicted decrease is below the
        # rounding level of J (near the minimizer) the objective cannot
        # rank trial points, and sufficient decrease of the residual is used
        flat = -slope0 <= 1e3 * np.finfo(float).eps * max(abs(J), 1.0)
        trial, alpha = None, 1.0
        while alpha >= 1e-12:
            candidate = g + alpha * d
            if flat:
                ok = step_residual(space, f, candidate, tau, q, eps) < (1.0 - 1e-4 * alpha) * res
            else:
                ok = objective(candidate) <= J + 1e-4 * alpha * slope0
            if ok:
                trial = candidate
                break
            alpha *= 0.5
        if trial is None:
            break  # no further decrease representable; judge by the residual
        g, J = trial, objective(trial)
        res = step_residual(space, f, g, tau, q, eps)
    return g, res, it


def implicit_step(space: MetricMeasureSpace, f, cfg: ProximalConfig, q: float,
                  return_info: bool = False):
    """Proximal step of ``Ch_q`` with step ``cfg.tau`` started from ``f``.

    Iterates until the step residual is at most ``cfg.tol``, or at most the
    rounding floor of the residual when ``cfg.tol`` is below it. For
    ``q < 2`` the minimizer may have exactly flat edges, where the smoothed
    energy has curvature of order ``ε^{q-2}``; the smoothing is therefore
    lowered in stages of ten, each warm-started from the previous solution.
    """
    f = np.asarray(f, dtype=float)
    eps = cfg.epsilon(space, f, q)
    stages = [eps]
    if eps > 0.0:
        while stages[0] < CONTINUATION_START * eps / cfg.smoothing:
            stages.insert(0, 10.0 * stages[0])
    g, its = f.copy(), 0
    for stage in stages[:-1]:
        g, _, k = _newton(space, f, g, cfg.tau, q, stage, cfg.tol, cfg.max_iter)
        its += k
    g, res, k = _newton(space, f, g, cfg.tau, q, eps, cfg.tol, cfg.max_iter)
    its += k
    if res > cfg.tol and res > residual_floor(space, f, g, cfg.tau, q, eps):
        raise ConvergenceError("prox not converged", res)
    if return_info:
        return g, {"residual": res, "iterations": its, "smoothing": eps}
    return g


def explicit_step(space: MetricMeasureSpace, f, tau: float, q: float) -> np.ndarray:
    """Forward Euler ``f + τ Δ_q f``; a consistency oracle only."""
    return np.asarray(f, dtype=float) + tau * q_laplacian(space, f, q)


# --------------------------------------------------------------------------
# momentum-entropy bound
# --------------------------------------------------------------------------

def momentum_constants(p: float) -> tuple[float, float]:
    """``(C_p, l_p)`` with ``C_p = (p/(3-p))^q / q`` and ``l_p = max(1/(2-p), 1)``."""
    q = p / (p - 1.0)
    return (p / (3.0 - p)) ** q / q, max(1.0 / (2.0 - p), 1.0)


@dataclass
class MomentumBound:
    """Ingredients of ``S_t = exp(C_p L^q t) S_0``."""

    p: float
    C_p: float
    l_p: float
    lipschitz: float
    I_p: float
    z: float
    S_0: float
    weight_integral: float
    weighted_moment_integral: float

    def __call__(self, t):
        q = self.p / (self.p - 1.0)
        return self.S_0 * np.exp(self.C_p * self.lipschitz ** q * np.asarray(t, dtype=float))


def momentum_bound(space: MetricMeasureSpace, f0, V, p: float) -> MomentumBound:
    """Assemble the bound ``S_t`` for initial density ``f0`` and weight ``V``.

    For ``p > 2`` the weight must satisfy ``Σ exp_p(-V^p) μ <= 1`` and ``z``
    is the largest admissible value ``Σ f0 μ / Σ exp_p(-V^p) μ``; for
    ``p < 2`` the choice is ``z = 1``.
    """
    if p == 2.0 or not 1.0 < p < 3.0:
        raise DomainError("p must lie in (1, 3) and differ from 2")
    f0 = np.asarray(f0, dtype=float)
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0.0):
        raise DomainError("the weight V must be bounded below by a positive constant")
    Vp = V ** p
    C_p, l_p = momentum_constants(p)
    mass = space.integrate(f0)
    if p > 2.0:
        e = exp_p(-Vp, p)
        weight_integral = space.integrate(e)
        weighted = space.integrate(Vp * e)
        if weight_integral > 1.0 + 1e-12:
            raise DomainError(f"weight condition violated: Σ exp_p(-V^p) μ = {weight_integral:.6g} > 1")
        I_p = (p - 2.0) / (3.0 - p) * weighted
        z = mass / weight_integral
    else:
        weight_integral = weighted = float("nan")
        I_p, z = 0.0, 1.0
    integrand = (np.power(f0, 3.0 - p) - f0) / (2.0 - p) + (p * Vp + l_p / z) * f0
    S_0 = I_p + space.integrate(integrand)
    return MomentumBound(p, C_p, l_p, space.lipschitz_constant(V), I_p, z, S_0,
                         weight_integral, weighted)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass
class FlowTrajectory:
    """Time-stamped states with per-state diagnostics.

    ``diagnostics[name][k]`` belongs to ``states[k]``; dissipation-type
    entries are right-endpoint sums up to ``times[k]``.
    """

    times: np.ndarray
    states: list
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# schema: {CSV_SCHEMA}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        nan = [float("nan")] * len(self.times)
        for k, t in enumerate(self.times):
            row = [t] + [self.diagnostics.get(c, nan)[k] for c in CSV_COLUMNS[1:]]
            writer.writerow(["%.17g" % v for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def checkpoint(self, path: str | Path | None = None) -> str:
        text = json.dumps([[float(x) for x in s] for s in self.states])
        if path is not None:
            Path(path).write_text(text)
        return text


def run_flow(space: MetricMeasureSpace, f0, T: float, cfg: ProximalConfig, q: float,
             V=None, p: float | None = None) -> FlowTrajectory:
    """Run ``ceil(T/τ)`` implicit steps from ``f0``.

    ``p`` defaults to the conjugate exponent of ``q``. Entropy, Fisher
    information and the dissipation integral need a positive density and
    ``p != 2``; they are recorded as NaN otherwise. With a weight ``V``
    the moment ``Σ V^p f μ`` and the bound ``S_t`` are recorded as well.
    """
    f = np.asarray(f0, dtype=float).copy()
    p = q / (q - 1.0) if p is None else p
    exps = Exponents.from_p(p)
    steps = max(1, math.ceil(T / cfg.tau - 1e-9))
    entropic = p != 2.0 and bool(np.all(f > 0.0)) and 1.0 < p < 3.0
    bound = momentum_bound(space, f, V, p) if V is not None else None
    Vp = np.asarray(V, dtype=float) ** p if V is not None else None

    times = [0.0]
    states = [f.copy()]
    diag = {c: [] for c in CSV_COLUMNS[1:]}
    diag.update(dissipation=[], fisher_integral=[], iterations=[])
    fisher_int = dissipation = 0.0

    def record(g, res, its):
        diag["mass"].append(space.integrate(g))
        diag["cheeger"].append(cheeger_energy(space, g, q))
        ok = entropic and np.all(g > 0.0)
        diag["entropy"].append(renyi_entropy_density(space, g, p) if ok else float("nan"))
        diag["fisher"].append(fisher_information(space, g, exps) if ok else float("nan"))
        diag["moment"].append(space.integrate(Vp * g) if Vp is not None else float("nan"))
        diag["S_t"].append(float(bound(times[-1])) if bound is not None else float("nan"))
        diag["step_residual"].append(res)
        diag["dissipation"].append(dissipation if entropic else float("nan"))
        diag["fisher_integral"].append(fisher_int if entropic else float("nan"))
        diag["iterations"].append(its)

    record(f, 0.0, 0)
    for k in range(steps):
        g, info = implicit_step(space, f, cfg, q, return_info=True)
        times.append((k + 1) * cfg.tau)
        if entropic and np.all(g > 0.0):
            dissipation += cfg.tau * dissipation_pairing(space, U_p_prime(g, p), g, q, info["smoothing"])
            fisher_int += cfg.tau * fisher_information(space, g, exps)
        else:
            entropic = False
        states.append(g)
        record(g, info["residual"], info["iterations"])
        f = g
    meta = {"q": q, "p": p, "tau": cfg.tau, "T": times[-1], "space": space.name}
    if bound is not None:
        meta["bound"] = bound
    return FlowTrajectory(np.asarray(times), states,
                          {k: np.asarray(v, dtype=float) for k, v in diag.items()}, meta)


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------

def lp_norm(space: MetricMeasureSpace, f, r: float) -> float:
    return float(np.dot(np.abs(f) ** r, space.measure) ** (1.0 / r))


def lr_contraction_check(space: MetricMeasureSpace, f0, g0, r_norm: float, T: float,
                         cfg: ProximalConfig, q: float) -> dict:
    """Largest ratio ``||f_t - g_t||_r / ||f_0 - g_0||_r`` along both flows."""
    if r_norm < 1.0:
        raise ValueError("r_norm must be at least 1")
    d0 = lp_norm(space, np.asarray(f0, float) - np.asarray(g0, float), r_norm)
    if d0 == 0.0:
        return {"status": "identical", "ratio": 0.0, "passed": True}
    tf = run_flow(space, f0, T, cfg, q)
    tg = run_flow(space, g0, T, cfg, q)
    ratios = [lp_norm(space, a - b, r_norm) / d0 for a, b in zip(tf.states, tg.states)]
    ratio = max(ratios)
    return {"status": "compared", "ratio": ratio, "ratios": ratios, "passed": ratio <= 1.0 + 1e-8}


def comparison_check(space: MetricMeasureSpace, f0, g0, C: float, T: float,
                     cfg: ProximalConfig, q: float) -> dict:
    """Largest violation of ``f_t <= g_t + C`` given ``f_0 <= g_0 + C``."""
    tf = run_flow(space, f0, T, cfg, q)
    tg = run_flow(space, g0, T, cfg, q)
    excess = max(float(np.max(a - b - C)) for a, b in zip(tf.states, tg.states))
    return {"excess": excess, "passed": excess <= 1e-12}


def dissipation_identity_check(space: MetricMeasureSpace, f0, e: Callable, e_prime: Callable,
                               T: float, cfg: ProximalConfig, q: float) -> dict:
    """Defect of ``E(f_t) + ∫ pairing(e'(f_s), f_s) ds = E(f_0)`` along the scheme.

    ``E(f) = Σ e(f) μ``. Per step the defect is
    ``E(f_{k+1}) - E(f_k) + τ pairing(e'(f_{k+1}), f_{k+1})``, which equals
    minus the Bregman divergence of ``E`` between the two states and is
    therefore nonpositive for convex ``e``. The cumulative defect at time
    ``T`` is ``O(τ)``.
    """
    f = np.asarray(f0, dtype=float)
    E = lambda u: space.integrate(e(u))
    E0 = E(f)
    steps = max(1, math.ceil(T / cfg.tau - 1e-9))
    per_step = []
    for _ in range(steps):
        g, info = implicit_step(space, f, cfg, q, return_info=True)
        pairing = dissipation_pairing(space, e_prime(g), g, q, info["smoothing"])
        per_step.append(E(g) - E(f) + cfg.tau * pairing)
        f = g
    per_step = np.asarray(per_step)
    return {
        "tau": cfg.tau,
        "defect": float(abs(per_step.sum())),
        "max_step_defect": float(np.max(np.abs(per_step))),
        "per_step": per_step,
        "E0": E0,
        "ET": E(f),
    }


def entropy_dissipation_check(space: MetricMeasureSpace, f0, p: float, T: float,
                              cfg: ProximalConfig, q: float | None = None) -> dict:
    """Dissipation identity for the entropy integrand ``e = U_p``."""
    q = p / (p - 1.0) if q is None else q
    return dissipation_identity_check(space, f0, lambda u: U_p(u, p), lambda u: U_p_prime(u, p),
                                      T, cfg, q)


def momentum_entropy_check(space: MetricMeasureSpace, f0, V, p: float, T: float,
                           cfg: ProximalConfig, rel_tol: float = 1e-6) -> dict:
    """Compare the moment and the Fisher integral with ``S_t`` along the flow."""
    q = p / (p - 1.0)
    traj = run_flow(space, f0, T, cfg, q, V=V, p=p)
    d = traj.diagnostics
    S = d["S_t"]
    moment_ok = bool(np.all(d["moment"] <= S * (1.0 + rel_tol)))
    fisher_cap = 4.0 / (3.0 - p) * S
    fisher_ok = bool(np.all(d["fisher_integral"] <= fisher_cap + rel_tol * S))
    bound = traj.meta["bound"]
    return {
        "times": traj.times,
        "moment": d["moment"],
        "fisher_integral": d["fisher_integral"],
        "dissipation": d["dissipation"],
        "S_t": S,
        "moment_ok": moment_ok,
        "fisher_ok": fisher_ok,
        "passed": moment_ok and fisher_ok,
        "weight_integral": bound.weight_integral,
        "weighted_moment_integral": bound.weighted_moment_integral,
        "z": bound.z,
        "trajectory": traj,
    }

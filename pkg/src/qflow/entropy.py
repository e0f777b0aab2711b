"""
Renyi entropy, Fisher information and descending-slope estimates
================================================================

For ``p`` in (1, 3), ``p != 2``, the entropy of a measure ``ν = ρ μ`` is

    U_p(ν) = Σ_i U(ρ_i) μ_i,    U(x) = (x^{3-p} - x) / ((3-p)(2-p)),

a convex integrand with ``U''(x) = x^{1-p}``. Along the q-heat flow it
dissipates at the rate of the q-Fisher information

    F_q(f) = q r^{-q} Ch_q(f^r),     r = 1 - (p-1)/q,

which for ``r = 0`` (q the golden ratio) is replaced by ``q Ch_q(log f)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from .calculus import cheeger_energy, slope
from .space import DomainError, Exponents, MetricMeasureSpace
from .transport import as_probability, wasserstein_distance

BRUTEFORCE_MAX_VERTICES = 6


def _check_p(p: float) -> None:
    if p == 2.0:
        raise DomainError("use log entropy: U_p is undefined at p = 2")
    if not 1.0 < p < 3.0:
        raise DomainError(f"p must lie in (1, 3), got {p}")


def U_p(x, p: float):
    """Entropy integrand ``(x^{3-p} - x)/((3-p)(2-p))`` for ``x >= 0``."""
    _check_p(p)
    x = np.asarray(x, dtype=float)
    return (np.power(x, 3.0 - p) - x) / ((3.0 - p) * (2.0 - p))


def U_p_prime(x, p: float):
    """Derivative ``((3-p) x^{2-p} - 1)/((3-p)(2-p))``; requires ``x > 0`` when ``p > 2``."""
    _check_p(p)
    x = np.asarray(x, dtype=float)
    return ((3.0 - p) * np.power(x, 2.0 - p) - 1.0) / ((3.0 - p) * (2.0 - p))


def renyi_entropy_density(space: MetricMeasureSpace, rho, p: float) -> float:
    """``Σ U(ρ_i) μ_i`` for a density ``ρ`` w.r.t. the vertex measure."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise DomainError("density must be nonnegative")
    return float(np.dot(U_p(rho, p), space.measure))


def renyi_entropy(space: MetricMeasureSpace, nu, p: float) -> float:
    """Entropy of a probability vector ``ν`` (weights per vertex).

    On a finite space every ``ν`` has the density ``ν_i / μ_i``, so there
    is no singular part to account for.
    """
    _check_p(p)
    nu = as_probability(nu)
    return renyi_entropy_density(space, nu / space.measure, p)


def fisher_information(space: MetricMeasureSpace, f, exps: Exponents) -> float:
    """Edge-form Fisher information ``q r^{-q} Ch_q(f^r)``.

    In the golden case ``r = 0`` the logarithm replaces the power and the
    prefactor is dropped, giving ``q Ch_q(log f)``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise DomainError("Fisher information needs a nonnegative density")
    q, r = exps.q, exps.r
    if exps.golden_case:
        if np.any(f <= 0.0):
            raise DomainError("log of zero in the golden case")
        return q * cheeger_energy(space, np.log(f), q)
    if r <= 0.0:
        raise DomainError(f"r = {r:g} <= 0; the power f^r is not defined at f = 0")
    return q * r ** (-q) * cheeger_energy(space, np.power(f, r), q)


def fisher_vertex_form(space: MetricMeasureSpace, f, exps: Exponents) -> float:
    """Vertex form ``Σ_{f_i > 0} slope(f)_i^q / f_i^{p-1} μ_i``.

    Agrees with :func:`fisher_information` only in the refinement limit.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise DomainError("Fisher information needs a nonnegative density")
    s = slope(space, f)
    pos = f > 0.0
    return float(np.sum(s[pos] ** exps.q / f[pos] ** (exps.p - 1.0) * space.measure[pos]))


def fisher_integrand(f, s, exps: Exponents):
    """Pointwise ``s^q / f^{p-1}``, the jointly convex integrand for ``p <= 2``."""
    return np.power(s, exps.q) / np.power(f, exps.p - 1.0)


def slope_upper_bound(space: MetricMeasureSpace, rho, p: float) -> float:
    """``(Σ slope(ρ)^q / ρ^{p-1} μ)^{1/q}``, an upper estimate for ``|D⁻U_p|(ρμ)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise DomainError("density not bounded below")
    exps = Exponents.from_p(p)
    return fisher_vertex_form(space, rho, exps) ** (1.0 / exps.q)


# --------------------------------------------------------------------------
# brute-force slope oracle
# --------------------------------------------------------------------------

def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All probability vectors with coordinates in ``{0, 1/m, ..., 1}``, ``m = resolution``."""
    pts = []
    for bars in itertools.combinations(range(resolution + n - 1), n - 1):
        edges = np.diff(np.concatenate([[-1], bars, [resolution + n - 1]])) - 1
        pts.append(edges)
    return np.asarray(pts, dtype=float) / resolution


def _local_cloud(mu0: np.ndarray, radii, directions: int, rng) -> np.ndarray:
    n = mu0.shape[0]
    out = []
    for rad in radii:
        d = rng.standard_normal((directions, n))
        d -= d.mean(axis=1, keepdims=True)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = mu0 + rad * d
        pts = pts[np.all(pts >= 0.0, axis=1)]
        out.append(pts)
    return np.concatenate(out) if out else np.empty((0, n))


@dataclass
class SlopeSearch:
    """Search design of :func:`slope_bruteforce`, recorded next to the result."""

    resolution: int = 40
    radii: tuple = (0.2, 0.1, 0.05, 0.02, 0.01)
    directions: int = 16
    random_points: int = 200
    seed: int = 0


def slope_bruteforce(space: MetricMeasureSpace, mu0, p: float, K: float = 0.0,
                     search: SlopeSearch | None = None, return_argmax: bool = False):
    """Lower estimate of ``sup_ν (U_p(μ0) - U_p(ν))_+ / w_p(μ0, ν) + (K/2) w_p(μ0, ν)``.

    The supremum is taken over a finite sample of the simplex: a regular
    grid, shells of random points around ``μ0``, uniform Dirichlet draws,
    and a final refinement around the best grid point. Each distance is an
    exact LP solve, so the result is a lower bound on the true supremum.
    """
    n = space.n
    if n > BRUTEFORCE_MAX_VERTICES:
        raise DomainError(f"bruteforce limit: n = {n} > {BRUTEFORCE_MAX_VERTICES}")
    search = search or SlopeSearch()
    mu0 = as_probability(mu0)
    rng = np.random.default_rng(search.seed)
    u0 = renyi_entropy(space, mu0, p)

    def ratios(points):
        vals = np.full(len(points), -np.inf)
        for k, nu in enumerate(points):
            nu = nu / nu.sum()
            gain = u0 - renyi_entropy(space, nu, p)
            if gain <= 0.0:
                continue
            w = wasserstein_distance(space, mu0, nu, p)
            if w > 0.0:
                vals[k] = gain / w + 0.5 * K * w
        return vals

    cloud = np.concatenate([
        simplex_grid(n, search.resolution),
        _local_cloud(mu0, search.radii, search.directions, rng),
        rng.dirichlet(np.ones(n), size=search.random_points),
    ])
    vals = ratios(cloud)
    best = int(np.argmax(vals))
    if np.isfinite(vals[best]):
        step = 1.0 / search.resolution
        refine = _local_cloud(cloud[best], [step, step / 2, step / 4], search.directions, rng)
        rvals = ratios(refine)
        if rvals.size and rvals.max() > vals[best]:
            cloud, vals, best = refine, rvals, int(np.argmax(rvals))
    value = max(float(vals[best]), 0.0)
    if return_argmax:
        return value, cloud[best] / cloud[best].sum()
    return value


@dataclass
class EntropyReport:
    value: float
    fisher: float
    fisher_vertex: float
    slope_estimate: float
    slope_bruteforce: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def entropy_report(space: MetricMeasureSpace, nu, p: float, bruteforce: bool = False) -> EntropyReport:
    nu = as_probability(nu)
    rho = nu / space.measure
    exps = Exponents.from_p(p)
    return EntropyReport(
        value=renyi_entropy(space, nu, p),
        fisher=fisher_information(space, rho, exps),
        fisher_vertex=fisher_vertex_form(space, rho, exps),
        slope_estimate=slope_upper_bound(space, rho, p),
        slope_bruteforce=slope_bruteforce(space, nu, p) if bruteforce else None,
    )

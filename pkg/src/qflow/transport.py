"""
Exact optimal transport on finite metric spaces
===============================================

The p-Wasserstein distance is computed from the transportation LP with
cost ``d(x_i, x_j)^p``. By default the distance carries an extra ``1/p``
inside the p-th power,

    w_p^p(μ0, μ1) = min_π (1/p) Σ_ij π_ij d_ij^p,

and ``standard_normalization=True`` drops it. The two conventions differ by
the constant factor ``(1/p)^{1/p}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .space import MetricMeasureSpace


class TransportError(ValueError):
    pass


def as_probability(weights, tol: float = 1e-9) -> np.ndarray:
    """Validate a nonnegative weight vector of unit mass and renormalize it exactly."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(~np.isfinite(w)) or np.any(w < -tol):
        raise TransportError("not probability vectors")
    total = w.sum()
    if abs(total - 1.0) > tol:
        raise TransportError(f"not probability vectors (mass {total!r})")
    w = np.maximum(w, 0.0)
    return w / w.sum()


def density_to_probability(space: MetricMeasureSpace, f) -> np.ndarray:
    """Weights ``f_i μ_i`` rescaled to unit mass."""
    w = np.asarray(f, dtype=float) * space.measure
    return w / w.sum()


@dataclass
class TransportPlan:
    """Optimal coupling with dual certificate.

    ``cost`` is the raw linear cost ``Σ π_ij d_ij^p``; ``distance`` applies
    the chosen normalization. Potentials ``u, v`` are in units of the raw
    cost: ``u_i + v_j <= d_ij^p``.
    """

    pi: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_matrix: np.ndarray = field(repr=False)
    cost: float
    distance: float
    p: float
    standard_normalization: bool = False

    @property
    def dual_value(self) -> float:
        return float(self.u @ self.mu0 + self.v @ self.mu1)

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "distance": self.distance,
            "pi": self.pi.tolist(),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
        }


def normalized_distance(cost: float, p: float, standard_normalization: bool = False) -> float:
    cost = max(float(cost), 0.0)
    return (cost if standard_normalization else cost / p) ** (1.0 / p)


@lru_cache(maxsize=32)
def _marginal_operator(n: int, m: int) -> sparse.csr_matrix:
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    return sparse.vstack([rows, cols]).tocsr()


def solve_transport(cost_matrix, mu0, mu1):
    """Solve ``min <C, π>`` over couplings of ``(mu0, mu1)``; return ``(π, u, v, cost)``."""
    C = np.asarray(cost_matrix, dtype=float)
    n, m = C.shape
    A = _marginal_operator(n, m)
    b = np.concatenate([mu0, mu1])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10,
                           "presolve": True})
    if res.status != 0:
        raise TransportError(f"transport LP failed: {res.message}")
    pi = np.maximum(res.x.reshape(n, m), 0.0)
    y = res.eqlin.marginals
    u, v = y[:n].copy(), y[n:].copy()
    return pi, u, v, float(np.sum(pi * C))


def wasserstein_p(space: MetricMeasureSpace, mu0, mu1, p: float,
                  standard_normalization: bool = False):
    """Exact ``w_p(mu0, mu1)`` on ``space``; returns ``(distance, plan)``."""
    if p <= 1.0:
        raise TransportError("p must exceed 1")
    a = as_probability(mu0)
    b = as_probability(mu1)
    if a.shape[0] != space.n or b.shape[0] != space.n:
        raise TransportError("not probability vectors on this space")
    C = space.distance ** p
    pi, u, v, cost = solve_transport(C, a, b)
    dist = normalized_distance(cost, p, standard_normalization)
    plan = TransportPlan(pi, a, b, u, v, C, cost, dist, p, standard_normalization)
    return dist, plan


def wasserstein_distance(space, mu0, mu1, p, standard_normalization=False) -> float:
    return wasserstein_p(space, mu0, mu1, p, standard_normalization)[0]


def verify_dual(plan: TransportPlan, support_tol: float = 1e-12) -> dict:
    """Recompute marginal, feasibility, slackness and duality-gap residuals."""
    C, pi, u, v = plan.cost_matrix, plan.pi, plan.u, plan.v
    reduced = C - u[:, None] - v[None, :]
    primal = float(np.sum(pi * C))
    dual = plan.dual_value
    support = pi > support_tol
    return {
        "row_marginal": float(np.max(np.abs(pi.sum(axis=1) - plan.mu0))),
        "col_marginal": float(np.max(np.abs(pi.sum(axis=0) - plan.mu1))),
        "negativity": float(max(0.0, -pi.min())),
        "dual_infeasibility": float(max(0.0, -reduced.min())),
        "slackness": float(np.max(np.abs(reduced[support]), initial=0.0)),
        "weighted_slackness": float(np.sum(pi * np.abs(reduced))),
        "primal": primal,
        "dual": dual,
        "gap": primal - dual,
    }


def metric_speed(space: MetricMeasureSpace, times, states, p: float,
                 standard_normalization: bool = False) -> np.ndarray:
    """Forward-difference speeds ``w_p(μ_k, μ_{k+1}) / (t_{k+1} - t_k)``.

    ``states`` are densities w.r.t. the vertex measure; each is rescaled to
    a probability vector first.
    """
    times = np.asarray(times, dtype=float)
    probs = [density_to_probability(space, f) for f in states]
    out = np.empty(len(probs) - 1)
    for k in range(len(probs) - 1):
        d = wasserstein_distance(space, probs[k], probs[k + 1], p, standard_normalization)
        out[k] = d / (times[k + 1] - times[k])
    return out


# --------------------------------------------------------------------------
# brute-force oracle: enumerate all vertices of the transportation polytope
# --------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _bases(n: int, m: int) -> np.ndarray:
    """Index sets of ``n + m - 1`` cells whose constraint columns are independent."""
    A = _constraint_matrix(n, m)
    k = n + m - 1
    combos = itertools.combinations(range(n * m), k)
    keep = []
    while True:
        chunk = np.array(list(itertools.islice(combos, 100_000)), dtype=np.int64).reshape(-1, k)
        if chunk.size == 0:
            break
        dets = np.linalg.det(A[:, chunk].transpose(1, 0, 2))
        keep.append(chunk[np.abs(dets) > 0.5])  # totally unimodular: det is 0 or ±1
    return np.concatenate(keep)


def _constraint_matrix(n: int, m: int) -> np.ndarray:
    A = _marginal_operator(n, m).toarray()
    return A[:-1]  # one column constraint is redundant


def polytope_vertices(mu0, mu1, tol: float = 1e-13) -> np.ndarray:
    """All basic feasible solutions of the transportation polytope, shape ``(V, n, m)``.

    Brute force over every basis; intended for ``n, m <= 5``.
    """
    a = np.asarray(mu0, dtype=float)
    b = np.asarray(mu1, dtype=float)
    n, m = a.shape[0], b.shape[0]
    if n * m > 25:
        raise TransportError("bruteforce limit: n * m must not exceed 25")
    A = _constraint_matrix(n, m)
    rhs = np.concatenate([a, b[:-1]])
    found = []
    for chunk in np.array_split(_bases(n, m), max(1, len(_bases(n, m)) // 50_000)):
        x = np.linalg.solve(A[:, chunk].transpose(1, 0, 2),
                            np.broadcast_to(rhs[:, None], (len(chunk), rhs.size, 1)))[..., 0]
        ok = np.all(x >= -tol, axis=1)
        full = np.zeros((int(ok.sum()), n * m))
        np.put_along_axis(full, chunk[ok], np.maximum(x[ok], 0.0), axis=1)
        found.append(full)
    verts = np.unique(np.round(np.concatenate(found), 14), axis=0)
    return verts.reshape(-1, n, m)


def bruteforce_transport_cost(cost_matrix, mu0, mu1) -> float:
    """Minimum of ``<C, π>`` over the vertices of the transportation polytope."""
    verts = polytope_vertices(mu0, mu1)
    return float(np.min(np.einsum("vij,ij->v", verts, np.asarray(cost_matrix, dtype=float))))

"""
Discrete calculus on a metric measure graph
===========================================

Two gradient notions live here. The *vertex slope* is the max over graph
neighbours of |f(y) - f(x)| / d(x, y); it is the discrete local Lipschitz
constant. The *edge differential* ``(f[head] - f[tail]) / length`` carries
the Cheeger energy

    Ch_q(f) = (1/q) * sum_e w_e l_e |δ_e f|^q

and its L²(μ) gradient, the graph q-Laplacian

    (Δ_q f)_i = (1/μ_i) * sum_{j ~ i} w_ij |δ_ij f|^{q-2} δ_ij f.

All identities that are exact on a graph are stated for the edge objects.
For q < 2 an optional smoothing replaces |δ|^q by (δ² + ε²)^{q/2} - ε^q so
the energy has a Lipschitz gradient; ``smoothing=0`` gives the exact energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

from .space import MetricMeasureSpace


def slope(space: MetricMeasureSpace, f, side: str = "both") -> np.ndarray:
    """Vertex slope: max over neighbours of the (one-sided) difference quotient.

    ``side="ascending"`` uses ``[f(y) - f(x)]_+``, ``side="descending"`` uses
    ``[f(y) - f(x)]_-``.
    """
    f = np.asarray(f, dtype=float)
    d = space.gradient(f)  # (f[head] - f[tail]) / l, seen from tail
    if side == "both":
        from_tail, from_head = np.abs(d), np.abs(d)
    elif side == "ascending":
        from_tail, from_head = np.maximum(d, 0.0), np.maximum(-d, 0.0)
    elif side == "descending":
        from_tail, from_head = np.maximum(-d, 0.0), np.maximum(d, 0.0)
    else:
        raise ValueError(f"unknown side {side!r}")
    out = np.zeros(space.n)
    np.maximum.at(out, space.tail, from_tail)
    np.maximum.at(out, space.head, from_head)
    return out


def flux(delta, q: float, smoothing: float = 0.0) -> np.ndarray:
    """Edge flux |δ|^{q-2} δ, or its smoothed version (δ² + ε²)^{(q-2)/2} δ."""
    delta = np.asarray(delta, dtype=float)
    if smoothing > 0.0:
        return np.power(delta * delta + smoothing * smoothing, 0.5 * (q - 2.0)) * delta
    return np.sign(delta) * np.power(np.abs(delta), q - 1.0)


def _edge_energy(delta, q, smoothing):
    if smoothing > 0.0:
        # (δ² + ε²)^{q/2} - ε^q without cancellation for |δ| << ε
        t = delta / smoothing
        return smoothing ** q * np.expm1(0.5 * q * np.log1p(t * t))
    return np.power(np.abs(delta), q)


def cheeger_energy(space: MetricMeasureSpace, f, q: float, smoothing: float = 0.0) -> float:
    """Edge-based q-Cheeger energy ``(1/q) Σ_e w_e l_e |δ_e f|^q``."""
    delta = space.gradient(f)
    return float(np.dot(space.edge_mass, _edge_energy(delta, q, smoothing)) / q)


def q_laplacian(space: MetricMeasureSpace, f, q: float, smoothing: float = 0.0) -> np.ndarray:
    """Graph q-Laplacian, minus the L²(μ)-gradient of :func:`cheeger_energy`."""
    j = space.conductance * flux(space.gradient(f), q, smoothing)
    out = np.zeros(space.n)
    np.add.at(out, space.tail, j)
    np.add.at(out, space.head, -j)
    return out / space.measure


def laplacian_hessian(space: MetricMeasureSpace, f, q: float, smoothing: float = 0.0) -> sparse.csr_matrix:
    """Hessian of ``cheeger_energy`` in the Euclidean coordinates of ``f``.

    This is the weighted graph Laplacian ``Bᵀ diag(w ψ''(δ)/l) B``; the
    energy must be twice differentiable, i.e. ``q >= 2`` or ``smoothing > 0``.
    """
    delta = space.gradient(f)
    if smoothing > 0.0:
        s2 = delta * delta + smoothing * smoothing
        curv = np.power(s2, 0.5 * q - 2.0) * ((q - 1.0) * delta * delta + smoothing * smoothing)
    else:
        curv = (q - 1.0) * np.power(np.abs(delta), q - 2.0)
    B = space.incidence()
    weights = space.conductance * curv / space.length
    return (B.T @ sparse.diags(weights) @ B).tocsr()


def inner(space: MetricMeasureSpace, f, g) -> float:
    """L²(μ) inner product."""
    return float(np.sum(np.asarray(f) * np.asarray(g) * space.measure))


def dissipation_pairing(space: MetricMeasureSpace, h, f, q: float, smoothing: float = 0.0) -> float:
    """``Σ_e w_e l_e flux(δ_e f) δ_e h``, which equals ``-<h, Δ_q f>_{L²(μ)}``.

    With ``h = φ(f)`` and φ nondecreasing every summand is nonnegative.
    """
    return float(np.sum(space.edge_mass * flux(space.gradient(f), q, smoothing) * space.gradient(h)))


def laplacian_monotonicity_gap(space: MetricMeasureSpace, f, g, phi: Callable, q: float,
                               smoothing: float = 0.0) -> float:
    """``<Δ_q g - Δ_q f, φ(g - f)>_{L²(μ)}``; nonpositive for nondecreasing φ."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    # edge form avoids the cancellation of the vertex sums
    dflux = flux(space.gradient(g), q, smoothing) - flux(space.gradient(f), q, smoothing)
    return -float(np.sum(space.edge_mass * dflux * space.gradient(phi(g - f))))


# --------------------------------------------------------------------------
# contractions: f~ = f + φ(g - f), g~ = g - φ(g - f)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Contraction:
    """Scalar map with derivative certified to lie in [0, 1]."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    fixes_zero: bool

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))


def soft_clamp(scale: float = 1.0) -> Contraction:
    """φ(s) = s / (1 + |s|/scale), with φ' = (1 + |s|/scale)^{-2} in (0, 1]."""
    return Contraction(f"soft_clamp({scale:g})", lambda s: s / (1.0 + np.abs(s) / scale), True)


def positive_part() -> Contraction:
    """φ(s) = max(s, 0); gives f~ = max(f, g), g~ = min(f, g)."""
    return Contraction("positive_part", lambda s: np.maximum(s, 0.0), True)


def smooth_positive_part(eps: float = 1e-2) -> Contraction:
    """C¹ version of max(s, 0): (s + sqrt(s² + ε²))/2 - ε/2, derivative in (0, 1)."""
    return Contraction(f"smooth_positive_part({eps:g})",
                       lambda s: 0.5 * (s + np.sqrt(s * s + eps * eps)) - 0.5 * eps, True)


def clamp(lo: float, hi: float) -> Contraction:
    return Contraction(f"clamp({lo:g},{hi:g})", lambda s: np.clip(s, lo, hi), lo <= 0.0 <= hi)


def scaled(theta: float) -> Contraction:
    """Linear map s -> θ s with θ in [0, 1]."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    return Contraction(f"scaled({theta:g})", lambda s: theta * s, True)


def zero() -> Contraction:
    return Contraction("zero", lambda s: np.zeros_like(s), True)


def contraction_pair(f, g, phi: Callable):
    """Return ``(f + φ(g-f), g - φ(g-f))``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    shift = np.asarray(phi(g - f), dtype=float)
    return f + shift, g - shift


def local_edge_cost(space: MetricMeasureSpace, f, psi: Callable) -> np.ndarray:
    """Per-vertex sum of ``ψ(|δ_e f|)`` over incident edges."""
    c = psi(np.abs(space.gradient(f)))
    out = np.zeros(space.n)
    np.add.at(out, space.tail, c)
    np.add.at(out, space.head, c)
    return out


def conv_diff_gap(space: MetricMeasureSpace, f, g, phi: Callable, psi: Callable,
                  form: str = "edge") -> np.ndarray:
    """Per-vertex ``LHS - RHS`` of the convex-difference inequality.

    ``form="edge"`` measures ψ of the gradient through the incident edge
    differences (exact on every graph: each edge pair is majorized).
    ``form="vertex"`` uses ψ of the max-neighbour slope; that version is
    exact only when φ is linear and otherwise holds in the refinement limit.
    """
    ft, gt = contraction_pair(f, g, phi)
    if form == "edge":
        cost = lambda u: local_edge_cost(space, u, psi)
    elif form == "vertex":
        cost = lambda u: psi(slope(space, u))
    else:
        raise ValueError(f"unknown form {form!r}")
    return cost(ft) + cost(gt) - cost(f) - cost(g)


def energy_contraction_gap(space: MetricMeasureSpace, f, g, phi: Callable, q: float,
                           smoothing: float = 0.0) -> float:
    """``Ch_q(f~) + Ch_q(g~) - Ch_q(f) - Ch_q(g)``; nonpositive for contractions φ."""
    ft, gt = contraction_pair(f, g, phi)
    e = lambda u: cheeger_energy(space, u, q, smoothing)
    return e(ft) + e(gt) - e(f) - e(g)

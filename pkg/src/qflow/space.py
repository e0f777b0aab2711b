"""
Finite metric measure spaces and generalized exponentials
=========================================================

A space is a connected weighted graph. Every vertex carries a positive
measure, every edge a length (used by the metric and by difference
quotients) and a conductance (used by the energy). Distances are the
shortest-path lengths of the graph.

The module also hosts the deformed exponential/logarithm pair

    exp_p(t) = (1 + (2 - p) t) ** (1 / (2 - p))
    ln_p(s)  = (s ** (2 - p) - 1) / (2 - p)

which reduce to exp/log as p -> 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


class SpaceError(ValueError):
    """Raised for malformed graphs (nonpositive weights, disconnected input)."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


@dataclass(frozen=True)
class Exponents:
    """Hölder-conjugate pair (p, q) together with r = 1 - (p-1)/q."""

    p: float
    q: float
    r: float
    golden_case: bool

    @classmethod
    def from_p(cls, p: float) -> "Exponents":
        if not 1.0 < p:
            raise DomainError(f"p must exceed 1, got {p}")
        q = p / (p - 1.0)
        r = 1.0 - (p - 1.0) / q
        return cls(p=float(p), q=float(q), r=float(r),
                   golden_case=bool(abs(q - GOLDEN) < 1e-12))

    @classmethod
    def from_q(cls, q: float) -> "Exponents":
        if not 1.0 < q:
            raise DomainError(f"q must exceed 1, got {q}")
        return cls.from_p(q / (q - 1.0))


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Connected weighted graph with vertex measure and shortest-path metric.

    Attributes
    ----------
    tail, head : (m,) int arrays
        Edge endpoints; edge ``e`` is oriented ``tail[e] -> head[e]``.
    length : (m,) float array
        Edge lengths, strictly positive.
    conductance : (m,) float array
        Edge conductances, strictly positive.
    measure : (n,) float array
        Vertex measure, strictly positive.
    distance : (n, n) float array
        All-pairs shortest-path lengths.
    """

    tail: np.ndarray
    head: np.ndarray
    length: np.ndarray
    conductance: np.ndarray
    measure: np.ndarray
    distance: np.ndarray = field(repr=False)
    name: str = "custom"

    @property
    def n(self) -> int:
        return self.measure.shape[0]

    @property
    def num_edges(self) -> int:
        return self.tail.shape[0]

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    @property
    def edge_mass(self) -> np.ndarray:
        """Energy weight w_e * l_e carried by each edge."""
        return self.conductance * self.length

    def incidence(self) -> sparse.csr_matrix:
        """Signed (m, n) incidence matrix, ``(B f)_e = f[head] - f[tail]``."""
        m = self.num_edges
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate([self.head, self.tail])
        vals = np.concatenate([np.ones(m), -np.ones(m)])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Edge difference quotients (f[head] - f[tail]) / length."""
        f = np.asarray(f, dtype=float)
        return (f[self.head] - f[self.tail]) / self.length

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(np.asarray(f, dtype=float), self.measure))

    def lipschitz_constant(self, f: np.ndarray) -> float:
        """Lipschitz constant w.r.t. the shortest-path metric (max over edges)."""
        return float(np.max(np.abs(self.gradient(f)), initial=0.0))

    def to_dict(self) -> dict:
        return {
            "vertices": int(self.n),
            "edges": [[int(i), int(j), float(l), float(w)] for i, j, l, w in
                      zip(self.tail, self.head, self.length, self.conductance)],
            "measure": [float(x) for x in self.measure],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text


def from_edges(n: int, edges, measure, name: str = "custom") -> MetricMeasureSpace:
    """Assemble a space from an edge list ``[(i, j, length, conductance), ...]``."""
    if n < 2:
        raise SpaceError("need at least 2 vertices")
    edges = np.asarray(edges, dtype=float).reshape(-1, 4)
    tail = edges[:, 0].astype(int)
    head = edges[:, 1].astype(int)
    length = edges[:, 2].copy()
    conductance = edges[:, 3].copy()
    measure = np.broadcast_to(np.asarray(measure, dtype=float), (n,)).copy()

    if np.any(tail < 0) or np.any(head < 0) or np.any(tail >= n) or np.any(head >= n):
        raise SpaceError("edge endpoint out of range")
    if np.any(tail == head):
        raise SpaceError("self loops are not allowed")
    if not (np.all(length > 0) and np.all(conductance > 0) and np.all(measure > 0)):
        raise SpaceError("invalid weight: lengths, conductances and measure must be positive")
    if not np.all(np.isfinite(edges)) or not np.all(np.isfinite(measure)):
        raise SpaceError("invalid weight: non-finite value")

    adj = sparse.coo_matrix((length, (tail, head)), shape=(n, n)).tocsr()
    ncomp, _ = csgraph.connected_components(adj, directed=False)
    if ncomp != 1:
        raise SpaceError("disconnected graph")
    # coo->csr sums parallel edges; the metric needs their minimum
    dense = np.full((n, n), np.inf)
    np.minimum.at(dense, (tail, head), length)
    np.minimum.at(dense, (head, tail), length)
    dense[np.isinf(dense)] = 0.0
    distance = csgraph.shortest_path(sparse.csr_matrix(dense), method="D", directed=False)

    for arr in (tail, head, length, conductance, measure, distance):
        arr.setflags(write=False)
    return MetricMeasureSpace(tail, head, length, conductance, measure, distance, name)


def _fd_conductance(measure, tail, head, length):
    # w_e * l_e equals the mean measure of the endpoints, so for q = 2 the energy
    # is the midpoint rule for (1/2) ∫ |f'|^2 dμ and Δ_2 is the 3-point stencil
    return (measure[tail] + measure[head]) / (2.0 * length)


def path_graph(n: int, length: float | None = None, measure=None, conductance=None) -> MetricMeasureSpace:
    """Path on ``n`` vertices.

    Defaults discretize [0, 1] by ``n`` cells: spacing ``1/n`` and the uniform
    probability measure ``1/n`` per vertex.
    """
    if n < 2:
        raise SpaceError("need at least 2 vertices")
    h = 1.0 / n if length is None else float(length)
    mu = np.broadcast_to(np.asarray(1.0 / n if measure is None else measure, dtype=float), (n,)).copy()
    tail = np.arange(n - 1)
    head = tail + 1
    lengths = np.full(n - 1, h)
    w = _fd_conductance(mu, tail, head, lengths) if conductance is None else \
        np.broadcast_to(np.asarray(conductance, dtype=float), (n - 1,))
    edges = np.column_stack([tail, head, lengths, w])
    return from_edges(n, edges, mu, name=f"path:{n}")


def cycle_graph(n: int, length: float | None = None, measure=None, conductance=None) -> MetricMeasureSpace:
    """Cycle on ``n`` vertices; defaults discretize the unit circle."""
    if n < 3:
        raise SpaceError("a cycle needs at least 3 vertices")
    h = 1.0 / n if length is None else float(length)
    mu = np.broadcast_to(np.asarray(1.0 / n if measure is None else measure, dtype=float), (n,)).copy()
    tail = np.arange(n)
    head = (tail + 1) % n
    lengths = np.full(n, h)
    w = _fd_conductance(mu, tail, head, lengths) if conductance is None else \
        np.broadcast_to(np.asarray(conductance, dtype=float), (n,))
    edges = np.column_stack([tail, head, lengths, w])
    return from_edges(n, edges, mu, name=f"cycle:{n}")


def grid_graph(nx: int, ny: int, length: float | None = None, measure=None, conductance=None) -> MetricMeasureSpace:
    """``nx`` by ``ny`` lattice, vertex ``(i, j)`` has index ``i * ny + j``.

    Defaults: spacing ``1/max(nx, ny)`` and the uniform probability measure.
    """
    n = nx * ny
    if n < 2:
        raise SpaceError("need at least 2 vertices")
    h = 1.0 / max(nx, ny) if length is None else float(length)
    mu = np.broadcast_to(np.asarray(1.0 / n if measure is None else measure, dtype=float), (n,)).copy()
    ids = np.arange(n).reshape(nx, ny)
    tail = np.concatenate([ids[:-1, :].ravel(), ids[:, :-1].ravel()])
    head = np.concatenate([ids[1:, :].ravel(), ids[:, 1:].ravel()])
    lengths = np.full(tail.shape[0], h)
    w = _fd_conductance(mu, tail, head, lengths) if conductance is None else \
        np.broadcast_to(np.asarray(conductance, dtype=float), tail.shape)
    edges = np.column_stack([tail, head, lengths, w])
    return from_edges(n, edges, mu, name=f"grid2d:{nx}x{ny}")


def load_space(path: str | Path) -> MetricMeasureSpace:
    """Read the JSON description ``{"vertices", "edges", "measure"}``."""
    data = json.loads(Path(path).read_text())
    return space_from_dict(data)


def space_from_dict(data: dict) -> MetricMeasureSpace:
    try:
        n = int(data["vertices"])
        edges = data["edges"]
        measure = data["measure"]
    except KeyError as exc:
        raise SpaceError(f"space description lacks field {exc}") from None
    if len(measure) != n:
        raise SpaceError("measure length does not match vertex count")
    return from_edges(n, edges, measure)


def build_space(kind: str, **params) -> MetricMeasureSpace:
    """Dispatch to a builder: ``path``, ``cycle``, ``grid2d`` or ``custom``."""
    if kind == "path":
        return path_graph(**params)
    if kind == "cycle":
        return cycle_graph(**params)
    if kind == "grid2d":
        return grid_graph(**params)
    if kind == "custom":
        if "file" in params:
            return load_space(params["file"])
        return from_edges(params["n"], params["edges"], params["measure"])
    raise SpaceError(f"unknown space kind {kind!r}")


def parse_space(spec: str) -> MetricMeasureSpace:
    """Parse the command-line form ``path:32``, ``cycle:8``, ``grid2d:5x5`` or a JSON path."""
    kind, _, arg = spec.partition(":")
    if kind == "path":
        return path_graph(int(arg))
    if kind == "cycle":
        return cycle_graph(int(arg))
    if kind == "grid2d":
        nx, _, ny = arg.partition("x")
        return grid_graph(int(nx), int(ny or nx))
    if kind == "file":
        return load_space(arg)
    if spec.endswith(".json"):
        return load_space(spec)
    raise SpaceError(f"cannot parse space {spec!r}")


# --------------------------------------------------------------------------
# generalized exponential and logarithm
# --------------------------------------------------------------------------

def exp_p(t, p: float):
    """Deformed exponential ``{1 + (2-p) t}^{1/(2-p)}``.

    For ``p`` in (2, 3) the domain is ``t <= 1/(p-2)`` (the value at the
    endpoint is ``+inf``). For ``p < 2`` the base is clamped at zero, which
    extends the function continuously by 0 to the left of ``-1/(2-p)``.
    """
    if p == 2.0:
        raise DomainError("exp_p is the ordinary exponential at p = 2; use numpy.exp")
    t = np.asarray(t, dtype=float)
    base = 1.0 + (2.0 - p) * t
    if p > 2.0:
        if np.any(base < 0.0):
            raise DomainError("outside exp_p domain")
        with np.errstate(divide="ignore"):
            out = np.power(base, 1.0 / (2.0 - p))
    else:
        out = np.power(np.maximum(base, 0.0), 1.0 / (2.0 - p))
    return out if out.ndim else float(out)


def ln_p(s, p: float):
    """Deformed logarithm ``(s^{2-p} - 1)/(2-p)``, inverse of :func:`exp_p`."""
    if p == 2.0:
        raise DomainError("ln_p is the ordinary logarithm at p = 2; use numpy.log")
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise DomainError("nonpositive argument")
    out = np.expm1((2.0 - p) * np.log(s)) / (2.0 - p)
    return out if out.ndim else float(out)


def plog_inequality_gap(x, V, p: float):
    """LHS minus RHS of the tangent-line bound for ``x ln_p x`` at ``exp_p(-V^p)``.

    The bound reads ``x ln_p x >= x - e - (p-2) V^p e + (p-3) V^p x`` with
    ``e = exp_p(-V^p)``, valid for ``p`` in (2, 3), ``x, V >= 0``. The
    returned gap is therefore nonnegative; it vanishes at ``x = e``.
    """
    if not 2.0 < p < 3.0:
        raise DomainError("the bound is stated for p in (2, 3)")
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    if np.any(x < 0.0) or np.any(V < 0.0):
        raise DomainError("outside exp_p domain: x and V must be nonnegative")
    Vp = V ** p
    e = exp_p(-Vp, p)
    # x ln_p x = (x^{3-p} - x)/(2-p), finite at x = 0
    lhs = (np.power(x, 3.0 - p) - x) / (2.0 - p)
    rhs = x - e - (p - 2.0) * Vp * e + (p - 3.0) * Vp * x
    out = lhs - rhs
    return out if np.ndim(out) else float(out)

"""
Experiment configuration
========================

An :class:`ExperimentConfig` is assembled from an optional TOML file and
flat command-line flags (flags win). Initial densities and weights are
given by short preset strings:

``uniform``, ``bump[:floor]``, ``spike``, ``two-bumps``, ``file:<path>``
    initial densities, always rescaled to unit mass;
``distance:<C>,<eps>[,<x0>]``
    the weight ``V = max(eps, C d(., x0))``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .space import MetricMeasureSpace, parse_space


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def _floats(value) -> list:
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return [float(v) for v in value]


@dataclass
class ExperimentConfig:
    space: str = "path:32"
    p: float = 2.5
    flow: str = "heat"
    T: float = 0.1
    tau: list = field(default_factory=lambda: [1e-2])
    init: str = "bump"
    weight: str = "distance:0.5,0.1"
    suites: list = field(default_factory=list)
    out: str = "qflow-out"
    seed: int = 0
    normalization: str = "standard"

    def validate(self) -> "ExperimentConfig":
        self.p = float(self.p)
        if not 1.0 < self.p < 3.0:
            raise ConfigError("p out of (1,3)")
        if self.flow not in ("heat", "jko", "both"):
            raise ConfigError(f"flow: expected heat, jko or both, got {self.flow!r}")
        self.tau = _floats(self.tau)
        if not self.tau or any(t <= 0.0 for t in self.tau):
            raise ConfigError("tau: step sizes must be positive")
        if any(b >= a for a, b in zip(self.tau, self.tau[1:])):
            raise ConfigError("tau: the sweep must be strictly decreasing")
        self.T = float(self.T)
        if self.T <= 0.0:
            raise ConfigError("T: must be positive")
        if self.flow != "heat" and self.p == 2.0:
            raise ConfigError("p: the entropy flow needs p != 2")
        if self.normalization not in ("scaled", "standard"):
            raise ConfigError("normalization: expected scaled or standard")
        for name, spec in (("space", self.space), ("init", self.init)):
            if spec.startswith("file:") and not Path(spec[5:]).exists():
                raise ConfigError(f"{name}: file {spec[5:]!r} does not exist")
        if self.space.endswith(".json") and not Path(self.space).exists():
            raise ConfigError(f"space: file {self.space!r} does not exist")
        if isinstance(self.suites, str):
            self.suites = [s for s in self.suites.split(",") if s]
        return self

    @property
    def out_dir(self) -> Path:
        return Path(os.environ.get("QFLOW_OUT", self.out))

    def build_space(self) -> MetricMeasureSpace:
        try:
            return parse_space(self.space)
        except ValueError as exc:
            raise ConfigError(f"space: {exc}") from exc

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read a TOML file (optional) and apply non-``None`` overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config: file {str(path)!r} does not exist") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config: {exc}") from exc
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data).validate()


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def coordinate(space: MetricMeasureSpace) -> np.ndarray:
    """A coordinate in (0, 1): shifted distance from vertex 0.

    On the default path graph this is the cell centre ``(i + 1/2)/n``.
    """
    h = float(space.length.min())
    d = space.distance[0]
    return (d + 0.5 * h) / (d.max() + h)


def initial_density(space: MetricMeasureSpace, spec: str) -> np.ndarray:
    """Unit-mass density from a preset string."""
    kind, _, arg = spec.partition(":")
    x = coordinate(space)
    if kind == "uniform":
        f = np.ones(space.n)
    elif kind == "bump":
        floor = float(arg) if arg else 0.0
        f = floor + 1.0 + np.cos(np.pi * x)
    elif kind == "spike":
        f = np.full(space.n, 1e-3)
        f[space.n // 2] += 1.0 / space.measure[space.n // 2]
    elif kind == "two-bumps":
        f = 0.05 + np.exp(-((x - 0.25) / 0.1) ** 2) + np.exp(-((x - 0.75) / 0.1) ** 2)
    elif kind == "file":
        text = Path(arg).read_text()
        f = np.asarray(json.loads(text), dtype=float)
        if f.shape != (space.n,):
            raise ConfigError(f"init: expected {space.n} values in {arg!r}")
    else:
        raise ConfigError(f"init: unknown preset {spec!r}")
    if np.any(f < 0.0):
        raise ConfigError("init: density must be nonnegative")
    return f / space.integrate(f)


def weight_function(space: MetricMeasureSpace, spec: str) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    if kind != "distance":
        raise ConfigError(f"weight: unknown preset {spec!r}")
    parts = _floats(arg) if arg else [0.5, 0.1]
    C, eps = parts[0], parts[1] if len(parts) > 1 else 0.1
    x0 = int(parts[2]) if len(parts) > 2 else 0
    if eps <= 0.0:
        raise ConfigError("weight: eps must be positive")
    return np.maximum(eps, C * space.distance[x0])

"""Run configuration: a single YAML file, validated before anything runs.

Schema (all keys optional, defaults shown)::

    experiment: default
    seed: 0
    replicates: 2000
    threads: 1
    out: out
    measure:
      kind: axis            # axis | isotropic | discrete
      dim: 2
      gamma: null           # default 2*dim (axis), 2*pi (isotropic); required for discrete
      atoms: []             # discrete only: list of directions
      weights: []           # discrete only: matching weights
    window: {a: 1.0, b: 4.0}
    times: {t: 0.5, s: 0.1}
    mixing:
      b_grid: [4, 8, 16, 32, 64]
      layout: ray           # ray | ring
      probes: 2
      u: [0.7, 0.8, 0.9]
      v: [0.2, 0.3]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .measure import AssumptionFailed, DirectionalDistribution, HyperplaneMeasure


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureSpec:
    kind: str = "axis"
    dim: int = 2
    gamma: float | None = None
    atoms: tuple = ()
    weights: tuple = ()

    def build(self, strict: bool = True) -> HyperplaneMeasure:
        """The configured measure; ``strict`` rejects invalid direction laws."""
        if self.kind == "axis":
            m = HyperplaneMeasure.axis_parallel(self.dim, self.gamma)
        elif self.kind == "isotropic":
            m = HyperplaneMeasure.isotropic(self.gamma or 2 * math.pi, self.dim)
        else:
            theta = DirectionalDistribution.discrete(self.atoms, self.weights, strict=strict)
            m = HyperplaneMeasure(self.gamma, theta)
        return m


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "default"
    seed: int = 0
    replicates: int = 2000
    threads: int = 1
    out: str = "out"
    measure: MeasureSpec = field(default_factory=MeasureSpec)
    a: float = 1.0
    b: float = 4.0
    t: float = 0.5
    s: float = 0.1
    b_grid: tuple = (4.0, 8.0, 16.0, 32.0, 64.0)
    layout: str = "ray"
    probes: int = 2
    us: tuple = (0.7, 0.8, 0.9)
    vs: tuple = (0.2, 0.3)

    def with_overrides(self, strict_measure: bool = True, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate(strict_measure)
        return cfg

    def validate(self, strict_measure: bool = True) -> None:
        if not 0 < self.a < self.b:
            raise ConfigError(f"window sizes need 0 < a < b (got a={self.a}, b={self.b})")
        if not 0 < self.s < self.t:
            raise ConfigError(f"times need 0 < s < t (got s={self.s}, t={self.t})")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.measure.kind not in ("axis", "isotropic", "discrete"):
            raise ConfigError(f"unknown measure kind {self.measure.kind!r}")
        if self.measure.dim < 2:
            raise ConfigError("dimension must be at least 2")
        if self.measure.gamma is not None and not self.measure.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.measure.kind == "discrete" and self.measure.gamma is None:
            raise ConfigError("discrete measures need an explicit gamma")
        grid = list(self.b_grid)
        if not grid or any(y <= x for x, y in zip(grid, grid[1:])) or grid[0] <= self.a:
            raise ConfigError("mixing.b_grid must be increasing and above a")
        if self.layout not in ("ray", "ring"):
            raise ConfigError(f"unknown probe layout {self.layout!r}")
        if self.probes < 1:
            raise ConfigError("mixing.probes must be positive")
        if not all(0 < u < 1 for u in self.us) or not all(0 < v for v in self.vs):
            raise ConfigError("need 0 < u < 1 and v > 0")
        try:
            m = self.measure.build(strict=strict_measure)
            if strict_measure:
                m.theta.validate()
        except (AssumptionFailed, ValueError) as e:
            raise ConfigError(f"invalid measure: {e}") from e

    def to_dict(self) -> dict:
        m = self.measure
        return {
            "experiment": self.experiment, "seed": self.seed, "replicates": self.replicates,
            "threads": self.threads, "out": self.out,
            "measure": {"kind": m.kind, "dim": m.dim, "gamma": m.gamma,
                        "atoms": [list(u) for u in m.atoms], "weights": list(m.weights)},
            "window": {"a": self.a, "b": self.b}, "times": {"t": self.t, "s": self.s},
            "mixing": {"b_grid": list(self.b_grid), "layout": self.layout, "probes": self.probes,
                       "u": list(self.us), "v": list(self.vs)},
        }


_TOP = {"experiment", "seed", "replicates", "threads", "out", "measure", "window", "times", "mixing"}


def _sub(d, key, allowed):
    sub = d.get(key) or {}
    if not isinstance(sub, dict):
        raise ConfigError(f"{key} must be a mapping")
    extra = set(sub) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {key}: {sorted(extra)}")
    return sub


def from_dict(d: dict, strict_measure: bool = True) -> RunConfig:
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    extra = set(d) - _TOP
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    md = _sub(d, "measure", {"kind", "dim", "gamma", "atoms", "weights"})
    wd = _sub(d, "window", {"a", "b"})
    td = _sub(d, "times", {"t", "s"})
    xd = _sub(d, "mixing", {"b_grid", "layout", "probes", "u", "v"})
    base = RunConfig()
    try:
        measure = MeasureSpec(
            kind=str(md.get("kind", "axis")),
            dim=int(md.get("dim", 2)),
            gamma=None if md.get("gamma") is None else float(md["gamma"]),
            atoms=tuple(tuple(float(x) for x in u) for u in md.get("atoms", ())),
            weights=tuple(float(w) for w in md.get("weights", ())),
        )
        cfg = RunConfig(
            experiment=str(d.get("experiment", base.experiment)),
            seed=int(d.get("seed", base.seed)),
            replicates=int(d.get("replicates", base.replicates)),
            threads=int(d.get("threads", base.threads)),
            out=str(d.get("out", base.out)),
            measure=measure,
            a=float(wd.get("a", base.a)),
            b=float(wd.get("b", base.b)),
            t=float(td.get("t", base.t)),
            s=float(td.get("s", base.s)),
            b_grid=tuple(float(x) for x in xd.get("b_grid", base.b_grid)),
            layout=str(xd.get("layout", base.layout)),
            probes=int(xd.get("probes", base.probes)),
            us=tuple(float(x) for x in xd.get("u", base.us)),
            vs=tuple(float(x) for x in xd.get("v", base.vs)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"malformed config value: {e}") from e
    cfg.validate(strict_measure)
    return cfg


def load_config(path=None, strict_measure: bool = True) -> RunConfig:
    if path is None:
        return from_dict({}, strict_measure)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    return from_dict(d, strict_measure)

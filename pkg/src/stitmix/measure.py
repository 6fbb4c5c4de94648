"""Translation-invariant hyperplane measures ``gamma * lambda (x) theta``.

A :class:`HyperplaneMeasure` pairs the intensity ``gamma`` with an even
directional distribution ``theta`` and provides

* ``lambda_hit(K)``: the measure of all hyperplanes hitting ``K``,
  ``(gamma / 2) * integral of width(K, u) theta(du)``;
* ``sample_conditional(K, rng)``: a hyperplane drawn from the normalized
  restriction of the measure to ``[K]``;
* ``separating_measure(a, b, i)`` and ``big_L(a, b)``: the measure of the
  hyperplanes separating facet ``i`` of ``[-a,a]^d`` from facet ``i`` of
  ``[-b,b]^d``, and its minimum over facets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .geometry import GeometryError, Hyperplane, Polygon, Window, as_direction

TWO_PI = 2.0 * math.pi
SIMPSON_TOL = 1e-10
SIMPSON_DEPTH = 40
MAX_REJECTIONS = 10**6
QMC_POINTS = 2**14


class AssumptionFailed(ValueError):
    """The hyperplane measure violates a modelling assumption."""


class SamplingError(RuntimeError):
    """The rejection sampler failed to accept within its iteration budget."""


# --------------------------------------------------------------------------
# quadrature


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = SIMPSON_TOL, max_depth: int = SIMPSON_DEPTH) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]`` to absolute ``tol``."""
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def _piecewise_simpson(f, kinks: Sequence[float], tol: float = SIMPSON_TOL) -> float:
    """Integrate a 2*pi-periodic function over one period, splitting at ``kinks``."""
    pts = sorted({k % TWO_PI for k in kinks} | {0.0})
    pts.append(TWO_PI)
    pieces = [(pts[i], pts[i + 1]) for i in range(len(pts) - 1) if pts[i + 1] - pts[i] > 1e-15]
    per = tol / max(1, len(pieces))
    return math.fsum(adaptive_simpson(f, lo, hi, per) for lo, hi in pieces)


def _angle(u) -> float:
    return math.atan2(u[1], u[0]) % TWO_PI


def _unit(phi: float) -> tuple[float, float]:
    return (math.cos(phi), math.sin(phi))


def _sphere_qmc(dim: int, n: int = QMC_POINTS, seed: int = 20140101) -> np.ndarray:
    """Antipodally symmetric quasi-uniform points on the unit sphere."""
    from scipy.stats import norm

    s = qmc.Sobol(dim, scramble=True, seed=seed).random(n // 2)
    z = norm.ppf(np.clip(s, 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return np.r_[z, -z]


# --------------------------------------------------------------------------
# directional distributions


@dataclass
class DirectionalDistribution:
    """Even probability measure on the unit sphere.

    ``kind`` is ``"isotropic"`` (uniform) or ``"discrete"`` (finitely many
    atoms). Use the constructors rather than building it directly.
    """

    kind: str
    dim: int
    atoms: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def isotropic(cls, dim: int = 2) -> "DirectionalDistribution":
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        return cls("isotropic", dim)

    @classmethod
    def discrete(cls, atoms, weights, *, strict: bool = True) -> "DirectionalDistribution":
        U = np.array([as_direction(u) for u in atoms], dtype=float)
        w = np.asarray(weights, dtype=float)
        if U.ndim != 2 or len(U) != len(w) or len(U) == 0:
            raise ValueError("need one positive weight per atom")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        theta = cls("discrete", U.shape[1], U, w)
        if strict:
            theta.validate()
        return theta

    @classmethod
    def axis_parallel(cls, dim: int = 2) -> "DirectionalDistribution":
        """Uniform on the ``2*dim`` half-axis directions."""
        eye = np.eye(dim)
        return cls.discrete(np.r_[eye, -eye], np.full(2 * dim, 1.0 / (2 * dim)))

    def is_probability(self) -> bool:
        return self.kind == "isotropic" or abs(float(self.weights.sum()) - 1.0) <= 1e-12

    def is_even(self) -> bool:
        if self.kind == "isotropic":
            return True
        for u, w in zip(self.atoms, self.weights):
            match = np.all(np.abs(self.atoms + u) <= 1e-12, axis=1)
            if not np.any(match) or abs(float(self.weights[match].sum()) - w) > 1e-12:
                return False
        return True

    def is_nondegenerate(self) -> bool:
        """Atoms must not all lie on one great subsphere (they must span R^dim)."""
        if self.kind == "isotropic":
            return True
        return int(np.linalg.matrix_rank(self.atoms, tol=1e-9)) == self.dim

    def validate(self) -> None:
        if not self.is_probability():
            raise AssumptionFailed(f"weights sum to {self.weights.sum()!r}, not 1")
        if not self.is_even():
            raise AssumptionFailed("directional distribution is not even")
        if not self.is_nondegenerate():
            raise AssumptionFailed("directions are concentrated on a great subsphere")

    def to_json(self) -> dict:
        if self.kind == "isotropic":
            return {"kind": "isotropic", "dimension": self.dim}
        return {
            "kind": "discrete",
            "dimension": self.dim,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }


# --------------------------------------------------------------------------
# hyperplane measure


@dataclass(frozen=True)
class SeparatingFamily:
    a: float
    b: float
    values: tuple[float, ...]

    @property
    def L(self) -> float:
        return min(self.values)


class HyperplaneMeasure:
    """The hyperplane measure with intensity ``gamma`` and directions ``theta``.

    Immutable once built; sampling methods take an explicit
    ``numpy.random.Generator``.
    """

    def __init__(self, gamma: float, theta: DirectionalDistribution):
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.gamma = float(gamma)
        self.theta = theta
        self.dim = theta.dim
        self._qmc = None
        if theta.kind == "discrete":
            self._atoms = [tuple(map(float, u)) for u in theta.atoms]
            self._weights = [float(w) for w in theta.weights]

    # constructors matching the common models
    @classmethod
    def isotropic(cls, gamma: float = TWO_PI, dim: int = 2) -> "HyperplaneMeasure":
        return cls(gamma, DirectionalDistribution.isotropic(dim))

    @classmethod
    def axis_parallel(cls, dim: int = 2, gamma: float | None = None) -> "HyperplaneMeasure":
        return cls(2.0 * dim if gamma is None else gamma, DirectionalDistribution.axis_parallel(dim))

    def __repr__(self) -> str:
        return f"HyperplaneMeasure(gamma={self.gamma!r}, theta={self.theta.kind}, dim={self.dim})"

    def to_json(self) -> dict:
        return {"gamma": self.gamma, **self.theta.to_json()}

    @property
    def directions(self) -> np.ndarray:
        """Quadrature nodes used for isotropic integrals in dimension >= 3."""
        if self._qmc is None:
            self._qmc = _sphere_qmc(self.dim)
        return self._qmc

    # -- hitting measure ---------------------------------------------------

    def lambda_hit(self, K, method: str = "auto") -> float:
        """Measure of the hyperplanes hitting ``K``.

        Discrete models sum exactly over atoms. The planar isotropic model
        integrates the support function exactly vertex arc by vertex arc
        (``method="auto"``) or by adaptive Simpson (``method="simpson"``).
        Higher-dimensional isotropic models use a fixed QMC sphere rule.
        """
        if K is None:
            raise GeometryError("empty body")
        if K.dim != self.dim:
            raise GeometryError(f"body dimension {K.dim} != measure dimension {self.dim}")
        if self.theta.kind == "discrete":
            s = 0.0
            for u, w in zip(self._atoms, self._weights):
                s += w * K.width(u)
            return 0.5 * self.gamma * s
        if self.dim == 2:
            if method == "simpson":
                integral = _piecewise_simpson(lambda p: K.support(_unit(p)), _edge_normal_angles(K))
            else:
                integral = _support_integral_exact(K)
            # (gamma/2) * (1/2pi) * int width = (gamma/2pi) * int h
            return self.gamma * integral / TWO_PI
        D = self.directions
        V = np.asarray(K.vertices, dtype=float)
        proj = V @ D.T
        return 0.5 * self.gamma * float((proj.max(0) - proj.min(0)).mean())

    # -- conditional sampling ---------------------------------------------

    def sample_conditional(self, K, rng: np.random.Generator) -> Hyperplane:
        """Draw ``H`` from the measure restricted to ``[K]`` and normalized."""
        if self.theta.kind == "discrete":
            widths = [w * K.width(u) for u, w in zip(self._atoms, self._weights)]
            total = math.fsum(widths)
            if total <= 0.0:
                raise AssumptionFailed("no atom direction hits the body")
            x = rng.random() * total
            j = 0
            acc = widths[0]
            while acc <= x and j < len(widths) - 1:
                j += 1
                acc += widths[j]
            u = self._atoms[j]
        else:
            envelope = K.diameter
            for _ in range(MAX_REJECTIONS):
                if self.dim == 2:
                    phi = math.pi * rng.random()
                    u = (math.cos(phi), math.sin(phi))
                else:
                    z = rng.standard_normal(self.dim)
                    u = tuple(z / np.linalg.norm(z))
                if rng.random() * envelope <= K.width(u):
                    break
            else:
                raise SamplingError("rejection sampler exceeded its iteration budget")
        hi = K.support(u)
        lo = -K.support(tuple(-c for c in u))
        p = lo + (hi - lo) * rng.random()
        if p < 0.0:
            return Hyperplane(-p, tuple(-c for c in u))
        return Hyperplane(p, u)

    def direction_marginal(self, K, phi: float) -> float:
        """Density (w.r.t. d phi on [0, pi)) of the unoriented cut direction for
        the planar isotropic model: ``width(K, u(phi)) / integral``."""
        if not (self.theta.kind == "isotropic" and self.dim == 2):
            raise ValueError("direction_marginal is defined for the planar isotropic model")
        return K.width(_unit(phi)) / _support_integral_exact(K)

    # -- separating sets ---------------------------------------------------

    def separating_measure(self, a: float, b: float, i: int) -> float:
        """Measure of the hyperplanes separating ``f_i'`` of ``[-a,a]^d`` from
        ``f_i`` of ``[-b,b]^d``: ``gamma * int [-h(f_i,-u) - h(f_i',u)]_+ theta(du)``."""
        if not (0 < a < b):
            raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
        inner = Window(a, self.dim).facet(i)
        outer = Window(b, self.dim).facet(i)

        def gap(u) -> float:
            return -outer.support(tuple(-c for c in u)) - inner.support(u)

        if self.theta.kind == "discrete":
            return self.gamma * math.fsum(
                w * max(0.0, gap(u)) for u, w in zip(self._atoms, self._weights)
            )
        if self.dim == 2:
            return self.gamma * _positive_part_integral(gap, inner, outer) / TWO_PI
        D = self.directions
        vi = np.asarray(inner.vertices)
        vo = np.asarray(outer.vertices)
        g = (vo @ D.T).min(0) - (vi @ D.T).max(0)
        return self.gamma * float(np.clip(g, 0.0, None).mean())

    def separating_family(self, a: float, b: float) -> SeparatingFamily:
        return SeparatingFamily(
            a, b, tuple(self.separating_measure(a, b, i) for i in range(1, 2 * self.dim + 1))
        )

    def big_L(self, a: float, b: float) -> float:
        """Minimum of the separating measures over all ``2*dim`` facets.

        Raises :class:`AssumptionFailed` naming the first facet whose
        separating set has measure zero.
        """
        fam = self.separating_family(a, b)
        for i, v in enumerate(fam.values, start=1):
            if v <= 0.0:
                raise AssumptionFailed(
                    f"separating set G_{i}({a}, {b}) has measure zero; "
                    "every facet pair needs positive separating measure"
                )
        return fam.L


# --------------------------------------------------------------------------
# planar isotropic helpers


def _edge_normal_angles(K: Polygon) -> list[float]:
    vs = K.vertices
    n = len(vs)
    out = []
    for i in range(n):
        (x1, y1), (x2, y2) = vs[i], vs[(i + 1) % n]
        out.append(math.atan2(-(x2 - x1), y2 - y1))
    return out


def _support_integral_exact(K: Polygon) -> float:
    """``int_0^{2pi} h(K, u(phi)) d phi`` for a CCW convex polygon.

    Vertex ``v_i`` attains the support on the arc between the outward normals
    of its two incident edges; there ``h = v_x cos + v_y sin`` integrates to
    ``v_x sin - v_y cos``.
    """
    vs = K.vertices
    normals = _edge_normal_angles(K)
    n = len(vs)
    total = []
    for i in range(n):
        start = normals[i - 1]
        span = (normals[i] - start) % TWO_PI
        end = start + span
        x, y = vs[i]
        total.append(x * (math.sin(end) - math.sin(start)) - y * (math.cos(end) - math.cos(start)))
    return math.fsum(total)


def _segment_kinks(vset) -> list[float]:
    """Angles where the maximizing vertex of a planar facet segment switches."""
    (x1, y1), (x2, y2) = vset.vertices[0], vset.vertices[-1]
    base = math.atan2(-(x2 - x1), y2 - y1)
    return [base, base + math.pi]


def _positive_part_integral(gap, inner, outer) -> float:
    """``int_0^{2pi} [gap(u(phi))]_+ d phi`` with kinks and zero crossings resolved."""
    kinks = sorted({k % TWO_PI for k in _segment_kinks(inner) + _segment_kinks(outer)} | {0.0})
    kinks.append(TWO_PI)
    f = lambda p: gap(_unit(p))
    pieces = []
    for lo, hi in zip(kinks[:-1], kinks[1:]):
        if hi - lo <= 1e-15:
            continue
        # gap is A cos + B sin on each piece: at most two sign changes
        grid = np.linspace(lo, hi, 65)
        vals = [f(p) for p in grid]
        cuts = [lo]
        for k in range(len(grid) - 1):
            if (vals[k] > 0) != (vals[k + 1] > 0) and vals[k] != 0 and vals[k + 1] != 0:
                cuts.append(brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=1e-15))
        cuts.append(hi)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            if c1 - c0 > 1e-15 and f(0.5 * (c0 + c1)) > 0:
                pieces.append((c0, c1))
    per = SIMPSON_TOL / max(1, len(pieces))
    return math.fsum(adaptive_simpson(lambda p: max(0.0, f(p)), c0, c1, per) for c0, c1 in pieces)

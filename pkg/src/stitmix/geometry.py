"""Convex polytope kernel.

Two cell representations share one duck-typed surface (``dim``, ``vertices``,
``tags``, ``volume``, ``support``, ``width``, ``split``):

* :class:`Polygon` -- planar cells as counter-clockwise vertex loops, pure
  Python floats for speed on the small polygons the simulator produces.
* :class:`Polytope` -- cells in any dimension as half-space lists with lazily
  enumerated vertices (scipy/qhull).

Every facet carries a :class:`Tag` recording whether it came from the window
boundary or from a dividing hyperplane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EPS = 1e-9
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for empty, unbounded or otherwise invalid geometric input."""


@dataclass(frozen=True)
class Tag:
    """Facet provenance: ``("window", i)`` or ``("cut", jump_id)``."""

    kind: str
    index: int

    def to_json(self) -> dict:
        return {"kind": self.kind, "index": self.index}

    @classmethod
    def from_json(cls, d: dict) -> "Tag":
        return cls(str(d["kind"]), int(d["index"]))


def window_tag(i: int) -> Tag:
    return Tag("window", i)


def cut_tag(jump_id: int) -> Tag:
    return Tag("cut", jump_id)


def as_direction(coords: Iterable[float]) -> tuple[float, ...]:
    """Normalize ``coords`` to a unit vector."""
    v = tuple(float(c) for c in coords)
    n = math.sqrt(math.fsum(c * c for c in v))
    if n == 0.0 or not math.isfinite(n):
        raise GeometryError(f"cannot normalize {v!r}")
    return tuple(c / n for c in v)


def is_direction(u: Sequence[float]) -> bool:
    return abs(math.sqrt(math.fsum(c * c for c in u)) - 1.0) <= UNIT_TOL


def _dot(x: Sequence[float], u: Sequence[float]) -> float:
    return math.fsum(a * b for a, b in zip(x, u))


class Hyperplane:
    """The hyperplane ``{x : <x, normal> = offset}`` with ``offset >= 0``.

    ``H(0, u)`` and ``H(0, -u)`` are the same set and compare equal.
    """

    __slots__ = ("offset", "normal")

    def __init__(self, offset: float, normal: Sequence[float]):
        offset = float(offset)
        normal = tuple(float(c) for c in normal)
        if offset < 0.0 or not math.isfinite(offset):
            raise GeometryError(f"hyperplane offset must be >= 0, got {offset}")
        if not is_direction(normal):
            raise GeometryError(f"hyperplane normal is not a unit vector: {normal}")
        self.offset = offset
        self.normal = normal

    @classmethod
    def through(cls, normal: Sequence[float], p: float) -> "Hyperplane":
        """Build ``{<x, normal> = p}`` for any real ``p`` (flips to offset >= 0)."""
        u = as_direction(normal) if not is_direction(normal) else tuple(map(float, normal))
        if p < 0.0:
            return cls(-p, tuple(-c for c in u))
        return cls(p, u)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def value(self, x: Sequence[float]) -> float:
        """Signed distance ``<x, u> - alpha``; positive on the ``H+`` side."""
        return _dot(x, self.normal) - self.offset

    def hits_interior(self, body) -> bool:
        """True if the hyperplane meets the interior of ``body`` (beyond EPS)."""
        hi = body.support(self.normal)
        lo = -body.support(tuple(-c for c in self.normal))
        return lo + EPS < self.offset < hi - EPS

    def _canonical(self) -> tuple:
        if self.offset == 0.0:
            for c in self.normal:
                if c != 0.0:
                    return (0.0, self.normal if c > 0 else tuple(-x for x in self.normal))
        return (self.offset, self.normal)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hyperplane):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self) -> int:
        return hash(self._canonical())

    def __repr__(self) -> str:
        return f"Hyperplane(offset={self.offset!r}, normal={self.normal!r})"

    def to_json(self) -> dict:
        return {"offset": self.offset, "normal": list(self.normal)}

    @classmethod
    def from_json(cls, d: dict) -> "Hyperplane":
        return cls(d["offset"], d["normal"])


class VertexSet:
    """Convex hull of finitely many points, possibly lower dimensional.

    Only used where support functions of degenerate bodies are needed
    (window facets in the separating-set calculus).
    """

    def __init__(self, points: Iterable[Sequence[float]]):
        self.vertices = tuple(tuple(float(c) for c in p) for p in points)
        if not self.vertices:
            raise GeometryError("empty vertex set")
        self.dim = len(self.vertices[0])

    def support(self, u: Sequence[float]) -> float:
        return max(_dot(v, u) for v in self.vertices)

    def width(self, u: Sequence[float]) -> float:
        return support(self, u) + support(self, tuple(-c for c in u))

    def __repr__(self) -> str:
        return f"VertexSet({self.vertices!r})"


# --------------------------------------------------------------------------
# planar cells


def _shoelace(vs: Sequence[tuple[float, float]]) -> float:
    s = 0.0
    n = len(vs)
    for i in range(n):
        x1, y1 = vs[i]
        x2, y2 = vs[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


class Polygon:
    """Strictly convex planar polygon with counter-clockwise vertices.

    ``tags[i]`` is the provenance of the edge ``vertices[i] -> vertices[i+1]``.
    """

    __slots__ = ("vertices", "tags", "_area", "_diam")
    dim = 2

    def __init__(self, vertices, tags=None, *, check: bool = True):
        vs = [(float(x), float(y)) for x, y in vertices]
        if tags is None:
            tags = [window_tag(i + 1) for i in range(len(vs))]
        tags = list(tags)
        if check:
            vs, tags = _normalize_loop(vs, tags)
        self.vertices = tuple(vs)
        self.tags = tuple(tags)
        self._area = None
        self._diam = None

    @property
    def volume(self) -> float:
        if self._area is None:
            self._area = _shoelace(self.vertices)
        return self._area

    area = volume

    @property
    def perimeter(self) -> float:
        vs = self.vertices
        n = len(vs)
        return math.fsum(math.dist(vs[i], vs[(i + 1) % n]) for i in range(n))

    @property
    def centroid(self) -> tuple[float, float]:
        vs = self.vertices
        n = len(vs)
        cx = cy = 0.0
        for i in range(n):
            x1, y1 = vs[i]
            x2, y2 = vs[(i + 1) % n]
            cr = x1 * y2 - x2 * y1
            cx += (x1 + x2) * cr
            cy += (y1 + y2) * cr
        a6 = 6.0 * self.volume
        return (cx / a6, cy / a6)

    @property
    def diameter(self) -> float:
        """Largest vertex distance, i.e. the maximal width over directions."""
        if self._diam is None:
            vs = self.vertices
            n = len(vs)
            self._diam = max(
                math.dist(vs[i], vs[j]) for i in range(n) for j in range(i + 1, n)
            )
        return self._diam

    def support(self, u) -> float:
        ux, uy = u[0], u[1]
        return max(x * ux + y * uy for x, y in self.vertices)

    def width(self, u) -> float:
        ux, uy = u[0], u[1]
        vals = [x * ux + y * uy for x, y in self.vertices]
        return max(vals) - min(vals)

    def contains(self, p, tol: float = EPS) -> bool:
        px, py = p
        vs = self.vertices
        n = len(vs)
        for i in range(n):
            x1, y1 = vs[i]
            x2, y2 = vs[(i + 1) % n]
            ex, ey = x2 - x1, y2 - y1
            # outward normal of a CCW edge is (ey, -ex)
            if (px - x1) * ey - (py - y1) * ex > tol * math.hypot(ex, ey):
                return False
        return True

    def bbox(self) -> tuple[tuple[float, float], tuple[float, float]]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys)), (max(xs), max(ys))

    def split(self, h: Hyperplane, jump_id: int):
        """Divide by ``h`` into ``(self & H+, self & H-)``.

        Vertices within EPS of ``h`` are treated as lying on it. Returns
        ``None`` unless ``h`` has vertices strictly on both sides; callers
        resample in that case.
        """
        ux, uy = h.normal
        alpha = h.offset
        d = [x * ux + y * uy - alpha for x, y in self.vertices]
        if max(d) <= EPS or min(d) >= -EPS:
            return None
        new = cut_tag(jump_id)
        plus = _half(self.vertices, self.tags, [-x for x in d], new)
        minus = _half(self.vertices, self.tags, d, new)
        return Polygon(plus[0], plus[1], check=False), Polygon(minus[0], minus[1], check=False)

    def clip(self, u, alpha: float, tag: Tag):
        """Intersect with ``{<x,u> <= alpha}``; the new edge is tagged ``tag``.

        Returns ``None`` if the result has empty interior.
        """
        ux, uy = u[0], u[1]
        d = [x * ux + y * uy - alpha for x, y in self.vertices]
        if max(d) <= EPS:
            return self
        if min(d) >= -EPS:
            return None
        vs, tags = _half(self.vertices, self.tags, d, tag)
        try:
            return Polygon(vs, tags)
        except GeometryError:
            return None

    def intersect(self, other: "Polygon"):
        """Intersection with another convex polygon; edges from ``other`` keep its tags."""
        res = self
        vs = other.vertices
        n = len(vs)
        for i in range(n):
            x1, y1 = vs[i]
            x2, y2 = vs[(i + 1) % n]
            ex, ey = x2 - x1, y2 - y1
            ln = math.hypot(ex, ey)
            u = (ey / ln, -ex / ln)
            res = res.clip(u, x1 * u[0] + y1 * u[1], other.tags[i])
            if res is None:
                return None
        return res

    def scaled(self, r: float) -> "Polygon":
        if r <= 0:
            raise GeometryError("scale factor must be positive")
        return Polygon([(r * x, r * y) for x, y in self.vertices], self.tags, check=False)

    def translated(self, v) -> "Polygon":
        dx, dy = float(v[0]), float(v[1])
        return Polygon([(x + dx, y + dy) for x, y in self.vertices], self.tags, check=False)

    def has_window_facet(self) -> bool:
        return any(t.kind == "window" for t in self.tags)

    def to_json(self) -> dict:
        return {
            "dim": 2,
            "vertices": [list(v) for v in self.vertices],
            "tags": [t.to_json() for t in self.tags],
        }

    def __repr__(self) -> str:
        return f"Polygon({list(self.vertices)!r})"


def _half(vs, tags, d, new_tag):
    """Vertex loop of the part with ``d <= EPS`` (``d`` = signed values per vertex).

    Crossing points are at least EPS from both edge ends, so no merging is needed.
    """
    out: list = []
    out_t: list = []
    n = len(vs)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        v, dv, dw = vs[i], d[i], d[j]
        if dv <= EPS:
            if dw > EPS:
                if dv >= -EPS:
                    out.append(v)
                    out_t.append(new_tag)
                else:
                    w = vs[j]
                    lam = dv / (dv - dw)
                    out.append(v)
                    out_t.append(tags[i])
                    out.append((v[0] + lam * (w[0] - v[0]), v[1] + lam * (w[1] - v[1])))
                    out_t.append(new_tag)
            else:
                out.append(v)
                out_t.append(tags[i])
        elif dw < -EPS:
            w = vs[j]
            lam = dv / (dv - dw)
            out.append((v[0] + lam * (w[0] - v[0]), v[1] + lam * (w[1] - v[1])))
            out_t.append(tags[i])
    return out, out_t


def _normalize_loop(vs, tags):
    """Validate a vertex loop: merge near-duplicates, drop collinear points, force CCW."""
    if len(vs) != len(tags):
        raise GeometryError("one tag per edge required")
    if len(vs) < 3:
        raise GeometryError("polygon needs at least three vertices")
    if _shoelace(vs) < 0.0:
        # reversing the loop maps edge i -> edge between v[i+1], v[i]
        vs = vs[::-1]
        tags = tags[-2::-1] + tags[-1:]
    changed = True
    while changed and len(vs) >= 3:
        changed = False
        n = len(vs)
        for i in range(n):
            j = (i + 1) % n
            if math.dist(vs[i], vs[j]) < EPS:
                # drop vertex j; edge i now runs to j+1 and inherits j's tag
                tags[i] = tags[j]
                del vs[j]
                del tags[j]
                changed = True
                break
            k = (i + 2) % n
            (x0, y0), (x1, y1), (x2, y2) = vs[i], vs[j], vs[k]
            cr = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1)
            scale = max(math.dist(vs[i], vs[j]), math.dist(vs[j], vs[k]))
            if abs(cr) <= EPS * scale:
                if tags[i] != tags[j]:
                    raise GeometryError("collinear edges with different provenance")
                del vs[j]
                del tags[j]
                changed = True
                break
            if cr < 0.0:
                raise GeometryError("polygon is not convex")
    if len(vs) < 3 or _shoelace(vs) <= EPS * EPS:
        raise GeometryError("polygon has empty interior")
    return vs, tags


# --------------------------------------------------------------------------
# general dimension


class Polytope:
    """Bounded convex polytope ``{x : A x <= c}`` in any dimension.

    Rows of ``A`` are unit normals; ``tags[k]`` is the provenance of row ``k``.
    Vertices are enumerated on demand with qhull and redundant rows pruned.
    """

    def __init__(self, normals, offsets, tags, *, check: bool = True):
        self.A = np.asarray(normals, dtype=float)
        self.c = np.asarray(offsets, dtype=float)
        self.tags = tuple(tags)
        if self.A.ndim != 2 or len(self.c) != len(self.A) or len(self.tags) != len(self.A):
            raise GeometryError("inconsistent half-space description")
        self.dim = self.A.shape[1]
        self._vertices = None
        self._volume = None
        if check:
            self._enumerate()

    def _enumerate(self):
        from scipy.optimize import linprog
        from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

        A, c = self.A, self.c
        ell = self.dim
        # Chebyshev centre: max r s.t. A x + r <= c
        res = linprog(
            np.r_[np.zeros(ell), -1.0],
            A_ub=np.c_[A, np.ones(len(A))],
            b_ub=c,
            bounds=[(None, None)] * ell + [(0, None)],
            method="highs",
        )
        if res.status == 3:
            raise GeometryError("polytope is unbounded")
        if res.status != 0 or res.x[-1] <= EPS:
            raise GeometryError("polytope has empty interior")
        centre = res.x[:ell]
        try:
            hs = HalfspaceIntersection(np.c_[A, -c], centre)
        except QhullError as exc:  # pragma: no cover - qhull edge cases
            raise GeometryError(str(exc)) from exc
        V = _merge_points(hs.intersections)
        try:
            hull = ConvexHull(V)
        except QhullError as exc:  # pragma: no cover
            raise GeometryError(str(exc)) from exc
        self._volume = float(hull.volume)
        # keep only rows that carry a true facet (>= dim affinely spanning vertices)
        keep = []
        vals = V @ A.T - c
        for k in range(len(A)):
            on = V[np.abs(vals[:, k]) <= 1e-7 * max(1.0, abs(c[k]))]
            if len(on) >= ell and np.linalg.matrix_rank(on[1:] - on[0], tol=1e-9) == ell - 1:
                keep.append(k)
        self.A = A[keep]
        self.c = c[keep]
        self.tags = tuple(self.tags[k] for k in keep)
        self._vertices = V

    @property
    def vertices(self) -> np.ndarray:
        if self._vertices is None:
            self._enumerate()
        return self._vertices

    @property
    def volume(self) -> float:
        if self._volume is None:
            self._enumerate()
        return self._volume

    @property
    def diameter(self) -> float:
        V = self.vertices
        diff = V[:, None, :] - V[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    @property
    def centroid(self) -> tuple:
        from scipy.spatial import Delaunay

        V = self.vertices
        tri = Delaunay(V)
        simp = V[tri.simplices]
        vols = np.abs(np.linalg.det(simp[:, 1:] - simp[:, :1]))
        cents = simp.mean(axis=1)
        return tuple((cents * vols[:, None]).sum(0) / vols.sum())

    def support(self, u) -> float:
        return float((self.vertices @ np.asarray(u, dtype=float)).max())

    def width(self, u) -> float:
        p = self.vertices @ np.asarray(u, dtype=float)
        return float(p.max() - p.min())

    def contains(self, p, tol: float = EPS) -> bool:
        return bool(np.all(self.A @ np.asarray(p, dtype=float) - self.c <= tol))

    def bbox(self):
        V = self.vertices
        return tuple(V.min(0)), tuple(V.max(0))

    def split(self, h: Hyperplane, jump_id: int):
        u = np.asarray(h.normal)
        d = self.vertices @ u - h.offset
        if np.any(np.abs(d) < EPS) or d.max() <= 0.0 or d.min() >= 0.0:
            return None
        new = cut_tag(jump_id)
        plus = Polytope(np.r_[self.A, -u[None, :]], np.r_[self.c, -h.offset], self.tags + (new,))
        minus = Polytope(np.r_[self.A, u[None, :]], np.r_[self.c, h.offset], self.tags + (new,))
        return plus, minus

    def clip(self, u, alpha: float, tag: Tag):
        u = np.asarray(u, dtype=float)
        d = self.vertices @ u - alpha
        if d.max() <= EPS:
            return self
        if d.min() >= -EPS:
            return None
        try:
            return Polytope(np.r_[self.A, u[None, :]], np.r_[self.c, alpha], self.tags + (tag,))
        except GeometryError:
            return None

    def intersect(self, other: "Polytope"):
        try:
            return Polytope(
                np.r_[self.A, other.A], np.r_[self.c, other.c], self.tags + other.tags
            )
        except GeometryError:
            return None

    def scaled(self, r: float) -> "Polytope":
        if r <= 0:
            raise GeometryError("scale factor must be positive")
        return Polytope(self.A, r * self.c, self.tags)

    def translated(self, v) -> "Polytope":
        v = np.asarray(v, dtype=float)
        return Polytope(self.A, self.c + self.A @ v, self.tags)

    def has_window_facet(self) -> bool:
        return any(t.kind == "window" for t in self.tags)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "normals": self.A.tolist(),
            "offsets": self.c.tolist(),
            "tags": [t.to_json() for t in self.tags],
            "vertices": self.vertices.tolist(),
        }


def _merge_points(P: np.ndarray) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in P:
        if not any(np.linalg.norm(p - q) < EPS for q in out):
            out.append(p)
    return np.array(out)


def polytope_from_json(d: dict):
    if d.get("dim", 2) == 2 and "vertices" in d and "normals" not in d:
        return Polygon(d["vertices"], [Tag.from_json(t) for t in d["tags"]])
    return Polytope(d["normals"], d["offsets"], [Tag.from_json(t) for t in d["tags"]])


# --------------------------------------------------------------------------
# windows


def box(lo: Sequence[float], hi: Sequence[float], tags: Sequence[Tag] | None = None):
    """Axis-parallel box; facet ``i`` (1-based) has normal ``+e_i`` for
    ``i <= dim`` and ``-e_{i-dim}`` otherwise."""
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    ell = len(lo)
    if len(hi) != ell or any(h - l <= EPS for l, h in zip(lo, hi)):
        raise GeometryError("box needs hi > lo in every coordinate")
    if tags is None:
        tags = [window_tag(i + 1) for i in range(2 * ell)]
    if ell == 2:
        (x0, y0), (x1, y1) = lo, hi
        # CCW edges: bottom (-e2), right (+e1), top (+e2), left (-e1)
        return Polygon(
            [(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
            [tags[3], tags[0], tags[1], tags[2]],
            check=False,
        )
    eye = np.eye(ell)
    return Polytope(np.r_[eye, -eye], np.r_[hi, [-x for x in lo]], tags)


@dataclass(frozen=True)
class Window:
    """The cube ``[-a, a]^dim``."""

    half_side: float
    dimension: int = 2

    def __post_init__(self):
        if not self.half_side > 0:
            raise GeometryError("window half side must be positive")
        if self.dimension < 2:
            raise GeometryError("window dimension must be >= 2")

    def polytope(self):
        a = self.half_side
        return box([-a] * self.dimension, [a] * self.dimension)

    @property
    def volume(self) -> float:
        return (2.0 * self.half_side) ** self.dimension

    def facet_normal(self, i: int) -> tuple[float, ...]:
        ell = self.dimension
        if not 1 <= i <= 2 * ell:
            raise GeometryError(f"facet index {i} outside 1..{2 * ell}")
        u = [0.0] * ell
        u[(i - 1) % ell] = 1.0 if i <= ell else -1.0
        return tuple(u)

    def facet(self, i: int) -> VertexSet:
        """Facet ``f_i`` as the hull of its ``2^(dim-1)`` corners."""
        ell = self.dimension
        a = self.half_side
        u = self.facet_normal(i)
        axis = (i - 1) % ell
        pts = []
        for bits in range(2 ** (ell - 1)):
            p = []
            k = 0
            for j in range(ell):
                if j == axis:
                    p.append(a * u[axis])
                else:
                    p.append(a if (bits >> k) & 1 else -a)
                    k += 1
            pts.append(p)
        return VertexSet(pts)

    def contains_box(self, lo, hi, strict: bool = True) -> bool:
        a = self.half_side
        if strict:
            return all(-a < l and h < a for l, h in zip(lo, hi))
        return all(-a <= l and h <= a for l, h in zip(lo, hi))


# --------------------------------------------------------------------------
# module-level operations


def _check_body(body):
    if body is None:
        raise GeometryError("empty polytope")


def support(body, u) -> float:
    """``sup{<x,u> : x in body}``."""
    _check_body(body)
    return body.support(u)


def width(body, u) -> float:
    """``support(body,u) + support(body,-u)``."""
    _check_body(body)
    return body.width(u)


def split(body, h: Hyperplane, jump_id: int):
    """Split ``body`` by ``h``; ``None`` when ``h`` misses or grazes it."""
    _check_body(body)
    return body.split(h, jump_id)


def hits(h: Hyperplane, body) -> bool:
    """True if ``h`` meets the closed body (within EPS)."""
    hi = body.support(h.normal)
    lo = -body.support(tuple(-c for c in h.normal))
    return lo - EPS <= h.offset <= hi + EPS


def separates(h: Hyperplane, A, B) -> bool:
    """True if ``A`` and ``B`` lie in opposite closed half-spaces of ``h``."""
    u = h.normal
    mu = tuple(-c for c in u)
    alpha = h.offset
    a_lo, a_hi = -A.support(mu), A.support(u)
    b_lo, b_hi = -B.support(mu), B.support(u)
    a_plus, a_minus = a_lo >= alpha - EPS, a_hi <= alpha + EPS
    b_plus, b_minus = b_lo >= alpha - EPS, b_hi <= alpha + EPS
    return (a_plus and b_minus) or (a_minus and b_plus)

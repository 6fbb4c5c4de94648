import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_polygon
from stitmix.geometry import (
    EPS,
    GeometryError,
    Hyperplane,
    Polygon,
    Polytope,
    Tag,
    Window,
    box,
    cut_tag,
    hits,
    polytope_from_json,
    separates,
    split,
    support,
    width,
)
from stitmix.measure import HyperplaneMeasure

UNIT = box([0, 0], [1, 1])
S2 = math.sqrt(0.5)


def test_support_unit_square():
    assert support(UNIT, (1.0, 0.0)) == 1.0


@given(st.floats(0, 2 * math.pi), st.floats(0.1, 10))
def test_support_of_cube_is_l1_norm(phi, a):
    u = (math.cos(phi), math.sin(phi))
    assert support(Window(a).polytope(), u) == pytest.approx(a * (abs(u[0]) + abs(u[1])), rel=1e-12)


def test_width_examples():
    assert width(Window(1.5).polytope(), (1.0, 0.0)) == 3.0
    assert width(UNIT, (S2, S2)) == pytest.approx(math.sqrt(2), rel=1e-15)
    with pytest.raises(GeometryError):
        width(None, (1.0, 0.0))


def test_split_half():
    plus, minus = split(UNIT, Hyperplane(0.5, (1.0, 0.0)), 7)
    assert plus.area == pytest.approx(0.5) and minus.area == pytest.approx(0.5)
    assert Tag("cut", 7) in plus.tags and Tag("cut", 7) in minus.tags
    assert max(v[0] for v in plus.vertices) == pytest.approx(1.0)
    assert sum(t.kind == "window" for t in plus.tags) == 3


def test_split_misses():
    assert split(UNIT, Hyperplane(2.0, (1.0, 0.0)), 1) is None
    # grazing an edge is not a split either
    assert split(UNIT, Hyperplane(1.0, (1.0, 0.0)), 1) is None


def test_split_diagonal_through_vertices():
    parts = split(UNIT, Hyperplane(0.0, (S2, -S2)), 1)
    assert parts is not None
    areas = sorted(p.area for p in parts)
    assert areas == pytest.approx([0.5, 0.5], rel=1e-12)
    assert all(len(p.vertices) == 3 for p in parts)


def test_hyperplane_through_origin_equal_both_orientations():
    assert Hyperplane(0.0, (0.6, 0.8)) == Hyperplane(0.0, (-0.6, -0.8))
    assert hash(Hyperplane(0.0, (0.6, 0.8))) == hash(Hyperplane(0.0, (-0.6, -0.8)))
    assert Hyperplane(1.0, (0.6, 0.8)) != Hyperplane(1.0, (-0.6, -0.8))
    with pytest.raises(GeometryError):
        Hyperplane(-1.0, (1.0, 0.0))
    with pytest.raises(GeometryError):
        Hyperplane(1.0, (1.0, 1.0))


def test_polygon_normalizes_clockwise_and_rejects_nonconvex():
    p = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert p.area == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (2, 0), (1, 0.2), (1, 2)])


def test_separates_examples():
    a, b = Window(1.0), Window(2.0)
    assert separates(Hyperplane(1.5, (1.0, 0.0)), a.facet(1), b.facet(1))
    assert not separates(Hyperplane(0.5, (1.0, 0.0)), a.facet(1), b.facet(1))


def test_separating_hyperplane_does_not_separate_other_facets(axis, rng):
    a, b = Window(1.0), Window(2.0)
    for _ in range(200):
        h = Hyperplane(rng.uniform(1.0, 2.0), (1.0, 0.0))
        assert separates(h, a.facet(1), b.facet(1))
        assert not separates(h, a.facet(2), b.facet(2))


def test_window_facets_follow_indexing():
    w = Window(2.0, 3)
    for i in range(1, 4):
        assert w.facet_normal(i + 3) == tuple(-x for x in w.facet_normal(i))
    assert len(w.facet(1).vertices) == 4
    with pytest.raises(GeometryError):
        w.facet_normal(7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_split_conservation_for_sampled_cuts(seed):
    rng = np.random.default_rng(seed)
    P = random_polygon(rng)
    m = HyperplaneMeasure.isotropic() if seed % 2 else HyperplaneMeasure.axis_parallel()
    for j in range(5):
        h = m.sample_conditional(P, rng)
        parts = P.split(h, j)
        if parts is None:  # grazing draw, resampled upstream
            continue
        assert parts[0].area > 0 and parts[1].area > 0
        assert parts[0].area + parts[1].area == pytest.approx(P.area, rel=1e-9)
        P = parts[int(rng.integers(2))]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.5, 2.0, 3.0]), st.floats(0, 2 * math.pi))
def test_homothety(seed, r, phi):
    P = random_polygon(np.random.default_rng(seed))
    u = (math.cos(phi), math.sin(phi))
    assert support(P.scaled(r), u) == pytest.approx(r * support(P, u), rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 2 * math.pi))
def test_support_positive_when_origin_interior(seed, phi):
    P = random_polygon(np.random.default_rng(seed))
    c = P.centroid
    Q = P.translated((-c[0], -c[1]))
    assert support(Q, (math.cos(phi), math.sin(phi))) > 0


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 3), st.floats(0, 2 * math.pi), st.integers(0, 1000))
def test_separation_excludes_hitting(alpha, phi, seed):
    rng = np.random.default_rng(seed)
    A = random_polygon(rng, scale=0.3).translated((-2, 0))
    B = random_polygon(rng, scale=0.3).translated((2, 0))
    h = Hyperplane(alpha, (math.cos(phi), math.sin(phi)))
    if separates(h, A, B):
        assert not h.hits_interior(A) and not h.hits_interior(B)


def test_clip_and_intersect():
    tri = Polygon([(0, 0), (2, 0), (0, 2)])
    sq = box([-1, -1], [1, 1])
    inter = tri.intersect(sq)
    assert inter.area == pytest.approx(1.0)
    assert tri.intersect(box([5, 5], [6, 6])) is None
    assert sq.clip((1.0, 0.0), 0.0, cut_tag(3)).area == pytest.approx(2.0)


def test_json_round_trip():
    P = UNIT.split(Hyperplane(0.25, (0.0, 1.0)), 4)[0]
    Q = polytope_from_json(P.to_json())
    assert Q.vertices == P.vertices and Q.tags == P.tags


def test_general_dimension_box_split():
    B = box([0, 0, 0], [1, 2, 3])
    assert isinstance(B, Polytope)
    assert B.volume == pytest.approx(6.0)
    parts = B.split(Hyperplane(0.5, (1.0, 0.0, 0.0)), 1)
    assert [p.volume for p in parts] == pytest.approx([3.0, 3.0])
    assert all(p.has_window_facet() for p in parts)
    assert B.split(Hyperplane(5.0, (1.0, 0.0, 0.0)), 1) is None
    assert hits(Hyperplane(1.0, (1.0, 0.0, 0.0)), B)
    assert B.contains((0.5, 1.0, 1.5)) and not B.contains((2.0, 0.0, 0.0))


def test_eps_is_the_incidence_tolerance():
    assert EPS == 1e-9

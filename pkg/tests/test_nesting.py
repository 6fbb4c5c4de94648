import numpy as np
import pytest

from stitmix import nesting, stit
from stitmix.geometry import Hyperplane, Window, box
from stitmix.replicate import replicate_rng
from stitmix.stats import soft_check
from stitmix.tessellation import Tessellation


def _sim(m, half, t, seed):
    return stit.simulate(m, Window(half), t, replicate_rng(seed, 0)).tessellation()


def test_iterate_trivial_frame(iso):
    W = Window(1.0).polytope()
    R = stit.simulate(iso, Window(2.0), 1.0, np.random.default_rng(0)).tessellation()
    out = nesting.iterate(Tessellation.trivial(W), [R])
    direct = R.restrict(W)
    assert len(out) == len(direct)
    assert out.total_volume() == pytest.approx(4.0, rel=1e-9)


def test_iterate_with_trivial_inputs_is_identity(iso):
    T = _sim(iso, 1.0, 2.0, 1)
    Rs = [Tessellation.trivial(box([-5, -5], [5, 5])) for _ in range(len(T))]
    out = nesting.iterate(T, Rs)
    assert sorted(c.area for c in out.cells) == pytest.approx(sorted(c.area for c in T.cells), rel=1e-12)


def test_iterate_count_is_sum_of_clipped_counts(iso):
    T = _sim(iso, 1.0, 1.5, 2)
    frame = nesting.number_cells(T)
    Rs = [_sim(iso, 1.0, 1.0, 100 + k) for k in range(len(T))]
    out = nesting.iterate(frame, Rs)
    assert len(out) == sum(len(R.restrict(c)) for R, c in zip(Rs, frame.cells))
    assert out.total_volume() == pytest.approx(T.total_volume(), rel=1e-6)


def test_iterate_runs_out_of_inputs(iso):
    T = _sim(iso, 1.0, 2.0, 3)
    assert len(T) > 1
    with pytest.raises(nesting.IterationInputError):
        nesting.iterate(T, [Tessellation.trivial(Window(1.0).polytope())])


def test_numbering_puts_origin_cell_first_and_ignores_storage_order(iso):
    T = _sim(iso, 1.0, 3.0, 4)
    a = nesting.number_cells(T)
    assert a.cells[0].contains((0.0, 0.0))
    rng = np.random.default_rng(0)
    shuffled = Tessellation(T.window, [T.cells[i] for i in rng.permutation(len(T))])
    b = nesting.number_cells(shuffled)
    assert [c.vertices for c in a.cells] == [c.vertices for c in b.cells]
    d = [np.hypot(*c.centroid) for c in a.cells[1:]]
    assert all(y >= x - 1e-12 for x, y in zip(d, d[1:]))


def test_numbering_tie_break_is_lexicographic():
    W = Window(1.0).polytope()
    left, right = W.split(Hyperplane(0.0, (1.0, 0.0)), 1)[::-1]
    quads = [*right.split(Hyperplane(0.0, (0.0, 1.0)), 2), *left.split(Hyperplane(0.0, (0.0, 1.0)), 3)]
    T = Tessellation(W, quads[::-1])
    order = [tuple(round(x, 9) for x in c.centroid) for c in nesting.number_cells(T).cells]
    # equal distances from the origin, so the coordinates decide
    assert order == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]


def test_rescale(iso):
    T = _sim(iso, 1.0, 2.0, 5)
    assert [c.vertices for c in nesting.rescale(T, 1.0).cells] == [c.vertices for c in T.cells]
    assert nesting.rescale(T, 2.0).total_volume() == pytest.approx(4 * T.total_volume())
    back = nesting.rescale(nesting.rescale(T, 3.0), 1 / 3.0)
    for c, d in zip(back.cells, T.cells):
        assert np.allclose(c.vertices, d.vertices, atol=1e-12, rtol=0)
    with pytest.raises(ValueError):
        nesting.rescale(T, 0.0)


def test_summary_of_trivial_window():
    T = Tessellation.trivial(Window(1.0).polytope())
    assert nesting.summary(T) == (1.0, 4.0, 0.0)


@pytest.mark.slow
def test_same_law_control(iso):
    rows = nesting.stit_property_test(iso, 1.0, 1.0, 400, seed=9, control=True)
    ctrl = [r for r in rows if r.test == "control"]
    assert len(ctrl) == 3 and all(0 <= r.p <= 1 for r in ctrl)


@pytest.mark.slow
@pytest.mark.parametrize("model", ["axis", "iso"])
def test_stit_property_small(model, axis, iso):
    m = axis if model == "axis" else iso
    rows, _ = soft_check(lambda n, s: nesting.stit_property_test(m, 1.0, 0.75, n, s=0.5, seed=s), 500, 21)
    assert all(r.p > 0.01 for r in rows), rows


@pytest.mark.slow
def test_consistency_small(iso):
    rows, _ = soft_check(lambda n, s: nesting.consistency_test(iso, 1.0, 2.0, 1.0, n, s), 500, 31)
    assert all(r.p > 0.01 for r in rows), rows

"""Iteration (nesting) of tessellations, rescaling, and the STIT checks built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .geometry import Window, box
from .measure import HyperplaneMeasure
from .replicate import run_replicates
from .stats import KSRow, ks_rows
from .stit import simulate
from .tessellation import Tessellation


class IterationInputError(ValueError):
    """The supply of tessellations ran out before every frame cell got one."""


@dataclass
class NumberedTessellation:
    """Cells sorted by distance of their centroid from the origin.

    Cell 1 (index 0) is the cell containing the origin; remaining ties are
    broken lexicographically by centroid coordinates.
    """

    window: object
    cells: list

    def __len__(self) -> int:
        return len(self.cells)

    def as_tessellation(self) -> Tessellation:
        return Tessellation(self.window, list(self.cells))


def _ref_key(cell):
    c = tuple(round(x, 12) for x in cell.centroid)
    return (round(math.sqrt(sum(x * x for x in c)), 12),) + c


def number_cells(T: Tessellation) -> NumberedTessellation:
    if isinstance(T, NumberedTessellation):
        return T
    cells = sorted(T.cells, key=_ref_key)
    origin = (0.0,) * T.dim
    for k, c in enumerate(cells):
        if c.contains(origin):
            if k:
                cells.insert(0, cells.pop(k))
            break
    return NumberedTessellation(T.window, cells)


def iterate(T, Rs: Iterable[Tessellation]) -> Tessellation:
    """``T ⊞ R``: the k-th cell of ``T`` is subdivided by ``Rs[k]`` clipped to it."""
    frame = number_cells(T)
    supply: Iterator = iter(Rs)
    out = []
    for k, cell in enumerate(frame.cells, start=1):
        try:
            R = next(supply)
        except StopIteration:
            raise IterationInputError(f"no tessellation supplied for cell {k} of {len(frame)}") from None
        out.extend(R.restrict(cell).cells)
    return Tessellation(frame.window, out)


def rescale(T: Tessellation, r: float) -> Tessellation:
    if not r > 0:
        raise ValueError("scale factor must be positive")
    if isinstance(T, NumberedTessellation):
        T = T.as_tessellation()
    return T.scaled(r)


# --------------------------------------------------------------------------
# summary statistics and Monte Carlo tasks


def summary(T: Tessellation) -> tuple[float, float, float]:
    """(cell count, 0-cell area, total edge length) of a planar tessellation."""
    z = T.zero_cell()
    return float(len(T)), (z.volume if z is not None else 0.0), T.total_edge_length()


def _as_samples(rows) -> dict:
    arr = np.asarray(rows, float).reshape(-1, 3)
    return {"cell_count": arr[:, 0], "zero_cell_area": arr[:, 1], "edge_length": arr[:, 2]}


def _nested(measure, frame: Tessellation, s, rng) -> Tessellation:
    # each R^k is simulated in the bounding box of its cell: by consistency
    # this has the law of an independent copy of Y_s seen through that box
    Rs = []
    for cell in number_cells(frame).cells:
        lo, hi = cell.bbox()
        Rs.append(simulate(measure, box(lo, hi), s, rng).tessellation())
    return iterate(frame, Rs)


def _task_direct(i, rng, measure, half, t):
    return summary(simulate(measure, Window(half), t, rng).tessellation())


def _task_restricted(i, rng, measure, half_big, half, t):
    T = simulate(measure, Window(half_big), t, rng).tessellation()
    return summary(T.restrict(Window(half).polytope()))


def _task_scaled(i, rng, measure, half, t):
    # 2 * Y_{2t} seen through W equals 2 * (Y_{2t} & W/2)
    T = simulate(measure, Window(half / 2), 2 * t, rng).tessellation()
    return summary(rescale(T, 2.0))


def _task_nested_scaled(i, rng, measure, half, t):
    frame = simulate(measure, Window(half / 2), t, rng).tessellation()
    return summary(rescale(_nested(measure, frame, t, rng), 2.0))


def _task_nested(i, rng, measure, half, t, s):
    frame = simulate(measure, Window(half), t, rng).tessellation()
    return summary(_nested(measure, frame, s, rng))


def consistency_test(measure: HyperplaneMeasure, a: float, b: float, t: float, n: int,
                     seed: int = 0, threads: int = 1) -> list[KSRow]:
    """KS comparison of ``(Y_t & [-b,b]^2) & [-a,a]^2`` with a direct run in ``[-a,a]^2``."""
    x = run_replicates(_task_restricted, n, seed, threads=threads, args=(measure, b, a, t))
    y = run_replicates(_task_direct, n, seed + 1, threads=threads, args=(measure, a, t))
    return ks_rows("consistency", _as_samples(x), _as_samples(y))


def stit_property_test(measure: HyperplaneMeasure, half: float, t: float, n: int, s: float | None = None,
                       seed: int = 0, threads: int = 1, control: bool = False) -> list[KSRow]:
    """KS comparisons behind the STIT property in ``W = [-half, half]^2``.

    Rows: ``Y_t`` vs ``2 Y_{2t}``; ``Y_t`` vs ``2 (Y_t ⊞ Y'_t)``; ``Y_{t+s}`` vs
    ``Y_t ⊞ Y'_s``; optionally ``Y_t`` vs an independent ``Y_t`` as a control.
    """
    s = t if s is None else s
    args = (measure, half)
    base = _as_samples(run_replicates(_task_direct, n, seed, threads=threads, args=args + (t,)))
    rows = []
    scaled = _as_samples(run_replicates(_task_scaled, n, seed + 1, threads=threads, args=args + (t,)))
    rows += ks_rows("Y_t vs 2Y_2t", base, scaled)
    nested = _as_samples(run_replicates(_task_nested_scaled, n, seed + 2, threads=threads, args=args + (t,)))
    rows += ks_rows("Y_t vs 2(Y_t+Y'_t)", base, nested)
    later = _as_samples(run_replicates(_task_direct, n, seed + 3, threads=threads, args=args + (t + s,)))
    iterated = _as_samples(run_replicates(_task_nested, n, seed + 4, threads=threads, args=args + (t, s)))
    rows += ks_rows("Y_t+s vs Y_t+Y'_s", later, iterated)
    if control:
        other = _as_samples(run_replicates(_task_direct, n, seed + 5, threads=threads, args=args + (t,)))
        rows += ks_rows("control", base, other)
    return rows

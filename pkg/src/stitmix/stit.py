"""STIT jump process in a bounded window.

The process is run with a single global clock: the waiting time to the next
division is exponential with rate ``zeta`` (the sum of the cell rates
``Lambda([C])``), the dividing cell is picked with probability proportional to
its rate, and the dividing hyperplane is drawn from the measure restricted to
that cell. This is equivalent in law to independent exponential lifetimes per
cell.

Cell ids follow the construction: the window is cell 1 and jump ``j`` turns
its parent into cells ``2j`` (the ``H+`` side) and ``2j + 1`` (``H-``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Hyperplane, Window
from .measure import HyperplaneMeasure
from .tessellation import Tessellation

DEFAULT_MAX_CELLS = 10**7
MAX_RESAMPLES = 1000


class ExplosionGuard(RuntimeError):
    """The cell count exceeded the configured cap."""


class InvariantViolation(AssertionError):
    """A hard invariant of the tessellation state does not hold."""


class StopSimulation(Exception):
    """Raised by an observer to end a run before ``t_end``."""


@dataclass(frozen=True)
class Jump:
    index: int
    time: float
    parent: int
    hyperplane: Hyperplane
    children: tuple[int, int]
    zeta: float

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "time": self.time,
            "parent": self.parent,
            "hyperplane": self.hyperplane.to_json(),
            "children": list(self.children),
            "zeta": self.zeta,
        }


class _RateTree:
    """Fenwick tree over cell slots for O(log n) proportional selection."""

    def __init__(self, capacity: int = 64):
        self.n = capacity
        self.tree = [0.0] * (capacity + 1)
        self.vals = [0.0] * capacity

    def _grow(self, need: int) -> None:
        n = self.n
        while n < need:
            n *= 2
        vals = self.vals + [0.0] * (n - self.n)
        self.n = n
        self.vals = [0.0] * n
        self.tree = [0.0] * (n + 1)
        for i, v in enumerate(vals):
            if v:
                self.set(i, v)

    def set(self, i: int, v: float) -> None:
        if i >= self.n:
            self._grow(i + 1)
        delta = v - self.vals[i]
        self.vals[i] = v
        i += 1
        tree, n = self.tree, self.n
        while i <= n:
            tree[i] += delta
            i += i & -i

    def find(self, x: float) -> int:
        """Smallest slot whose cumulative weight exceeds ``x``."""
        pos = 0
        tree, n = self.tree, self.n
        step = 1 << (n.bit_length() - 1)
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= x:
                pos = nxt
                x -= tree[nxt]
            step >>= 1
        if pos >= n or self.vals[pos] <= 0.0:
            # rounding pushed us past the last live slot
            for k in range(min(pos, n - 1), -1, -1):
                if self.vals[k] > 0.0:
                    return k
        return pos


class TessellationState:
    """Live cells, clock, cached ``zeta`` and jump log of one trajectory."""

    def __init__(self, measure: HyperplaneMeasure, window, *, max_cells: int = DEFAULT_MAX_CELLS):
        if isinstance(window, Window):
            self.window = window
            domain = window.polytope()
        else:
            self.window = None
            domain = window
        self.measure = measure
        self.domain = domain
        self.max_cells = max_cells
        lam = measure.lambda_hit(domain)
        self.cells: dict[int, object] = {1: domain}
        self.rates: dict[int, float] = {1: lam}
        self._tree = _RateTree()
        self._tree.set(0, lam)
        self.zeta = lam
        self.clock = 0.0
        self.jump_log: list[Jump] = []
        origin = (0.0,) * domain.dim
        self.zero_cell_id = 1 if domain.contains(origin) else None

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def choose_cell(self, rng: np.random.Generator) -> int:
        return self._tree.find(rng.random() * self.zeta) + 1

    def divide(self, cell_id: int, h: Hyperplane, time: float) -> Jump | None:
        """Split cell ``cell_id`` by ``h`` at ``time``; ``None`` if ``h`` misses it."""
        cell = self.cells[cell_id]
        index = len(self.jump_log) + 1
        parts = cell.split(h, index)
        if parts is None:
            return None
        if len(self.cells) + 1 > self.max_cells:
            raise ExplosionGuard(f"cell count would exceed {self.max_cells}")
        plus_id, minus_id = 2 * index, 2 * index + 1
        lam = self.measure.lambda_hit
        r_plus, r_minus = lam(parts[0]), lam(parts[1])
        old = self.rates.pop(cell_id)
        del self.cells[cell_id]
        self.cells[plus_id] = parts[0]
        self.cells[minus_id] = parts[1]
        self.rates[plus_id] = r_plus
        self.rates[minus_id] = r_minus
        tree = self._tree
        tree.set(cell_id - 1, 0.0)
        tree.set(plus_id - 1, r_plus)
        tree.set(minus_id - 1, r_minus)
        self.zeta += r_plus + r_minus - old
        if cell_id == self.zero_cell_id:
            origin = (0.0,) * cell.dim
            self.zero_cell_id = plus_id if h.value(origin) >= 0.0 else minus_id
        self.clock = time
        jump = Jump(index, time, cell_id, h, (plus_id, minus_id), self.zeta)
        self.jump_log.append(jump)
        return jump

    def tessellation(self) -> Tessellation:
        return Tessellation(self.domain, [self.cells[k] for k in sorted(self.cells)])

    def to_json(self) -> dict:
        return {
            "format": "stitmix.tessellation/1",
            "measure": self.measure.to_json(),
            "clock": self.clock,
            "zeta": self.zeta,
            "zero_cell_id": self.zero_cell_id,
            "window": self.domain.to_json(),
            "cells": [{"id": k, **self.cells[k].to_json()} for k in sorted(self.cells)],
            "jumps": [j.to_json() for j in self.jump_log],
        }


def advance(state: TessellationState, t_end: float, rng: np.random.Generator,
            observers: Sequence = ()) -> TessellationState:
    """Run ``state`` forward until ``t_end``. Memorylessness makes restarts exact."""
    measure = state.measure
    try:
        while True:
            zeta = state.zeta
            t = state.clock + rng.exponential(1.0 / zeta)
            if t > t_end:
                break
            cid = state.choose_cell(rng)
            cell = state.cells[cid]
            for _ in range(MAX_RESAMPLES):
                h = measure.sample_conditional(cell, rng)
                jump = state.divide(cid, h, t)
                if jump is not None:
                    break
            else:  # pragma: no cover - would need a broken sampler
                raise RuntimeError("could not draw a dividing hyperplane")
            for obs in observers:
                obs.on_jump(state, jump)
    except StopSimulation:
        return state
    state.clock = max(state.clock, t_end)
    return state


def simulate(measure: HyperplaneMeasure, window, t_end: float, rng: np.random.Generator,
             observers: Sequence = (), *, max_cells: int = DEFAULT_MAX_CELLS) -> TessellationState:
    """Simulate ``Y_t & W`` for ``t`` in ``[0, t_end]``.

    Observers receive ``on_start(state)`` (if defined) and ``on_jump(state,
    jump)`` after every division; raising :class:`StopSimulation` ends the run.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    state = TessellationState(measure, window, max_cells=max_cells)
    for obs in observers:
        start = getattr(obs, "on_start", None)
        if start is not None:
            start(state)
    return advance(state, t_end, rng, observers)


def zeta_of(state: TessellationState) -> float:
    """``sum Lambda([C])`` over live cells, recomputed from scratch."""
    lam = state.measure.lambda_hit
    return math.fsum(lam(c) for c in state.cells.values())


def check_invariants(state: TessellationState, rel_tol: float = 1e-9,
                     volume_tol: float = 1e-6) -> None:
    """Raise :class:`InvariantViolation` unless the state is consistent."""
    if state.n_cells != 1 + len(state.jump_log):
        raise InvariantViolation("cell count != 1 + number of jumps")
    vol = math.fsum(c.volume for c in state.cells.values())
    if abs(vol - state.domain.volume) > volume_tol * state.domain.volume:
        raise InvariantViolation(f"cell volumes sum to {vol}, window has {state.domain.volume}")
    z = zeta_of(state)
    if abs(z - state.zeta) > rel_tol * z:
        raise InvariantViolation(f"cached zeta {state.zeta} != recomputed {z}")
    prev = state.measure.lambda_hit(state.domain)
    for j in state.jump_log:
        if j.zeta < prev * (1.0 - 1e-12):
            raise InvariantViolation(f"zeta decreased at jump {j.index}")
        prev = j.zeta


# --------------------------------------------------------------------------
# observers


class ZetaMonitor:
    """Checks volume conservation and zeta monotonicity at every jump."""

    def __init__(self, rel_tol: float = 1e-9):
        self.rel_tol = rel_tol
        self.jumps = 0
        self._prev = None
        self._vol: dict[int, float] = {}

    def on_start(self, state):
        self._prev = state.zeta
        self._vol = {k: c.volume for k, c in state.cells.items()}

    def on_jump(self, state, jump):
        parent = self._vol.pop(jump.parent)
        kids = [state.cells[c].volume for c in jump.children]
        if min(kids) <= 0.0:
            raise InvariantViolation(f"child with empty interior at jump {jump.index}")
        if abs(sum(kids) - parent) > self.rel_tol * parent:
            raise InvariantViolation(f"volume not conserved at jump {jump.index}")
        if jump.zeta < self._prev * (1.0 - 1e-12):
            raise InvariantViolation(f"zeta decreased at jump {jump.index}")
        for c, v in zip(jump.children, kids):
            self._vol[c] = v
        self._prev = jump.zeta
        self.jumps += 1


class WaitRecorder:
    """Records waiting times multiplied by the rate in force during the wait."""

    def __init__(self):
        self.normalized: list[float] = []
        self._last_t = 0.0
        self._last_zeta = None

    def on_start(self, state):
        self._last_t = state.clock
        self._last_zeta = state.zeta

    def on_jump(self, state, jump):
        self.normalized.append((jump.time - self._last_t) * self._last_zeta)
        self._last_t = jump.time
        self._last_zeta = jump.zeta


@dataclass
class EncapsulationRecord:
    happened: bool
    time: float | None
    inner_intact_at: float | None
    inner_hit_time: float | None = None

    @property
    def event(self) -> bool:
        """``S(W', W) < s`` and ``Y_s & W' = W'`` at the probe time ``s``."""
        return self.happened and self.inner_intact_at is not None


class EncapsulationDetector:
    """Tracks the 0-cell for the encapsulation time of ``inner`` in the window.

    The 0-cell is encapsulated once it carries no window facet while no cut
    has yet met the interior of ``inner`` (so ``inner`` is still inside it).
    """

    def __init__(self, inner, probe_time: float | None = None):
        self.inner = inner.polytope() if isinstance(inner, Window) else inner
        self.probe_time = probe_time
        self.time: float | None = None
        self.inner_hit_time: float | None = None
        self._zero_id = None
        self.separating_cuts: list[Hyperplane] = []
        # cuts of the 0-cell up to and including the encapsulating one
        self.cuts_at_encapsulation: tuple[Hyperplane, ...] = ()

    def on_start(self, state):
        self._zero_id = state.zero_cell_id

    def on_jump(self, state, jump):
        if jump.parent != self._zero_id:
            return
        self._zero_id = state.zero_cell_id
        self.on_zero_division(jump.time, jump.hyperplane, state.cells[self._zero_id])

    def on_zero_division(self, time: float, h: Hyperplane, zero_cell) -> None:
        if self.inner_hit_time is not None:
            return
        if h.hits_interior(self.inner):
            self.inner_hit_time = time
            return
        self.separating_cuts.append(h)
        if self.time is None and not zero_cell.has_window_facet():
            self.time = time
            self.cuts_at_encapsulation = tuple(self.separating_cuts)

    def record(self, s: float | None = None) -> EncapsulationRecord:
        s = self.probe_time if s is None else s
        if s is None:
            raise ValueError("probe time required")
        happened = self.time is not None and self.time < s
        intact = self.inner_hit_time is None or self.inner_hit_time > s
        return EncapsulationRecord(happened, self.time, s if intact else None, self.inner_hit_time)


# --------------------------------------------------------------------------
# 0-cell lineage


@dataclass
class ZeroCellPath:
    times: list[float] = field(default_factory=list)
    hyperplanes: list[Hyperplane] = field(default_factory=list)
    cells: list = field(default_factory=list)


def simulate_zero_cell(measure: HyperplaneMeasure, window, t_end: float,
                       rng: np.random.Generator, on_division=None) -> ZeroCellPath:
    """Follow only the cell containing the origin up to ``t_end``.

    Extant cells evolve independently, so the 0-cell of the full process is
    itself a jump process: lifetime ``Exp(Lambda([C]))``, then a split by a
    hyperplane from the measure restricted to ``C`` and the child holding the
    origin continues. ``on_division(time, h, new_cell)`` is called per split.
    """
    cell = window.polytope() if isinstance(window, Window) else window
    origin = (0.0,) * cell.dim
    if not cell.contains(origin):
        raise ValueError("window does not contain the origin")
    path = ZeroCellPath(cells=[cell])
    t = 0.0
    k = 0
    while True:
        t += rng.exponential(1.0 / measure.lambda_hit(cell))
        if t > t_end:
            return path
        k += 1
        for _ in range(MAX_RESAMPLES):
            h = measure.sample_conditional(cell, rng)
            parts = cell.split(h, k)
            if parts is not None:
                break
        cell = parts[0] if h.value(origin) >= 0.0 else parts[1]
        path.times.append(t)
        path.hyperplanes.append(h)
        path.cells.append(cell)
        if on_division is not None:
            try:
                on_division(t, h, cell)
            except StopSimulation:
                return path


def detect_encapsulation(measure: HyperplaneMeasure, a: float, b: float, s: float,
                         rng: np.random.Generator, *, full: bool = False) -> EncapsulationRecord:
    """One replicate of the encapsulation experiment for ``[-a,a]^d`` in ``[-b,b]^d``.

    By default only the 0-cell lineage is simulated; ``full=True`` runs the
    whole window process with the detector attached as an observer.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    d = measure.dim
    det = EncapsulationDetector(Window(a, d), probe_time=s)
    if full:
        simulate(measure, Window(b, d), s, rng, observers=[det])
    else:
        def stop_when_decided(t, h, cell):
            det.on_zero_division(t, h, cell)
            if det.inner_hit_time is not None:
                raise StopSimulation

        simulate_zero_cell(measure, Window(b, d), s, rng, on_division=stop_when_decided)
    return det.record(s)


def encapsulation_lower_bound(measure: HyperplaneMeasure, a: float, b: float, s: float) -> float:
    """``exp(-s Lambda([W'])) * (1 - exp(-s L(a,b)))^(2d)``."""
    lam = measure.lambda_hit(Window(a, measure.dim).polytope())
    L = measure.big_L(a, b)
    return math.exp(-s * lam) * (-math.expm1(-s * L)) ** (2 * measure.dim)


# --------------------------------------------------------------------------
# exactly solvable case of the jump inequalities


@dataclass
class ChiResult:
    chi_t: float
    chi_t_minus_s: float
    ratio: float
    mc: tuple[float, float, float] | None = None
    stderr: tuple[float, float, float] | None = None
    n: int = 0

    def chain_holds(self) -> bool:
        """``chi(t,s;t) <= ratio <= 1/chi(t,s;t-s)`` on the closed forms."""
        return self.chi_t <= self.ratio <= 1.0 / self.chi_t_minus_s

    def within(self, k: float = 3.0) -> tuple[bool, bool, bool]:
        if self.mc is None:
            raise ValueError("no Monte Carlo estimate attached")
        exact = (self.chi_t, self.chi_t_minus_s, self.ratio)
        return tuple(abs(m - e) <= k * se for m, e, se in zip(self.mc, exact, self.stderr))


def _no_jump_replicate(measure, inner, t, s, rng):
    state = simulate(measure, inner, t, rng)
    times = [j.time for j in state.jump_log]
    first = times[0] if times else math.inf
    quiet = not any(t - s < x <= t for x in times)
    return first, quiet


def chi_no_jump_case(measure: HyperplaneMeasure, inner: Window, t: float, s: float,
                     n: int = 0, seed: int = 0, threads: int = 1) -> ChiResult:
    """The conditioning event ``A = {Y & W' = W'}``.

    Closed forms: ``chi(t,s;t) = 1``, ``chi(t,s;t-s) = exp(-s Lambda([W']))``
    and ``P(Y_{t-s} in A) / P(Y_t in A) = exp(s Lambda([W']))``. With ``n > 0``
    each is also estimated from ``n`` simulations of the process in ``W'``.
    """
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    lam = measure.lambda_hit(inner.polytope() if isinstance(inner, Window) else inner)
    res = ChiResult(1.0, math.exp(-s * lam), math.exp(s * lam))
    if n <= 0:
        return res
    from .replicate import run_replicates

    out = run_replicates(_chi_task, n, seed, threads=threads, args=(measure, inner, t, s))
    first = np.array([o[0] for o in out])
    quiet = np.array([o[1] for o in out])
    in_a_t = first > t
    in_a_ts = first > t - s
    n_t, n_ts = int(in_a_t.sum()), int(in_a_ts.sum())
    chi_t = float(quiet[in_a_t].mean()) if n_t else float("nan")
    se_t = math.sqrt(max(chi_t * (1 - chi_t), 0.0) / n_t) if n_t else float("nan")
    chi_ts = float(quiet[in_a_ts].mean()) if n_ts else float("nan")
    se_ts = math.sqrt(chi_ts * (1 - chi_ts) / n_ts) if n_ts else float("nan")
    p1, p2 = n_ts / n, n_t / n
    ratio = p1 / p2 if p2 > 0 else float("inf")
    # A_t is a subset of A_{t-s}
    var_log = max((1 - p2) / (n * p2) - (1 - p1) / (n * p1), 0.0) if p2 > 0 else float("inf")
    res.mc = (chi_t, chi_ts, ratio)
    res.stderr = (se_t, se_ts, ratio * math.sqrt(var_log))
    res.n = n
    return res


def _chi_task(index, rng, measure, inner, t, s):
    return _no_jump_replicate(measure, inner, t, s, rng)

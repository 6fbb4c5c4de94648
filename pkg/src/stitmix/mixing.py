"""Mixing coefficient: partition estimator, upper bounds, zeta tails and decay.

The estimator tabulates joint hitting patterns of probe boxes inside ``W'``
and outside ``W``. Any fixed pair of finite partitions gives a value below the
supremum that defines beta, so it is a lower estimate of beta itself (up to
the usual positive plug-in bias of order ``sqrt(atoms / N)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .geometry import Window, box
from .measure import HyperplaneMeasure
from .replicate import replicate_rng, run_replicates
from .stit import simulate

MIN_ATOM_COUNT = 5
BOOTSTRAP = 200
SERIES_RTOL = 1e-12
MAX_SERIES_TERMS = 10**8


class EstimationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# probe partitions


@dataclass(frozen=True)
class ProbePartition:
    """Inner probe boxes in ``W' = [-a,a]^2``, outer ones in ``W_sim`` outside ``W = [-b,b]^2``.

    The events ``{no cell boundary meets box}`` of the inner (outer) boxes
    generate ``2^k`` atoms on either side. ``sim_lo``/``sim_hi`` give the
    window the process is simulated in.
    """

    a: float
    b: float
    inner: tuple
    outer: tuple
    sim_lo: tuple
    sim_hi: tuple
    layout: str = "custom"

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")
        for lo, hi in self.inner:
            if not all(-self.a < l and h < self.a for l, h in zip(lo, hi)):
                raise ValueError(f"inner probe {lo}-{hi} not strictly inside W'")
        for lo, hi in self.outer:
            if all(l < self.b and h > -self.b for l, h in zip(lo, hi)):
                raise ValueError(f"outer probe {lo}-{hi} meets W")
        for lo, hi in self.inner + self.outer:
            if not all(s <= l and h <= S for l, h, s, S in zip(lo, hi, self.sim_lo, self.sim_hi)):
                raise ValueError(f"probe {lo}-{hi} outside the simulation window")

    @property
    def shape(self) -> tuple[int, int]:
        return 2 ** len(self.inner), 2 ** len(self.outer)

    def sim_window(self):
        return box(self.sim_lo, self.sim_hi)

    def to_json(self) -> dict:
        return {
            "a": self.a, "b": self.b, "layout": self.layout,
            "inner": [[list(lo), list(hi)] for lo, hi in self.inner],
            "outer": [[list(lo), list(hi)] for lo, hi in self.outer],
            "sim_window": [list(self.sim_lo), list(self.sim_hi)],
        }


def _square_at(c, r):
    return (tuple(x - r for x in c), tuple(x + r for x in c))


def ring_partition(a: float, b: float, k: int = 4, margin: float = 2.0) -> ProbePartition:
    """``k`` inner boxes around ``a/2`` and ``k`` outer boxes around ``1.5 b``, spread in angle.

    Simulated in ``[-margin*b, margin*b]^2``.
    """
    if margin <= 1.5 + 0.2:
        raise ValueError("margin must leave room for the outer ring")
    inner, outer = [], []
    for j in range(k):
        phi = math.pi / 4 + 2 * math.pi * j / k
        u = (math.cos(phi), math.sin(phi))
        cheb = max(abs(u[0]), abs(u[1]))
        inner.append(_square_at((0.5 * a * u[0] / cheb, 0.5 * a * u[1] / cheb), 0.2 * a))
        outer.append(_square_at((1.5 * b * u[0] / cheb, 1.5 * b * u[1] / cheb), 0.2 * b))
    m = margin * b
    return ProbePartition(a, b, tuple(inner), tuple(outer), (-m, -m), (m, m), "ring")


def ray_partition(a: float, b: float, k: int = 2, height: float = 0.25) -> ProbePartition:
    """Probes along the positive first axis: ``k`` in ``(0, a)`` and ``k`` in ``(b, b + a)``.

    All boxes share the strip ``|y| < height * a``. The simulation window is
    ``[-a, b + a] x [-a, a]``; consistency makes the law of the probe events
    the same as in any larger window.
    """
    p = a / k
    h = height * a
    inner = tuple(((j * p + 0.25 * p, -h), (j * p + 0.75 * p, h)) for j in range(k))
    outer = tuple(((b + j * p + 0.25 * p, -h), (b + j * p + 0.75 * p, h)) for j in range(k))
    return ProbePartition(a, b, inner, outer, (-a, -a), (b + a, a), "ray")


class ProbeTracker:
    """Observer recording which probe boxes are met by a cell boundary."""

    def __init__(self, boxes: Sequence):
        self.polys = [box(lo, hi) for lo, hi in boxes]
        self.centers = [tuple(0.5 * (l + h) for l, h in zip(lo, hi)) for lo, hi in boxes]
        self.hit = [False] * len(boxes)
        self._where: dict[int, list[int]] = {}

    def on_start(self, state):
        self._where = {}
        for i, c in enumerate(self.centers):
            for cid, cell in state.cells.items():
                if cell.contains(c):
                    self._where.setdefault(cid, []).append(i)
                    break

    def on_jump(self, state, jump):
        probes = self._where.pop(jump.parent, None)
        if not probes:
            return
        h = jump.hyperplane
        plus, minus = jump.children
        for i in probes:
            if h.hits_interior(self.polys[i]):
                self.hit[i] = True
            else:
                child = plus if h.value(self.centers[i]) >= 0.0 else minus
                self._where.setdefault(child, []).append(i)

    def pattern(self, lo: int = 0, hi: int | None = None) -> int:
        bits = self.hit[lo:hi]
        return sum(1 << j for j, x in enumerate(bits) if x)


def _beta_task(i, rng, measure, partition, t):
    tr = ProbeTracker(partition.inner + partition.outer)
    simulate(measure, partition.sim_window(), t, rng, observers=[tr])
    k = len(partition.inner)
    return tr.pattern(0, k), tr.pattern(k, None)


# --------------------------------------------------------------------------
# estimator


def _merge_sparse(table: np.ndarray, min_count: int) -> np.ndarray:
    """Pool rows, then columns, whose marginal count is below ``min_count``."""
    for axis in (0, 1):
        t = table if axis == 0 else table.T
        marg = t.sum(1)
        small = marg < min_count
        if small.sum() > 1:
            t = np.vstack([t[~small], t[small].sum(0, keepdims=True)])
        table = t if axis == 0 else t.T
    return table


def beta_from_table(table, min_count: int = MIN_ATOM_COUNT) -> float:
    """``1/2 sum_ij |p_ij - p_i. p_.j|`` of a joint count table."""
    table = np.asarray(table, dtype=float)
    n = table.sum()
    if n <= 0:
        raise EstimationError("empty atom table")
    if min_count:
        table = _merge_sparse(table, min_count)
    p = table / n
    return float(0.5 * np.abs(p - np.outer(p.sum(1), p.sum(0))).sum())


def joint_table(inner_idx, outer_idx, shape) -> np.ndarray:
    flat = np.asarray(inner_idx) * shape[1] + np.asarray(outer_idx)
    return np.bincount(flat, minlength=shape[0] * shape[1]).reshape(shape)


@dataclass
class BetaEstimate:
    value: float
    stderr: float
    n: int
    table: np.ndarray = field(repr=False)


def bootstrap_beta(table, rng: np.random.Generator, reps: int = BOOTSTRAP,
                   min_count: int = MIN_ATOM_COUNT) -> float:
    table = np.asarray(table)
    n = int(table.sum())
    p = (table / n).ravel()
    draws = rng.multinomial(n, p, size=reps)
    vals = [beta_from_table(d.reshape(table.shape), min_count) for d in draws]
    return float(np.std(vals, ddof=1))


def beta_hat(measure: HyperplaneMeasure, partition: ProbePartition, t: float, n: int,
             seed: int = 0, threads: int = 1, min_count: int = MIN_ATOM_COUNT) -> BetaEstimate:
    """Partition estimate of beta(a, b) from ``n`` simulations of ``Y_t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    res = run_replicates(_beta_task, n, seed, threads=threads, args=(measure, partition, t))
    idx = np.asarray(res, dtype=np.int64).reshape(-1, 2)
    table = joint_table(idx[:, 0], idx[:, 1], partition.shape)
    val = beta_from_table(table, min_count)
    se = bootstrap_beta(table, replicate_rng(seed, 2**31), min_count=min_count)
    return BetaEstimate(val, se, n, table)


# --------------------------------------------------------------------------
# upper bounds


@dataclass(frozen=True)
class BetaBoundInputs:
    a: float
    b: float
    t: float
    s: float
    M: float
    ell: int
    lambda_wp: float
    L: float
    p_tail: float

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")
        if not 0 < self.s < self.t:
            raise ValueError("need 0 < s < t")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0.0 <= self.p_tail <= 1.0:
            raise ValueError("p_tail must lie in [0, 1]")

    def _e(self) -> float:
        return math.exp(-self.s * self.lambda_wp) * (-math.expm1(-self.s * self.L)) ** (2 * self.ell)


def theorem2_bound(x: BetaBoundInputs, clamp: bool = True) -> float:
    """``P(zeta >= M) + P(zeta < M) [1 - E e^{-sM} + max(e^{sM} - 1, 2 - e^{-sM} - E)]``
    with ``E = e^{-s Lambda([W'])} (1 - e^{-s L})^{2 ell}``."""
    e = x._e()
    sm = x.s * x.M
    em = math.exp(-sm)
    bracket = 1.0 - e * em + max(math.expm1(sm), 2.0 - em - e)
    raw = x.p_tail + (1.0 - x.p_tail) * bracket
    return min(raw, 1.0) if clamp else raw


def simplified_bound(x: BetaBoundInputs, clamp: bool = True) -> float:
    """Same as :func:`theorem2_bound` with the max replaced by the sum of its two terms."""
    e = x._e()
    sm = x.s * x.M
    bracket = 2.0 + math.exp(sm) - math.exp(-sm) - (1.0 + math.exp(-sm)) * e
    raw = x.p_tail + (1.0 - x.p_tail) * bracket
    return min(raw, 1.0) if clamp else raw


def empirical_tail(samples, M: float) -> float:
    """``#{zeta >= M} / n``."""
    z = np.sort(np.asarray(samples, dtype=float))
    return float(1.0 - np.searchsorted(z, M, side="left") / len(z))


@dataclass
class GridOptimum:
    value: float
    raw: float
    s: float
    M: float
    u: float
    v: float
    p_tail: float


def optimize_bound_grid(a, b, t, ell, lambda_wp, L, zeta_samples,
                        us=(0.7, 0.8, 0.9), vs=(0.2, 0.3)) -> GridOptimum:
    """Minimise the mixing bound over ``s = b^-u``, ``M = b^v``.

    ``s`` is capped just below ``t`` where ``b^-u >= t``.
    """
    best = None
    for u in us:
        s = min(b ** -u, t * (1 - 1e-9))
        for v in vs:
            M = b ** v
            p = empirical_tail(zeta_samples, M)
            x = BetaBoundInputs(a, b, t, s, M, ell, lambda_wp, L, p)
            raw = theorem2_bound(x, clamp=False)
            if best is None or raw < best.raw:
                best = GridOptimum(min(raw, 1.0), raw, s, M, u, v, p)
    return best


def optimize_bound_free(a, b, t, ell, lambda_wp, L, zeta_samples, n_m: int = 64) -> GridOptimum:
    """Minimise the raw bound over all ``0 < s < t`` and ``M`` among the sample quantiles."""
    z = np.unique(np.asarray(zeta_samples, dtype=float))
    cand = np.unique(np.r_[np.nextafter(z[np.linspace(0, len(z) - 1, n_m).astype(int)], np.inf)])
    best = None
    for M in cand:
        p = empirical_tail(zeta_samples, M)

        def f(log_s):
            x = BetaBoundInputs(a, b, t, math.exp(log_s), M, ell, lambda_wp, L, p)
            return theorem2_bound(x, clamp=False)

        r = optimize.minimize_scalar(f, bounds=(math.log(t) - 20, math.log(t * (1 - 1e-9))),
                                     method="bounded", options={"xatol": 1e-6})
        if best is None or r.fun < best.raw:
            best = GridOptimum(min(r.fun, 1.0), float(r.fun), math.exp(r.x), float(M), float("nan"),
                               float("nan"), p)
    return best


# --------------------------------------------------------------------------
# zeta tails and the birth chain


def _zeta_task(i, rng, measure, a, t):
    return simulate(measure, Window(a, measure.dim), t, rng).zeta


def zeta_samples(measure: HyperplaneMeasure, a: float, t: float, n: int, seed: int = 0,
                 threads: int = 1) -> np.ndarray:
    """``n`` draws of ``zeta(Y_t & [-a,a]^dim)``."""
    return np.asarray(run_replicates(_zeta_task, n, seed, threads=threads, args=(measure, a, t)))


@dataclass
class ZetaTail:
    M: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    markov: np.ndarray
    moment: float
    r: int
    n: int


def zeta_tail(samples, M, r: int = 2) -> ZetaTail:
    """Tail estimate ``P(zeta >= M)`` with the Markov bound ``E[zeta^r] / M^r``."""
    z = np.asarray(samples, dtype=float)
    M = np.atleast_1d(np.asarray(M, dtype=float))
    n = len(z)
    p = np.array([empirical_tail(z, m) for m in M])
    mom = float(np.mean(z ** r))
    return ZetaTail(M, p, np.sqrt(p * (1 - p) / n), np.minimum(mom / M ** r, 1.0), mom, r, n)


def quantile_threshold(samples, eps: float) -> float:
    """Smallest ``M`` with ``#{zeta < M} > (1 - eps) n``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    z = np.sort(np.asarray(samples, dtype=float))
    k = int(math.floor((1 - eps) * len(z))) + 1
    return float(np.nextafter(z[k - 1], np.inf))


def birth_chain_tail(q: float, t: float, M: float) -> float:
    """``P(B_t >= M)`` for the linear birth chain with rates ``q n`` and ``B_0 = 1``.

    ``B_t`` is geometric on ``{1, 2, ...}`` with success probability ``e^{-qt}``.
    """
    if M <= 1:
        return 1.0
    return float((-math.expm1(-q * t)) ** (math.ceil(M) - 1))


def birth_chain_moment(q: float, t: float, r: int) -> float:
    """``E[B_t^r] = e^{-qt} sum_{l>=1} l^r (1 - e^{-qt})^{l-1}``, summed to relative
    tolerance 1e-12 with a geometric bound on the tail."""
    if not (q > 0 and t > 0):
        raise ValueError("need q, t > 0")
    if r < 1:
        raise ValueError("r must be a positive integer")
    p = math.exp(-q * t)
    x = -math.expm1(-q * t)
    if x == 0.0:
        return 1.0
    total = 0.0
    l0 = 1
    chunk = 4096
    logx = math.log(x)
    while True:
        l = np.arange(l0, l0 + chunk, dtype=float)
        terms = np.exp(r * np.log(l) + (l - 1) * logx)
        total += math.fsum(terms)
        last = l[-1]
        rho = ((last + 1) / last) ** r * x
        if rho < 1:
            tail = terms[-1] * rho / (1 - rho)
            if tail <= SERIES_RTOL * total:
                return p * (total + tail)
        l0 += chunk
        chunk = min(2 * chunk, 1 << 22)
        if l0 > MAX_SERIES_TERMS:
            raise ArithmeticError("birth chain moment series did not converge")


# --------------------------------------------------------------------------
# decay experiment


@dataclass
class DecayRow:
    b: float
    beta_hat: float
    beta_stderr: float
    bound: float
    bound_raw: float
    s: float
    M: float
    free_bound_raw: float
    L: float


@dataclass
class DecayResult:
    rows: list
    slope_bound: float
    slope_raw: float
    slope_free_raw: float
    spearman_rho: float
    lambda_wp: float

    def bound_nonincreasing(self) -> bool:
        vals = [r.bound for r in self.rows]
        return all(y <= x + 1e-12 for x, y in zip(vals, vals[1:]))

    def beta_below_bound(self, k: float = 3.0) -> bool:
        return all(r.beta_hat <= r.bound + k * r.beta_stderr for r in self.rows)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def decay_experiment(measure: HyperplaneMeasure, a: float, t: float, bs: Sequence[float], n: int,
                     seed: int = 0, threads: int = 1, k: int = 2, layout: str = "ray",
                     us=(0.7, 0.8, 0.9), vs=(0.2, 0.3), zeta_n: int | None = None) -> DecayResult:
    """beta estimate and optimized mixing bound along an increasing grid of ``b``."""
    bs = [float(b) for b in bs]
    if any(y <= x for x, y in zip(bs, bs[1:])) or bs[0] <= a:
        raise ValueError("b grid must be increasing and above a")
    ell = measure.dim
    lam = measure.lambda_hit(Window(a, ell).polytope())
    z = zeta_samples(measure, a, t, zeta_n or n, seed=seed + 7, threads=threads)
    rows = []
    for j, b in enumerate(bs):
        part = ring_partition(a, b, k) if layout == "ring" else ray_partition(a, b, k)
        est = beta_hat(measure, part, t, n, seed=seed + 1000 * (j + 1), threads=threads)
        L = measure.big_L(a, b)
        g = optimize_bound_grid(a, b, t, ell, lam, L, z, us, vs)
        free = optimize_bound_free(a, b, t, ell, lam, L, z)
        rows.append(DecayRow(b, est.value, est.stderr, g.value, g.raw, g.s, g.M, free.raw, L))
    b_arr = np.array(bs)
    rho = stats.spearmanr(b_arr, [r.beta_hat for r in rows]).statistic
    return DecayResult(
        rows,
        loglog_slope(b_arr, [r.bound for r in rows]),
        loglog_slope(b_arr, [r.bound_raw for r in rows]),
        loglog_slope(b_arr, [r.free_bound_raw for r in rows]),
        float(rho),
        lam,
    )

"""Invariant battery behind ``stitmix verify``.

HARD checks are exact identities or assertions that must hold on every
trajectory. SOFT checks are statistical; a failing SOFT check is rerun once
at twice the sample size with a fresh seed before it is reported as failed.
Statistical checks are SKIPPED when the configured sample size is too small
for them to have useful power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mixing, nesting, stit
from .geometry import Window, box
from .measure import AssumptionFailed, HyperplaneMeasure
from .replicate import run_replicates
from .stats import MIN_KS_SAMPLES, soft_check

HARD, SOFT = "HARD", "SOFT"
PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


@dataclass
class CheckResult:
    name: str
    kind: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.status:7s} [{self.kind}] {self.name}: {self.detail}"


def _hard(name, ok, detail):
    return CheckResult(name, HARD, PASS if ok else FAIL, detail)


# -- HARD --------------------------------------------------------------------


def check_theta(m: HyperplaneMeasure) -> CheckResult:
    th = m.theta
    parts = {"probability": th.is_probability(), "even": th.is_even(), "nondegenerate": th.is_nondegenerate()}
    bad = [k for k, v in parts.items() if not v]
    return _hard("direction law", not bad, "ok" if not bad else "violates " + ", ".join(bad))


def check_hitting(m: HyperplaneMeasure) -> CheckResult:
    rng = np.random.default_rng(0)
    K = box([-1.0, -0.5], [1.5, 0.75]) if m.dim == 2 else box([-1.0] * m.dim, [1.0] * m.dim)
    base = m.lambda_hit(K)
    worst = 0.0
    for _ in range(5):
        v = rng.normal(size=m.dim) * 3
        worst = max(worst, abs(m.lambda_hit(K.translated(v)) - base) / base)
    ok = base > 0 and worst <= 1e-9
    detail = f"Lambda([K])={base:.12g}, translation drift {worst:.1e}"
    if m.dim == 2 and m.theta.kind == "isotropic":
        exact = m.gamma / (2 * math.pi) * K.perimeter
        ok &= abs(base - exact) <= 1e-9 * exact
        detail += f", perimeter formula {exact:.12g}"
    return _hard("hitting measure", ok, detail)


def check_separating(m: HyperplaneMeasure, a: float, b: float) -> CheckResult:
    try:
        L = m.big_L(a, b)
    except AssumptionFailed as e:
        return _hard("separating measure", False, str(e))
    worst = 0.0
    sup_ok = True
    for i in range(1, 2 * m.dim + 1):
        g = m.separating_measure(a, b, i)
        for r in (2.0, 3.0):
            worst = max(worst, abs(m.separating_measure(r * a, r * b, i) - r * g))
            sup_ok &= m.separating_measure(a, r * b, i) >= r * g - 1e-9
    ok = worst <= 1e-9 * max(1.0, L) and sup_ok
    return _hard("separating measure", ok, f"L(a,b)={L:.6g}, homothety error {worst:.1e}, superlinear={sup_ok}")


def _traj_task(i, rng, m, b, t):
    mon = stit.ZetaMonitor()
    st = stit.simulate(m, Window(b, m.dim), t, rng, observers=[mon])
    stit.check_invariants(st)
    return mon.jumps


def check_trajectories(m, b, t, n, seed, threads) -> CheckResult:
    try:
        jumps = run_replicates(_traj_task, n, seed, threads=threads, args=(m, b, t))
    except stit.InvariantViolation as e:
        return _hard("zeta monotone + volume conserved", False, str(e))
    return _hard("zeta monotone + volume conserved", True, f"{n} trajectories, {sum(jumps)} jumps")


def check_no_jump_closed_form(m, a, t, s) -> CheckResult:
    r = stit.chi_no_jump_case(m, Window(a, m.dim), t, s)
    return _hard("no-jump case closed form", r.chain_holds(),
                 f"({r.chi_t:.6g}, {r.chi_t_minus_s:.6g}, {r.ratio:.6g})")


def check_birth_moment(m, a, t) -> CheckResult:
    q = m.lambda_hit(Window(a, m.dim).polytope())
    v = mixing.birth_chain_moment(q, t, 1)
    e = math.exp(q * t)
    return _hard("birth chain first moment", abs(v - e) <= 1e-10 * e, f"{v:.12g} vs e^(qt)={e:.12g}")


# -- SOFT --------------------------------------------------------------------


def _first_division_task(i, rng, m, a, t):
    st = stit.simulate(m, Window(a, m.dim), t, rng)
    return len(st.jump_log) == 0


def check_no_division(m, a, t, n, seed, threads) -> CheckResult:
    p0 = math.exp(-t * m.lambda_hit(Window(a, m.dim).polytope()))

    def run(n_, seed_):
        k = sum(run_replicates(_first_division_task, n_, seed_, threads=threads, args=(m, a, t)))
        z = (k / n_ - p0) / math.sqrt(p0 * (1 - p0) / n_)
        return k / n_, z, n_

    p, z, used = run(n, seed)
    retried = abs(z) > 3
    if retried:
        p, z, used = run(2 * n, seed + 1_000_003)
    st = PASS if abs(z) <= 3 else FAIL
    return CheckResult("no division by t", SOFT, st,
                       f"{p:.5f} vs {p0:.5f} (z={z:+.2f}, N={used}{', retried' if retried else ''})")


def _ks_check(name, run, n, seed) -> CheckResult:
    rows, retried = soft_check(run, n, seed)
    worst = min(rows, key=lambda r: r.p)
    ok = all(r.passed for r in rows)
    detail = f"min p={worst.p:.3g} ({worst.test}/{worst.statistic}), N={worst.n}"
    return CheckResult(name, SOFT, PASS if ok else FAIL, detail + (", retried" if retried else ""))


def check_encapsulation(m, a, b, s, n, seed, threads) -> CheckResult:
    bound = stit.encapsulation_lower_bound(m, a, b, s)

    def run(n_, seed_):
        ev = run_replicates(_encaps_task, n_, seed_, threads=threads, args=(m, a, b, s))
        p = float(np.mean(ev))
        return p, math.sqrt(max(p * (1 - p), 1e-300) / n_), n_

    p, se, used = run(n, seed)
    retried = p < bound - 3 * se
    if retried:
        p, se, used = run(2 * n, seed + 1_000_003)
    ok = p >= bound - 3 * se
    return CheckResult("encapsulation lower bound", SOFT, PASS if ok else FAIL,
                       f"{p:.5f} +- {se:.5f} vs bound {bound:.6f}, N={used}{', retried' if retried else ''}")


def _encaps_task(i, rng, m, a, b, s):
    return stit.detect_encapsulation(m, a, b, s, rng).event


def check_no_jump_mc(m, a, t, s, n, seed, threads) -> CheckResult:
    def run(n_, seed_):
        return stit.chi_no_jump_case(m, Window(a, m.dim), t, s, n=n_, seed=seed_, threads=threads)

    r = run(n, seed)
    retried = not all(r.within())
    if retried:
        r = run(2 * n, seed + 1_000_003)
    ok = all(r.within())
    mc = ", ".join(f"{x:.4g}" for x in r.mc)
    return CheckResult("no-jump case Monte Carlo", SOFT, PASS if ok else FAIL,
                       f"MC ({mc}) N={r.n}{', retried' if retried else ''}")


def check_domination(m, a, t, n, seed, threads) -> CheckResult:
    q = m.lambda_hit(Window(a, m.dim).polytope())

    def run(n_, seed_):
        z = mixing.zeta_samples(m, a, t, n_, seed_, threads) / q
        worst = -math.inf
        for M in np.linspace(1.0, max(2.0, float(z.max())) + 1, 12):
            p = mixing.empirical_tail(z, M)
            se = math.sqrt(max(p * (1 - p), 1e-300) / n_)
            worst = max(worst, (p - mixing.birth_chain_tail(q, t, M)) / max(se, 1e-12))
        return worst

    w = run(n, seed)
    retried = w > 3
    if retried:
        w = run(2 * n, seed + 1_000_003)
    return CheckResult("birth chain domination", SOFT, PASS if w <= 3 else FAIL,
                       f"max excess {w:+.2f} sigma{', retried' if retried else ''}")


# ------------------------------------------------------------------------------


def run_battery(cfg, measure: HyperplaneMeasure | None = None) -> list[CheckResult]:
    m = measure if measure is not None else cfg.measure.build(strict=False)
    a, b, t, s = cfg.a, cfg.b, cfg.t, cfg.s
    n, seed, th = cfg.replicates, cfg.seed, cfg.threads
    res = [check_theta(m)]
    if res[0].status == FAIL:
        return res
    res += [check_hitting(m), check_separating(m, a, b)]
    res.append(check_trajectories(m, b, t, min(n, 1000), seed, th))
    res += [check_no_jump_closed_form(m, a, t, s), check_birth_moment(m, a, t)]
    statistical = [
        ("no division by t", lambda: check_no_division(m, a, t, n, seed + 11, th)),
        ("encapsulation lower bound", lambda: check_encapsulation(m, a, b, s, n, seed + 12, th)),
        ("no-jump case Monte Carlo", lambda: check_no_jump_mc(m, a, t, s, n, seed + 13, th)),
        ("birth chain domination", lambda: check_domination(m, a, t, n, seed + 14, th)),
    ]
    if m.dim == 2:
        statistical += [
            ("consistency KS", lambda: _ks_check(
                "consistency KS", lambda n_, s_: nesting.consistency_test(m, a, b, t, n_, s_, th), n, seed + 15)),
            ("STIT property KS", lambda: _ks_check(
                "STIT property KS", lambda n_, s_: nesting.stit_property_test(m, a, t, n_, s, s_, th), n, seed + 16)),
        ]
    for name, fn in statistical:
        if n < MIN_KS_SAMPLES:
            res.append(CheckResult(name, SOFT, SKIPPED, f"N={n} < {MIN_KS_SAMPLES}"))
        else:
            res.append(fn())
    return res

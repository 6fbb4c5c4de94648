"""Exit criteria at full sample sizes.

Run with ``pytest -m acceptance -s``; each test prints one PASS/FAIL line and
the lines are collected again in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

import conftest
from stitmix import mixing, nesting, stit, verify
from stitmix.geometry import Polygon, Window, box, separates
from stitmix.measure import HyperplaneMeasure
from stitmix.replicate import run_replicates
from stitmix.stats import soft_check

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

AXIS = HyperplaneMeasure.axis_parallel()
ISO = HyperplaneMeasure.isotropic()
MODELS = {"axis": AXIS, "isotropic": ISO}


def record(k, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        ok = ok and elapsed < limit
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    if elapsed is not None:
        line += f" [{elapsed:.1f} s" + (f" < {limit:.0f} s]" if limit else "]")
    conftest.ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, line


def test_criterion_01_hitting_exactness():
    t0 = time.perf_counter()
    bodies = {"square": box([0, 0], [1, 1]), "rectangle": box([-1, 0], [2, 0.5]),
              "triangle": Polygon([(0, 0), (1, 0), (0, 1)])}
    iso_err = max(abs(ISO.lambda_hit(K) - K.perimeter) / K.perimeter for K in bodies.values())
    axis_err = max(abs(AXIS.lambda_hit(box([0, 0], [w, h])) - (w + h))
                   for w, h in [(1, 1), (3, 0.5), (0.2, 7), (10, 0.1)])
    ok = iso_err <= 1e-9 and axis_err <= 1e-12
    record(1, ok, f"isotropic rel err {iso_err:.1e}, axis abs err {axis_err:.1e}",
           time.perf_counter() - t0, 1.0)


def test_criterion_02_separating_identities():
    t0 = time.perf_counter()
    hom, sup = 0.0, 0.0
    multi = 0
    for m in MODELS.values():
        for i in range(1, 5):
            g = m.separating_measure(1.0, 2.0, i)
            for r in (2.0, 3.0, 10.0):
                hom = max(hom, abs(m.separating_measure(r, 2 * r, i) - r * g))
                sup = max(sup, r * g - 1e-9 - m.separating_measure(1.0, 2 * r, i))
        rng = np.random.default_rng(2)
        Wp, W = Window(1.0), Window(2.0)
        K = W.polytope()
        for _ in range(10_000):
            h = m.sample_conditional(K, rng)
            multi += sum(separates(h, Wp.facet(i), W.facet(i)) for i in range(1, 5)) > 1
    ok = hom <= 1e-9 and sup <= 0 and multi == 0
    record(2, ok, f"homothety err {hom:.1e}, superlinearity slack {-sup:.3g}, "
                  f"{multi} of 2x10^4 hyperplanes in several G_i", time.perf_counter() - t0, 10.0)


class _StopWhenHit(mixing.ProbeTracker):
    def on_jump(self, state, jump):
        super().on_jump(state, jump)
        if self.hit[0]:
            raise stit.StopSimulation


def _intact_task(i, rng, m, a, b, t):
    tr = _StopWhenHit([((-a, -a), (a, a))])
    stit.simulate(m, Window(b), t, rng, observers=[tr])
    return not tr.hit[0]


def test_criterion_03_exponential_lifetime():
    t0 = time.perf_counter()
    a, b, t, n = 1.0, 2.0, 0.25, 100_000
    parts, ok = [], True
    for name, m in MODELS.items():
        p0 = math.exp(-t * m.lambda_hit(Window(a).polytope()))

        def z_of(n_, seed_):
            p = sum(run_replicates(_intact_task, n_, seed_, args=(m, a, b, t))) / n_
            return p, (p - p0) / math.sqrt(p0 * (1 - p0) / n_)

        p, z = z_of(n, 31)
        if abs(z) > 3:
            p, z = z_of(2 * n, 31 + 1_000_003)
        ok &= abs(z) <= 3
        parts.append(f"{name} {p:.5f} vs {p0:.5f} (z={z:+.2f})")
    record(3, ok, "; ".join(parts), time.perf_counter() - t0, 120.0)


def test_criterion_04_zeta_and_volume_invariants():
    t0 = time.perf_counter()
    res = [verify.check_trajectories(m, 4.0, 0.5, 1000, 41, 1) for m in MODELS.values()]
    ok = all(r.status == verify.PASS for r in res)
    record(4, ok, "; ".join(f"{n}: {r.detail}" for n, r in zip(MODELS, res)), time.perf_counter() - t0)


def _ks_line(rows):
    worst = min(rows, key=lambda r: r.p)
    return f"min p={worst.p:.3g} ({worst.test}/{worst.statistic})"


def test_criterion_05_consistency():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, m in MODELS.items():
        rows, retried = soft_check(lambda n, s: nesting.consistency_test(m, 1.0, 4.0, 0.5, n, s), 2000, 51)
        ok &= all(r.passed for r in rows)
        parts.append(f"{name} {_ks_line(rows)}{' retried' if retried else ''}")
    record(5, ok, "; ".join(parts) + ", N=2000", time.perf_counter() - t0)


def test_criterion_06_stit_property():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, m in MODELS.items():
        rows, retried = soft_check(
            lambda n, s: nesting.stit_property_test(m, 1.0, 0.5, n, s=0.25, seed=s), 2000, 61)
        ok &= all(r.passed for r in rows)
        parts.append(f"{name} {_ks_line(rows)}{' retried' if retried else ''}")
    record(6, ok, "; ".join(parts) + ", N=2000", time.perf_counter() - t0, 600.0)


def test_criterion_07_encapsulation_bound():
    t0 = time.perf_counter()
    bound = stit.encapsulation_lower_bound(AXIS, 1.0, 4.0, 1.0)
    res = [verify.check_encapsulation(AXIS, 1.0, 4.0, 1.0, 100_000, 71, 1),
           verify.check_encapsulation(ISO, 1.0, 4.0, 0.5, 100_000, 72, 1)]
    ok = all(r.status == verify.PASS for r in res) and abs(bound - 0.014931) < 1e-6
    record(7, ok, f"axis s=1: {res[0].detail}; isotropic s=0.5: {res[1].detail}",
           time.perf_counter() - t0, 300.0)


def test_criterion_08_no_jump_case():
    t0 = time.perf_counter()
    closed = verify.check_no_jump_closed_form(AXIS, 1.0, 1.0, 0.1)
    mc = verify.check_no_jump_mc(AXIS, 1.0, 0.3, 0.1, 100_000, 81, 1)
    ok = closed.status == verify.PASS and mc.status == verify.PASS
    record(8, ok, f"closed form {closed.detail}; {mc.detail}", time.perf_counter() - t0)


def test_criterion_09_birth_chain():
    t0 = time.perf_counter()
    res = [verify.check_domination(m, 1.0, 0.4, 10_000, 91, 1) for m in MODELS.values()]
    moment_err = max(abs(mixing.birth_chain_moment(q, t, 1) - math.exp(q * t)) / math.exp(q * t)
                     for q in (4.0, 2 * math.pi * 4 / (2 * math.pi), 8.0) for t in (0.1, 0.5, 1.0))
    ok = all(r.status == verify.PASS for r in res) and moment_err <= 1e-10
    record(9, ok, "; ".join(f"{n}: {r.detail}" for n, r in zip(MODELS, res))
           + f"; first moment rel err {moment_err:.1e}", time.perf_counter() - t0)


def test_criterion_10_decay():
    t0 = time.perf_counter()
    res = mixing.decay_experiment(AXIS, 1.0, 0.5, [4, 8, 16, 32, 64], 10_000, seed=101)
    elapsed = time.perf_counter() - t0
    for r in res.rows:
        print(f"  b={r.b:g}: beta_hat={r.beta_hat:.4f}+-{r.beta_stderr:.4f} bound={r.bound:.4g} "
              f"(raw {r.bound_raw:.4g}, s={r.s:.3g}, M={r.M:.3g}, L={r.L:.3g}) free raw={r.free_bound_raw:.4g}")
    checks = {
        "nonincreasing": res.bound_nonincreasing(),
        "slope<=-0.5": res.slope_bound <= -0.5,
        "beta<=bound+3se": res.beta_below_bound(),
        "rho<0": res.spearman_rho < 0,
    }
    detail = (", ".join(f"{k}={v}" for k, v in checks.items())
              + f"; slope {res.slope_bound:.3f} (raw {res.slope_raw:.3f}, free raw {res.slope_free_raw:.3f}),"
              f" rho {res.spearman_rho:.3f}")
    record(10, all(checks.values()), detail, elapsed, 1800.0)

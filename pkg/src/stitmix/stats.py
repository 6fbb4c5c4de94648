"""Two-sample comparisons used by the verification battery."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

ALPHA = 0.01
# below this many samples per side the KS tests are reported as skipped
MIN_KS_SAMPLES = 200


@dataclass
class KSRow:
    test: str
    statistic: str
    d: float
    p: float
    n: int

    @property
    def passed(self) -> bool:
        return self.p > ALPHA

    def as_dict(self) -> dict:
        return asdict(self)


def ks_rows(test: str, x: dict, y: dict) -> list[KSRow]:
    """KS test per shared key of two dicts of sample arrays."""
    rows = []
    for key in x:
        a, b = np.asarray(x[key], float), np.asarray(y[key], float)
        res = stats.ks_2samp(a, b)
        rows.append(KSRow(test, key, float(res.statistic), float(res.pvalue), min(len(a), len(b))))
    return rows


def soft_check(run: Callable[[int, int], list[KSRow]], n: int, seed: int) -> tuple[list[KSRow], bool]:
    """Run ``run(n, seed)``; if any row fails, retry once at ``2n`` with a fresh seed.

    Returns the rows of the last attempt and whether a retry was needed.
    """
    rows = run(n, seed)
    if all(r.passed for r in rows):
        return rows, False
    return run(2 * n, seed + 1_000_003), True


def binomial_z(successes: int, n: int, p0: float) -> tuple[float, float]:
    """Observed proportion and its z-score against ``p0`` (null standard error)."""
    p = successes / n
    se = np.sqrt(p0 * (1 - p0) / n)
    return p, (p - p0) / se

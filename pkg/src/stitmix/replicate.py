"""Reproducible replicate streams and a small parallel map.

Replicate ``i`` of a run with master seed ``seed`` always draws from
``Generator(Philox(SeedSequence(seed, spawn_key=(i,))))``, so results do not
depend on the number of workers or on scheduling order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _run_chunk(task, seed, lo, hi, args):
    return [task(i, replicate_rng(seed, i), *args) for i in range(lo, hi)]


def run_replicates(task: Callable, n: int, seed: int, *, threads: int = 1,
                   args: Sequence = (), chunk: int | None = None) -> list:
    """Evaluate ``task(i, rng_i, *args)`` for ``i < n`` and return results in index order.

    ``task`` must be a module-level function when ``threads > 1``.
    """
    if n <= 0:
        return []
    threads = max(1, min(threads or 1, os.cpu_count() or 1))
    if threads == 1:
        return _run_chunk(task, seed, 0, n, tuple(args))
    chunk = chunk or max(1, -(-n // (4 * threads)))
    bounds = [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]
    out: list = []
    with ProcessPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(_run_chunk, task, seed, lo, hi, tuple(args)) for lo, hi in bounds]
        for f in futures:
            out.extend(f.result())
    return out

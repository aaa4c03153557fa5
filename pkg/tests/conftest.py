"""Shared independent oracles for the test suite.

Everything here deliberately avoids the package's own computational routes:
first-passage laws come from exhaustive path enumeration, return-time
probabilities from the Catalan closed form, and partition functions from
direct path sums, so the tests cross-examine the implementation instead of
mirroring it.
"""

import math

import numpy as np
import pytest


def enumerate_first_passage(spacing, n_max):
    """(stay, hop) first-passage pmf arrays from all 2^n_max signed paths.

    Entry ``n`` is the probability that the walk first touches the grid
    ``spacing * Z`` at step ``n``, split by returning to the start (stay) or
    reaching one neighbouring interface (hop; one sign only).
    """
    paths = 1 << n_max
    codes = np.arange(paths, dtype=np.uint32)
    bits = np.arange(n_max, dtype=np.uint32)
    steps = (((codes[:, None] >> bits) & 1).astype(np.int64)) * 2 - 1
    heights = np.cumsum(steps, axis=1)
    on_grid = heights % spacing == 0
    hit_any = on_grid.any(axis=1)
    first = np.where(hit_any, on_grid.argmax(axis=1), n_max)
    stay = np.zeros(n_max + 1)
    hop = np.zeros(n_max + 1)
    rows = np.flatnonzero(hit_any)
    landing = heights[rows, first[rows]]
    for row, t, h in zip(rows, first[rows], landing):
        if h == 0:
            stay[t + 1] += 1.0
        elif h == spacing:  # count one sign; the other is symmetric
            hop[t + 1] += 1.0
    return stay / paths, hop / paths


def catalan_return_pmf(n) -> float:
    """P(first return to 0 of the simple walk is at step n), closed form."""
    if n < 2 or n % 2:
        return 0.0
    k = n // 2
    return math.comb(2 * k, k) / (2 * k - 1) / 4.0**k


def single_interface_rate(delta) -> float:
    """Free energy of the single-interface model solved by bisection on the
    closed first-return transform (independent of the package's route)."""
    if delta <= 0:
        return 0.0
    target = math.exp(-delta)
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 1.0 - math.sqrt(1.0 - math.exp(-2.0 * mid)) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def four_spacing_rate(delta) -> float:
    """Free energy at spacing 4 from the exact algebraic reduction
    (the degree-4 transform collapses to 1 - 2 s^2/(1 + s^2))."""
    return -0.5 * math.log(2.0 * math.exp(-delta) / (1.0 + math.exp(-delta)))


def path_sum_partition(length, delta, spacing, constrained=False) -> float:
    """Plain-python partition function by direct path summation (no numpy)."""
    total = 0.0
    for code in range(1 << length):
        h = 0
        weight = 1.0
        for i in range(length):
            h += 1 if (code >> i) & 1 else -1
            if h % spacing == 0:
                weight *= math.exp(delta)
        if constrained and h % spacing != 0:
            continue
        total += weight
    return total / (1 << length)


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)

"""Shared test utilities."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from manovaboot.design import between, layout
from manovaboot.inference import GroupedDataset


def exact_rank(rows) -> int:
    """Rank by Gaussian elimination over the rationals."""
    m = [[Fraction(x) for x in row] for row in rows]
    rank, ncols = 0, len(m[0]) if m else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / m[rank][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def random_dataset(rng: np.random.Generator, sizes, p, scale_spread=True) -> GroupedDataset:
    groups = []
    for i, n in enumerate(sizes):
        a = rng.standard_normal((p, p))
        if scale_spread:
            a *= rng.uniform(0.2, 3.0)
        groups.append(rng.standard_normal((n, p)) @ a.T + rng.normal(0, 1, p))
    return GroupedDataset(groups)


def random_layout(rng: np.random.Generator, max_d=6, max_p=6):
    """Random crossed between layout with d <= max_d cells and p <= max_p."""
    while True:
        k = int(rng.integers(1, 3))
        levels = [int(rng.integers(2, 4)) for _ in range(k)]
        if np.prod(levels) <= max_d:
            break
    p = int(rng.integers(1, max_p + 1))
    factors = [between(chr(ord("A") + i), lv) for i, lv in enumerate(levels)]
    return layout(*factors, p=p)


def brute_force_closure(elementary, groups, pvalue, alpha):
    """Closed testing by enumerating every nonempty subfamily.

    ``pvalue`` maps a partition (as returned by ``join``) to its p-value.
    Returns {hypothesis: (rejected, adjusted_p)}.
    """
    from itertools import combinations

    from manovaboot.multiplicity import join

    elementary = [frozenset(h) for h in elementary]
    out = {}
    for h in elementary:
        worst = 0.0
        for k in range(1, len(elementary) + 1):
            for sub in combinations(elementary, k):
                if h in sub:
                    worst = max(worst, pvalue(join(sub, tuple(groups))))
        out[h] = (worst <= alpha, worst)
    return out

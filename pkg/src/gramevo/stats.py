"""Two-sided Mann-Whitney U test for comparing result samples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist, median

EXACT_LIMIT = 20


@dataclass(frozen=True)
class ComparisonResult:
    u_statistic: float
    p_value: float
    medians: tuple[float, float]
    n_samples: tuple[int, int]
    method: str


def midranks(values):
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def u_statistic(a, b) -> float:
    ranks = midranks(list(a) + list(b))
    n = len(a)
    return sum(ranks[:n]) - n * (n + 1) / 2.0


def _exact_p(ranks, n, u):
    # Count, for every n-subset of the pooled midranks, its doubled rank sum
    # (integral even with ties) and compare its U distance from the centre.
    doubled = [int(round(2 * r)) for r in ranks]
    ways = [dict() for _ in range(n + 1)]
    ways[0][0] = 1
    for r in doubled:
        for k in range(n - 1, -1, -1):
            for s, c in ways[k].items():
                ways[k + 1][s + r] = ways[k + 1].get(s + r, 0) + c
    m = len(ranks) - n
    centre2 = n * m  # doubled centre of U
    offset2 = n * (n + 1)  # doubled n(n+1)/2
    observed = abs(int(round(2 * u)) - centre2)
    total = extreme = 0
    for s, c in ways[n].items():
        total += c
        if abs((s - offset2) - centre2) >= observed:
            extreme += c
    return extreme / total


def _normal_p(ranks, n, m, u):
    N = n + m
    ties = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    tie_term = sum(t**3 - t for t in ties.values()) / (N * (N - 1))
    var = n * m / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return 1.0
    dist = max(abs(u - n * m / 2.0) - 0.5, 0.0)
    return min(1.0, 2.0 * (1.0 - NormalDist().cdf(dist / math.sqrt(var))))


def mann_whitney_u(a, b, method=None) -> ComparisonResult:
    """U of ``a`` against ``b`` and the two-sided p-value.

    Exact permutation distribution when the pooled size is at most 20,
    normal approximation with tie and continuity correction otherwise.
    ``method`` ("exact" or "normal") overrides the choice.
    """
    a, b = [float(x) for x in a], [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n, m = len(a), len(b)
    ranks = midranks(a + b)
    u = sum(ranks[:n]) - n * (n + 1) / 2.0
    if method is None:
        method = "exact" if n + m <= EXACT_LIMIT else "normal"
    if method == "exact":
        p = _exact_p(ranks, n, u)
    elif method == "normal":
        p = _normal_p(ranks, n, m, u)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ComparisonResult(u, min(1.0, p), (median(a), median(b)), (n, m), method)

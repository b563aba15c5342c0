import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from gramevo.stats import mann_whitney_u, midranks, u_statistic


def brute_force(a, b):
    """U by pairwise counting and exact p by enumerating every rank assignment."""
    u = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)
    pooled = list(a) + list(b)
    ranks = midranks(pooled)
    n, m = len(a), len(b)
    centre = Fraction(n * m, 2)
    observed = abs(Fraction(u) - centre)
    total = extreme = 0
    for subset in itertools.combinations(range(n + m), n):
        s = sum(Fraction(ranks[i]) for i in subset) - Fraction(n * (n + 1), 2)
        total += 1
        extreme += abs(s - centre) >= observed
    return u, extreme / total


def test_midranks_with_ties():
    assert midranks([3, 1, 3, 2]) == [3.5, 1.0, 3.5, 2.0]


def test_identical_samples():
    a = [0.3, 0.1, 0.7, 0.2]
    r = mann_whitney_u(a, a)
    assert r.u_statistic == 8.0
    assert r.p_value == 1.0


def test_complete_separation():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.u_statistic == 0.0
    assert r.p_value == pytest.approx(0.1, abs=1e-12)  # 2 of 20 assignments
    assert mann_whitney_u([4, 5, 6], [1, 2, 3]).u_statistic == 9.0


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("m", range(1, 7))
def test_exact_matches_brute_force(n, m):
    rng = np.random.default_rng(100 * n + m)
    for trial in range(5):
        if trial < 2:
            a, b = rng.normal(size=n), rng.normal(size=m)
        else:
            # coarse values force ties within and across samples
            a, b = rng.integers(0, 4, n).astype(float), rng.integers(0, 4, m).astype(float)
        u, p = brute_force(a, b)
        r = mann_whitney_u(a, b)
        assert r.method == "exact"
        assert r.u_statistic == u
        assert abs(r.p_value - p) <= 1e-12
        assert 0 <= r.u_statistic <= n * m and 0 < r.p_value <= 1


def test_normal_matches_reference_implementation():
    rng = np.random.default_rng(30)
    a = rng.normal(0.0, 1.0, 30)
    b = rng.normal(0.6, 1.0, 30)
    r = mann_whitney_u(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert r.method == "normal"
    assert r.u_statistic == ref.statistic
    assert r.p_value == pytest.approx(ref.pvalue, abs=1e-6)


def test_normal_matches_reference_with_ties():
    rng = np.random.default_rng(31)
    a, b = rng.integers(0, 6, 30).astype(float), rng.integers(1, 7, 30).astype(float)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert mann_whitney_u(a, b).p_value == pytest.approx(ref.pvalue, abs=1e-6)


def test_exact_and_normal_agree_at_twenty():
    rng = np.random.default_rng(20)
    for shift in (0.0, 0.3, 0.7, 1.2):
        a, b = rng.normal(0, 1, 20), rng.normal(shift, 1, 20)
        exact = mann_whitney_u(a, b, method="exact").p_value
        normal = mann_whitney_u(a, b, method="normal").p_value
        assert abs(exact - normal) <= 0.02


def test_u_statistic_helper():
    assert u_statistic([1, 2], [1.5]) == 1.0


def test_empty_sample():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ValueError):
        mann_whitney_u([1.0], [1.0], method="bogus")

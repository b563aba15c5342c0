import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gramevo.grammar import parse_bnf
from gramevo.mapping import map_genotype, random_individual_genotype

from conftest import FIG3A, FIG3B, StubRng


def test_hand_derivation(fig3a):
    genotype = {"start": [0.0], "expr": [0.9], "var": [0.9]}
    rng = StubRng()
    d, trimmed = map_genotype(genotype, fig3a, 10, rng)
    assert d.phenotype == "x[0]"
    # start(1) -> expr(2) -> var(3) -> x[0](4)
    assert d.depth == 4
    assert d.counts["expr"] == [0, 0, 1]
    assert d.counts["var"] == [0, 1]
    assert d.consumed == {"start": 1, "expr": 1, "op": 0, "pre_op": 0, "var": 1}
    assert trimmed == {"start": [0.0], "expr": [0.9], "op": [], "pre_op": [], "var": [0.9]}
    assert rng.calls == 0


def test_binary_derivation_builds_tree(fig3a):
    # expr: rule0 (binary), then var, var ; op 0.3 -> '-'
    genotype = {"start": [0.5], "expr": [0.1, 0.9, 0.9], "op": [0.3], "var": [0.9, 0.2]}
    d, _ = map_genotype(genotype, fig3a, 10)
    assert d.phenotype == "x[0] - 1.0"
    assert d.expression == "(x[0] - 1.0)"
    assert d.depth == 5


def test_surplus_codons_are_trimmed(fig3a):
    genotype = {"start": [0.0, 0.4], "expr": [0.9, 0.1, 0.1], "var": [0.9, 0.9], "op": [0.3]}
    d, trimmed = map_genotype(genotype, fig3a, 10)
    assert trimmed["expr"] == [0.9] and trimmed["op"] == []
    again, _ = map_genotype(trimmed, fig3a, 10)
    assert again == d


def test_missing_codons_without_rng(fig3a):
    with pytest.raises(ValueError):
        map_genotype({}, fig3a, 10)


def test_max_depth_one_forces_consolidation(fig3a):
    rng = np.random.default_rng(0)
    for _ in range(200):
        d, _ = map_genotype({}, fig3a, 1, rng)
        assert d.counts["expr"][0] == d.counts["expr"][1] == 0
        assert d.phenotype in {"1.0", "x[0]"}


def test_stub_rng_zero_picks_first_rules(fig3a):
    genotype = random_individual_genotype(fig3a, 9, StubRng(randoms=(0.0,)))
    assert all(c == 0.0 for codons in genotype.values() for c in codons)
    d, _ = map_genotype(genotype, fig3a, 9)
    # codon 0 selects rule 0 everywhere; expr recursion stops where the budget ends
    assert d.counts["op"] == [sum(d.counts["op"]), 0, 0, 0]
    assert d.counts["var"] == [d.consumed["var"], 0]
    assert d.counts["expr"][1] == 0 and d.counts["expr"][0] > 0
    assert set(d.phenotype.split()) == {"1.0", "+"}
    assert d.depth == 9


def test_mapping_is_deterministic(fig3a):
    genotype = random_individual_genotype(fig3a, 9, np.random.default_rng(3))
    a, _ = map_genotype(genotype, fig3a, 9)
    b, _ = map_genotype(genotype, fig3a, 9)
    assert a == b


@pytest.mark.parametrize("text", [FIG3A, FIG3B])
def test_depth_bound_and_counts(text):
    g = parse_bnf(text, n_features=2)
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        genotype = random_individual_genotype(g, 9, rng)
        d, trimmed = map_genotype(genotype, g, 9)
        assert d.depth <= 9
        assert {n: len(c) for n, c in trimmed.items()} == d.consumed
        assert all(sum(d.counts[n]) == d.consumed[n] for n in g.names)


def test_depth_never_exceeds_limit_above_minimum(fig3a):
    rng = np.random.default_rng(2)
    for limit in range(fig3a.min_depth, 14):
        depths = [map_genotype({}, fig3a, limit, rng)[0].depth for _ in range(300)]
        assert max(depths) <= limit
        assert max(depths) == limit  # the limit is actually reached


def test_concentrated_probabilities_fix_the_phenotype(fig3a):
    g = fig3a.with_probabilities({
        "expr": [0.0, 1.0, 0.0], "op": [1, 0, 0, 0], "pre_op": [0, 0, 0, 1.0], "var": [0.0, 1.0],
    })
    rng = np.random.default_rng(0)
    phenos = {map_genotype({}, g, 7, rng)[0].phenotype for _ in range(200)}
    # expr recurses at depths 2, 3, 4; expr(5) -> var(6) -> x[0](7)
    assert phenos == {"square ( square ( square ( x[0] ) ) )"}


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12))
def test_trimmed_genotype_remaps_without_rng(seed, limit):
    g = parse_bnf(FIG3B)
    d, trimmed = map_genotype({}, g, limit, np.random.default_rng(seed))
    rng = StubRng()
    again, same = map_genotype(trimmed, g, limit, rng)
    assert rng.calls == 0
    assert again.phenotype == d.phenotype and same == trimmed
    tokens = [t for t in d.phenotype.split() if t not in "()"]
    rendered = d.expression.replace("(", " ").replace(")", " ").split()
    assert tokens == rendered

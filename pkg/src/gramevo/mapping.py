"""Float-codon genotypes and their depth-limited mapping to phenotypes."""
from __future__ import annotations

from dataclasses import dataclass, field

from .expression import combine, leaf, render_tree
from .grammar import Grammar, rule_for_codon

Genotype = dict[str, list[float]]


@dataclass
class Derivation:
    phenotype: str
    tree: object
    depth: int
    counts: dict[str, list[int]]
    consumed: dict[str, int] = field(default_factory=dict)

    @property
    def expression(self) -> str:
        return render_tree(self.tree) if self.tree is not None else self.phenotype


def map_genotype(genotype: Genotype, grammar: Grammar, max_depth: int, rng=None):
    """Derive a phenotype from ``genotype``.

    Leftmost depth-first expansion from the start symbol.  Each expansion of a
    non-terminal consumes the next codon of that non-terminal's list; when a
    list runs out a fresh codon is drawn with ``rng.random()``.  Returns the
    derivation and a new genotype holding exactly the consumed codons.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    used = {n: 0 for n in grammar.names}
    lists = {n: list(genotype.get(n, ())) for n in grammar.names}
    counts = {n: [0] * len(grammar.rules[n]) for n in grammar.names}
    terminals: list[str] = []
    deepest = 0

    def expand(name, depth):
        nonlocal deepest
        deepest = max(deepest, depth)
        codons = lists[name]
        pos = used[name]
        if pos == len(codons):
            if rng is None:
                raise ValueError(f"genotype too short for <{name}> and no rng given")
            codons.append(float(rng.random()))
        used[name] = pos + 1
        allow = grammar.allows_recursion(name, depth, max_depth)
        j = rule_for_codon(grammar, name, codons[pos], allow)
        counts[name][j] += 1
        items = []
        for sym in grammar.rules[name][j].body:
            if sym.terminal:
                deepest = max(deepest, depth + 1)
                terminals.append(sym.text)
                items.append(leaf(sym.text))
            else:
                items.append(expand(sym.text, depth + 1))
        return combine(items)

    tree = expand(grammar.start, 1)
    if isinstance(tree, str):
        # a bare operator token is not an evaluable expression
        tree = None
    trimmed = {n: lists[n][: used[n]] for n in grammar.names}
    result = Derivation(" ".join(terminals), tree, deepest, counts, dict(used))
    return result, trimmed


def random_individual_genotype(grammar: Grammar, max_depth: int, rng) -> Genotype:
    return map_genotype({}, grammar, max_depth, rng)[1]

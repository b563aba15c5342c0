"""Probabilistic structured grammatical evolution with adaptive facilitated mutation."""
from .grammar import (
    Grammar,
    GrammarError,
    GroupingSpec,
    Rule,
    Symbol,
    apply_function_grouping,
    enumerate_language,
    normalize_check,
    parse_bnf,
    parse_grouping,
    render,
    rule_for_codon,
)
from .mapping import Derivation, map_genotype, random_individual_genotype
from .expression import eval_tree, evaluate, render_tree
from .evolution import (
    EvolutionConfig,
    Individual,
    RunLog,
    crossover,
    evolve,
    facilitated_mutate,
    perturb_mutation_arrays,
    tournament_select,
    update_pcfg,
)
from .benchmarks import Dataset, load_csv, make_pagie, make_quartic, rmse
from .stats import ComparisonResult, mann_whitney_u

__version__ = "0.1.0"

"""Generational loop: PSGE with Adaptive Facilitated Mutation.

Every individual carries one mutation rate per non-terminal.  Codons of a
non-terminal mutate at that non-terminal's rate, offspring inherit the
rates of their fitter parent, and all rates drift each generation by
Gaussian noise (clamped to [0, 1]).  Rule probabilities of the grammar are
pulled towards the rule usage of each generation's best individual.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grammar import Grammar
from .mapping import Derivation, Genotype, map_genotype, random_individual_genotype

log = logging.getLogger(__name__)

# rng stream tags; each (seed, tag, generation, index) is an independent stream
_MAP, _VARIATION, _PERTURB = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class EvolutionConfig:
    population_size: int = 100
    generations: int = 50
    tournament_size: int = 3
    elite_size: int = 1
    crossover_probability: float = 0.9
    starting_mutation_probability: float = 0.1
    sigma: float = 0.05
    learning_factor: float = 0.01
    max_depth: int = 9
    seed: int = 0
    worst_fitness: float = 1e10
    adaptive_pcfg: bool = True
    adaptive_mutation: bool = True

    def __post_init__(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.population_size >= 1, "population_size must be >= 1")
        need(self.generations >= 1, "generations must be >= 1")
        need(self.tournament_size >= 1, "tournament_size must be >= 1")
        need(0 <= self.elite_size <= self.population_size,
             "elite_size must lie in [0, population_size]")
        for name in ("crossover_probability", "starting_mutation_probability", "learning_factor"):
            need(0.0 <= getattr(self, name) <= 1.0, f"{name} must lie in [0, 1]")
        need(self.sigma >= 0.0, "sigma must be >= 0")
        need(self.max_depth >= 1, "max_depth must be >= 1")
        need(math.isfinite(self.worst_fitness), "worst_fitness must be finite")
        need(-(2**63) <= self.seed < 2**64, "seed must fit in 64 bits")


@dataclass
class Individual:
    genotype: Genotype
    rates: dict[str, float]
    fitness: float | None = None
    derivation: Derivation | None = None

    def copy(self) -> "Individual":
        return Individual(
            {k: list(v) for k, v in self.genotype.items()},
            dict(self.rates),
            self.fitness,
            self.derivation,
        )


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    best_fitness_test: float
    mean_fitness: float
    best_phenotype: str
    mean_rates: dict[str, float]
    best_rates: dict[str, float]
    probabilities: dict[str, tuple[float, ...]]


@dataclass
class RunLog:
    records: list[GenerationRecord] = field(default_factory=list)


def stream(seed, tag, generation=0, index=0) -> np.random.Generator:
    return np.random.default_rng([seed % 2**64, tag, generation, index])


def _key(pop, i):
    return (pop[i].fitness, i)


def tournament_select(population, tournament_size, rng) -> Individual:
    """Best (lowest fitness) of ``tournament_size`` uniform draws with replacement."""
    picks = rng.integers(0, len(population), size=tournament_size)
    return population[min(picks, key=lambda i: _key(population, int(i)))]


def fitter(a: Individual, b: Individual) -> Individual:
    return b if b.fitness < a.fitness else a


def crossover(a: Individual, b: Individual, rng) -> Individual:
    """Uniform crossover over whole per-non-terminal codon lists."""
    names = list(a.genotype) + [n for n in b.genotype if n not in a.genotype]
    mask = rng.integers(0, 2, size=len(names))
    child = {
        n: list((b if m else a).genotype.get(n, ())) for n, m in zip(names, mask)
    }
    return Individual(child, dict(fitter(a, b).rates))


def facilitated_mutate(ind: Individual, grammar: Grammar, rng) -> Individual:
    """Resample each codon with its non-terminal's mutation rate."""
    genotype = {}
    for name in grammar.names:
        codons = np.array(ind.genotype.get(name, ()), dtype=float)
        hit = rng.random(len(codons)) < ind.rates[name]
        codons[hit] = rng.random(int(hit.sum()))
        genotype[name] = codons.tolist()
    return Individual(genotype, dict(ind.rates))


def perturb_mutation_arrays(population, sigma, rng):
    """Add independent N(0, sigma) noise to every rate, clamped to [0, 1].

    Returns the pre-clamp deltas, one row per individual.
    """
    if not population:
        return np.zeros((0, 0))
    names = list(population[0].rates)
    shape = (len(population), len(names))
    deltas = rng.normal(0.0, sigma, size=shape) if sigma > 0 else np.zeros(shape)
    for ind, row in zip(population, deltas):
        for name, d in zip(names, row):
            ind.rates[name] = min(1.0, max(0.0, ind.rates[name] + float(d)))
    return deltas


def update_pcfg(grammar: Grammar, derivation: Derivation, learning_factor: float) -> Grammar:
    """Move rule probabilities towards the rule usage frequencies in ``derivation``.

    p_j <- (1 - lf) * p_j + lf * c_j / t for every non-terminal expanded
    t > 0 times; untouched non-terminals keep their probabilities.
    """
    probs = {}
    for name, counts in derivation.counts.items():
        if name not in grammar:
            raise ValueError(f"derivation uses unknown non-terminal <{name}>")
        if len(counts) != len(grammar.rules[name]):
            raise ValueError(f"rule count mismatch for <{name}>")
        total = sum(counts)
        if total == 0:
            continue
        probs[name] = [
            (1.0 - learning_factor) * p + learning_factor * c / total
            for p, c in zip(grammar.probabilities(name), counts)
        ]
    return grammar.with_probabilities(probs)


def _record(gen, pop, order, grammar, test_fitness, worst):
    best = pop[order[0]]
    names = grammar.names
    test = float("nan")
    if test_fitness is not None and best.derivation is not None:
        test = _finite(test_fitness(best.derivation), worst)
    return GenerationRecord(
        generation=gen,
        best_fitness=best.fitness,
        best_fitness_test=test,
        mean_fitness=math.fsum(ind.fitness for ind in pop) / len(pop),
        best_phenotype=best.derivation.expression,
        mean_rates={n: math.fsum(ind.rates[n] for ind in pop) / len(pop) for n in names},
        best_rates=dict(best.rates),
        probabilities={n: grammar.probabilities(n) for n in names},
    )


def _finite(value, worst):
    value = float(value)
    return value if math.isfinite(value) else worst


def evolve(
    config: EvolutionConfig,
    grammar: Grammar,
    fitness: Callable[[Derivation], float],
    test_fitness: Callable[[Derivation], float] | None = None,
    on_generation: Callable[[GenerationRecord], None] | None = None,
):
    """Run one evolutionary search; returns ``(run_log, best_individual, final_grammar)``.

    The whole run is determined by ``config.seed``.
    """
    cfg = config
    seed = cfg.seed
    pop = [
        Individual(
            random_individual_genotype(grammar, cfg.max_depth, stream(seed, _MAP, 0, i)),
            {n: cfg.starting_mutation_probability for n in grammar.names},
        )
        for i in range(cfg.population_size)
    ]
    runlog = RunLog()
    best_overall = None

    for gen in range(cfg.generations):
        for i, ind in enumerate(pop):
            if ind.fitness is None:
                ind.derivation, ind.genotype = map_genotype(
                    ind.genotype, grammar, cfg.max_depth, stream(seed, _MAP, gen, i)
                )
                ind.fitness = _finite(fitness(ind.derivation), cfg.worst_fitness)
        order = sorted(range(len(pop)), key=lambda i: _key(pop, i))
        best = pop[order[0]]
        if best_overall is None or best.fitness < best_overall.fitness:
            best_overall = best.copy()
        rec = _record(gen, pop, order, grammar, test_fitness, cfg.worst_fitness)
        runlog.records.append(rec)
        if on_generation:
            on_generation(rec)
        log.debug("gen %d best %.6g %s", gen, rec.best_fitness, rec.best_phenotype)
        if gen == cfg.generations - 1:
            break

        rng = stream(seed, _VARIATION, gen)
        offspring = [pop[i].copy() for i in order[: cfg.elite_size]]
        while len(offspring) < cfg.population_size:
            a = tournament_select(pop, cfg.tournament_size, rng)
            b = tournament_select(pop, cfg.tournament_size, rng)
            if rng.random() < cfg.crossover_probability:
                child = crossover(a, b, rng)
            else:
                child = fitter(a, b).copy()
            offspring.append(facilitated_mutate(child, grammar, rng))
        if cfg.adaptive_mutation:
            perturb_mutation_arrays(offspring, cfg.sigma, stream(seed, _PERTURB, gen))
        if cfg.adaptive_pcfg:
            grammar = update_pcfg(grammar, best.derivation, cfg.learning_factor)
        pop = offspring

    return runlog, best_overall, grammar

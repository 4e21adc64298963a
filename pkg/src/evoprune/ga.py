"""Steady-state genetic algorithm over binary chromosomes.

Each generation draws two parents (negative assortative mating), recombines
them with uniform crossover, optionally flips a single gene per offspring,
evaluates the children, and lets them compete against the two worst
population members. The evaluation counter includes the initial population,
and the loop stops exactly when it reaches the budget.

Randomness is split into named streams derived from the run seed: the GA
stream drives initialization and the operators, while every evaluation gets
its own derived seed, so evaluating children concurrently cannot perturb the
search trajectory. ``EVOPRUNE_THREADS`` caps how many evaluations run at
once (default 1, i.e. sequential).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .encoding import Chromosome, EncodingKind, active_counts, hamming

# spawn-key prefixes of the named RNG streams
_GA_STREAM = 0
_EVAL_STREAM = 1

FitnessFn = Callable[[Chromosome, int], float]


class FitnessError(RuntimeError):
    """A fitness evaluation failed; carries the offending chromosome."""

    def __init__(self, chromosome: Chromosome, eval_index: int, cause: BaseException):
        super().__init__(f"fitness evaluation {eval_index} failed for {chromosome.to_text()}: {cause}")
        self.chromosome = chromosome
        self.eval_index = eval_index


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 30
    max_evals: int = 200
    nam_candidates: int = 3
    p_mut: float = 0.07
    p_one: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.nam_candidates < 1:
            raise ValueError("nam_candidates must be >= 1")
        if not 0.0 <= self.p_mut <= 1.0:
            raise ValueError("p_mut must be in [0, 1]")
        if not 0.0 <= self.p_one <= 1.0:
            raise ValueError("p_one must be in [0, 1]")


@dataclass(frozen=True)
class FitnessRecord:
    """One evaluated chromosome: fitness, gene count, and provenance."""

    chromosome: Chromosome
    fitness: float
    active: int
    eval_index: int
    seed_used: int


def sort_key(record: FitnessRecord):
    """Ascending sort ranks worst to best: fitness, then sparsity, then age."""
    return (record.fitness, -record.active, -record.eval_index)


def compare(a: FitnessRecord, b: FitnessRecord) -> int:
    """-1 if a ranks below b, 1 if above, 0 if equal.

    Higher fitness wins; on an exact fitness tie the record with fewer
    active genes wins; on a full tie the earlier evaluation wins.
    """
    ka, kb = sort_key(a), sort_key(b)
    return (ka > kb) - (ka < kb)


class Population:
    """Fixed-size pool of evaluated chromosomes, kept sorted worst-to-best."""

    def __init__(self, records: Iterable[FitnessRecord]):
        self._records = tuple(sorted(records, key=sort_key))
        if len(self._records) < 2:
            raise ValueError("population needs at least 2 members")

    @property
    def records(self) -> tuple[FitnessRecord, ...]:
        return self._records

    @property
    def best(self) -> FitnessRecord:
        return self._records[-1]

    def __len__(self) -> int:
        return len(self._records)


def eval_seed(run_seed: int, eval_index: int) -> int:
    """Deterministic per-evaluation training seed derived from the run seed."""
    ss = np.random.SeedSequence(entropy=run_seed, spawn_key=(_EVAL_STREAM, eval_index))
    return int(ss.generate_state(1)[0])


def _ga_rng(run_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=run_seed, spawn_key=(_GA_STREAM,)))


class _Evaluator:
    """Applies the fitness function and builds records; optional bitstring cache.

    The cache is only sound for deterministic fitness functions (surrogates);
    trained-network fitness is stochastic and every child must be evaluated,
    so it is off by default. Cached hits still consume budget and appear in
    the history.
    """

    def __init__(self, fitness_fn: FitnessFn, run_seed: int, cache: bool,
                 executor: ThreadPoolExecutor | None):
        self._fn = fitness_fn
        self._seed = run_seed
        self._cache: dict[str, float] | None = {} if cache else None
        self._executor = executor

    def _eval_one(self, chrom: Chromosome, eval_index: int) -> FitnessRecord:
        seed = eval_seed(self._seed, eval_index)
        key = chrom.to_text() if self._cache is not None else None
        if key is not None and key in self._cache:
            fitness = self._cache[key]
        else:
            try:
                fitness = float(self._fn(chrom, seed))
            except Exception as exc:
                raise FitnessError(chrom, eval_index, exc) from exc
            if key is not None:
                self._cache[key] = fitness
        active, _ = active_counts(chrom)
        return FitnessRecord(chrom, fitness, active, eval_index, seed)

    def eval_batch(self, chroms: list[Chromosome], start_index: int) -> list[FitnessRecord]:
        if self._executor is not None and len(chroms) > 1:
            futures = [self._executor.submit(self._eval_one, c, start_index + i)
                       for i, c in enumerate(chroms)]
            return [f.result() for f in futures]
        return [self._eval_one(c, start_index + i) for i, c in enumerate(chroms)]


def _random_chromosome(length: int, p_one: float, kind, rng: np.random.Generator) -> Chromosome:
    genes = (rng.random(length) <= p_one).astype(np.uint8)
    return Chromosome(genes, kind)


def initialize(cfg: GAConfig, length: int, fitness_fn: FitnessFn,
               kind: EncodingKind | None = None) -> Population:
    """Draw and evaluate the initial population (genes i.i.d. Bernoulli(p_one))."""
    rng = _ga_rng(cfg.seed)
    evaluator = _Evaluator(fitness_fn, cfg.seed, cache=False, executor=None)
    pop, _ = _initialize(cfg, length, kind, rng, evaluator)
    return pop


def _initialize(cfg, length, kind, rng, evaluator):
    chroms = [_random_chromosome(length, cfg.p_one, kind, rng)
              for _ in range(cfg.population_size)]
    records = evaluator.eval_batch(chroms, start_index=0)
    return Population(records), records


def select_nam(pop: Population, rng: np.random.Generator,
               nam_candidates: int = 3) -> tuple[FitnessRecord, FitnessRecord]:
    """Negative assortative mating.

    The first parent is uniform over the population; the second is the most
    Hamming-distant of `nam_candidates` uniform draws (with replacement, the
    first parent not excluded), the earliest drawn winning distance ties.
    """
    records = pop.records
    parent1 = records[int(rng.integers(len(records)))]
    parent2 = None
    best_distance = -1
    for _ in range(nam_candidates):
        candidate = records[int(rng.integers(len(records)))]
        distance = hamming(parent1.chromosome, candidate.chromosome)
        if distance > best_distance:
            best_distance = distance
            parent2 = candidate
    return parent1, parent2


def crossover_uniform(p: Chromosome, q: Chromosome,
                      rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    """Uniform crossover: one draw per position; children swap where r > 0.5."""
    if p.kind != q.kind or len(p) != len(q):
        raise ValueError("parents must share kind and length")
    r = rng.random(len(p))
    keep = r <= 0.5
    c1 = np.where(keep, p.genes, q.genes)
    c2 = np.where(keep, q.genes, p.genes)
    return Chromosome(c1, p.kind), Chromosome(c2, q.kind)


def mutate(chrom: Chromosome, p_mut: float, rng: np.random.Generator) -> Chromosome:
    """With probability p_mut flip exactly one uniformly chosen gene."""
    if rng.random() < p_mut:
        genes = chrom.genes.copy()
        genes[int(rng.integers(len(chrom)))] ^= 1
        return Chromosome(genes, chrom.kind)
    return chrom


def replace(pop: Population, offspring: list[FitnessRecord]) -> Population:
    """Offspring compete against the two worst members; best two fill their slots."""
    if not 1 <= len(offspring) <= 2:
        raise ValueError("replacement takes one or two offspring")
    contenders = sorted(list(pop.records[:2]) + list(offspring), key=sort_key)
    return Population(contenders[-2:] + list(pop.records[2:]))


def run(cfg: GAConfig, length: int, fitness_fn: FitnessFn,
        kind: EncodingKind | None = None, max_workers: int | None = None,
        cache: bool = False) -> tuple[FitnessRecord, list[FitnessRecord]]:
    """Run the full loop and return (best record ever evaluated, history).

    The history holds exactly cfg.max_evals records in evaluation order. If
    a single evaluation remains in the budget, the last generation only
    evaluates its first child.
    """
    if cfg.max_evals < cfg.population_size:
        raise ValueError("max_evals must be >= population_size")
    if max_workers is None:
        max_workers = int(os.environ.get("EVOPRUNE_THREADS", "1"))
    rng = _ga_rng(cfg.seed)
    executor = ThreadPoolExecutor(max_workers=min(2, max_workers)) if max_workers > 1 else None
    try:
        evaluator = _Evaluator(fitness_fn, cfg.seed, cache, executor)
        pop, history = _initialize(cfg, length, kind, rng, evaluator)
        evals = len(history)
        while evals < cfg.max_evals:
            parent1, parent2 = select_nam(pop, rng, cfg.nam_candidates)
            child1, child2 = crossover_uniform(parent1.chromosome, parent2.chromosome, rng)
            children = [mutate(child1, cfg.p_mut, rng), mutate(child2, cfg.p_mut, rng)]
            children = children[: cfg.max_evals - evals]
            records = evaluator.eval_batch(children, start_index=evals)
            history.extend(records)
            evals += len(records)
            pop = replace(pop, records)
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
    best = max(history, key=sort_key)
    return best, history

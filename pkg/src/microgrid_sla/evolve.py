"""Generational neuroevolution of broker networks.

Offspring composition per generation follows fixed operator rates (elites,
mutants, crossover children, fresh random genomes, random survivors).
Fitness is the broker profit with reimbursements penalized by ``penalty``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .engine import run_simulation
from .neuro import Genome, Layered, NeuralPolicy, Topology, random_genome
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

REIMBURSEMENT_PENALTY = 100000.0


@dataclass(frozen=True)
class EvolutionParams:
    """Operator rates and budget. ``generations`` counts evaluated populations,
    the random initial one included (0 still evaluates the initial population)."""

    population_size: int = 50
    generations: int = 500
    elite_rate: float = 0.15
    mutation_rate: float = 0.40
    crossover_rate: float = 0.30
    random_creation_rate: float = 0.05
    random_selection_rate: float = 0.10
    mutation_sigma: float = 0.2
    tournament_size: int = 2
    penalty: float = REIMBURSEMENT_PENALTY
    seed: int = 0
    topology: Topology = Layered()
    p_scale: float = 1.0

    def __post_init__(self):
        rates = (self.elite_rate, self.mutation_rate, self.crossover_rate,
                 self.random_creation_rate, self.random_selection_rate)
        if any(r < 0 for r in rates) or not math.isclose(sum(rates), 1.0, abs_tol=1e-9):
            raise ValueError(f"operator rates must be non-negative and sum to 1, got {sum(rates)}")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.mutation_sigma < 0 or self.tournament_size < 1:
            raise ValueError("mutation_sigma must be >= 0 and tournament_size >= 1")

    def composition(self) -> dict[str, int]:
        """Offspring counts: floor each rate, at least one elite, remainder to mutants."""
        n = self.population_size
        counts = {
            "elite": max(1, math.floor(n * self.elite_rate)),
            "mutation": math.floor(n * self.mutation_rate),
            "crossover": math.floor(n * self.crossover_rate),
            "random": math.floor(n * self.random_creation_rate),
            "survivor": math.floor(n * self.random_selection_rate),
        }
        excess = sum(counts.values()) - n
        for key in ("survivor", "random", "crossover", "mutation"):
            if excess <= 0:
                break
            cut = min(excess, counts[key])
            counts[key] -= cut
            excess -= cut
        counts["mutation"] += n - sum(counts.values())
        return counts


@dataclass(frozen=True)
class FitnessRecord:
    income_ugrid: float
    income_feedin: float
    cost_supply: float
    cost_reimb: float
    penalty: float = REIMBURSEMENT_PENALTY

    @property
    def fitness(self) -> float:
        return (self.income_ugrid + self.income_feedin) - (self.cost_supply + self.penalty * self.cost_reimb)

    @property
    def profit(self) -> float:
        return (self.income_ugrid + self.income_feedin) - (self.cost_supply + self.cost_reimb)


def evaluate_fitness(g: Genome, scenario: ScenarioConfig, penalty: float = REIMBURSEMENT_PENALTY,
                     p_scale: float = 1.0) -> FitnessRecord:
    result = run_simulation(scenario, NeuralPolicy(g, p_scale), record=False, with_report=False)
    t = result.totals
    return FitnessRecord(t.income_ugrid, t.income_feedin, t.cost_supply, t.cost_reimb, penalty)


def _evaluate_job(args):
    genes, topo, scenario, penalty, p_scale = args
    return evaluate_fitness(Genome(topo, genes), scenario, penalty, p_scale)


def tournament(ranked: list, k: int, rng: np.random.Generator):
    """Best of ``k`` uniform draws from a population sorted best-first."""
    picks = rng.integers(0, len(ranked), size=k)
    return ranked[int(picks.min())]


def mutate(g: Genome, sigma: float, rng: np.random.Generator) -> Genome:
    return Genome(g.topology, g.genes + rng.normal(0.0, sigma, g.genes.size))


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """Single-point crossover: genes before the cut from ``a``, the rest from ``b``."""
    cut = int(rng.integers(1, a.genes.size)) if a.genes.size > 1 else 0
    return Genome(a.topology, np.concatenate([a.genes[:cut], b.genes[cut:]]))


def next_generation(ranked: list[Genome], params: EvolutionParams, rng: np.random.Generator) -> list[Genome]:
    """Build the next population from ``ranked`` (sorted by fitness, best first)."""
    counts = params.composition()
    n_elite = counts["elite"]
    elites = ranked[:n_elite]
    pop = list(elites)
    for _ in range(counts["mutation"]):
        if rng.random() < 0.5:
            parent = elites[int(rng.integers(0, n_elite))]
        else:
            parent = ranked[int(rng.integers(0, len(ranked)))]
        pop.append(mutate(parent, params.mutation_sigma, rng))
    for _ in range(counts["crossover"]):
        a = tournament(ranked, params.tournament_size, rng)
        b = tournament(ranked, params.tournament_size, rng)
        pop.append(crossover(a, b, rng))
    for _ in range(counts["random"]):
        pop.append(random_genome(params.topology, rng))
    for i in rng.choice(len(ranked), size=counts["survivor"], replace=len(ranked) < counts["survivor"]):
        pop.append(ranked[int(i)])
    return pop


@dataclass
class GenerationStats:
    generation: int
    best: float
    median: float
    worst: float
    best_reimbursement: float


@dataclass
class EvolutionResult:
    champion: Genome
    record: FitnessRecord
    history: list[GenerationStats] = field(default_factory=list)
    initial_best: FitnessRecord | None = None


class _Evaluator:
    """Fitness cache keyed by gene bytes; evaluation is deterministic per scenario."""

    def __init__(self, scenario: ScenarioConfig, params: EvolutionParams, workers: int = 1):
        self.scenario = scenario
        self.params = params
        self.cache: dict[bytes, FitnessRecord] = {}
        self.pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def __call__(self, pop: list[Genome]) -> list[FitnessRecord]:
        todo = []
        for g in pop:
            k = g.key()
            if k not in self.cache and k not in {t.key() for t in todo}:
                todo.append(g)
        p = self.params
        if self.pool is not None and len(todo) > 1:
            jobs = [(g.genes, g.topology, self.scenario, p.penalty, p.p_scale) for g in todo]
            records = list(self.pool.map(_evaluate_job, jobs))
        else:
            records = [evaluate_fitness(g, self.scenario, p.penalty, p.p_scale) for g in todo]
        for g, r in zip(todo, records):
            self.cache[g.key()] = r
        return [self.cache[g.key()] for g in pop]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _rank(pop: list[Genome], recs: list[FitnessRecord]):
    # stable sort keeps index order among ties, so ranking is deterministic
    order = sorted(range(len(pop)), key=lambda i: -recs[i].fitness)
    return [pop[i] for i in order], [recs[i] for i in order]


def evolve(params: EvolutionParams, scenario: ScenarioConfig, workers: int = 1, on_generation=None) -> EvolutionResult:
    if params.topology.n_outputs != len(scenario.catalog):
        raise ValueError(f"topology has {params.topology.n_outputs} outputs, catalog has {len(scenario.catalog)}")
    rng = np.random.default_rng(params.seed)
    evaluator = _Evaluator(scenario, params, workers)
    try:
        pop = [random_genome(params.topology, rng) for _ in range(params.population_size)]
        ranked, recs = _rank(pop, evaluator(pop))
        history = [_stats(0, recs)]
        initial_best = recs[0]
        if on_generation:
            on_generation(history[-1])
        for gen in range(1, params.generations):
            pop = next_generation(ranked, params, rng)
            ranked, recs = _rank(pop, evaluator(pop))
            history.append(_stats(gen, recs))
            log.info("generation %d best %.6g median %.6g", gen, recs[0].fitness, history[-1].median)
            if on_generation:
                on_generation(history[-1])
    finally:
        evaluator.close()
    return EvolutionResult(ranked[0], recs[0], history, initial_best)


def _stats(gen: int, recs: list[FitnessRecord]) -> GenerationStats:
    fit = [r.fitness for r in recs]
    return GenerationStats(gen, fit[0], median(fit), fit[-1], recs[0].cost_reimb)

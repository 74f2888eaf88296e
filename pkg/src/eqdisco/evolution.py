"""Population loop with classical (uniform) and directed (importance-weighted) operators."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fitness import FitnessConfig, FitnessResult, evaluate, substream
from .genotype import (
    EquationModel,
    SearchSpace,
    Term,
    VocabularyExhausted,
    generate_term,
)
from .grid_data import FieldBundle
from .importance import EmptySupportError, ImportanceTable, sample_term, sample_token

__all__ = [
    "EvolutionConfig",
    "Individual",
    "Population",
    "RunResult",
    "initialize",
    "crossover",
    "mutate",
    "run",
]

MODES = ("classical", "directed")


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 64
    generations: int = 100
    crossover_rate: float = 0.8
    token_mutation_rate: float = 0.3
    term_mutation_rate: float = 0.3
    mode: str = "classical"
    n_terms: int = 5
    t_max: int = 2
    seed: int = 0
    elitism: int = 1
    tournament_size: int = 2
    max_resample: int = 8

    def __post_init__(self):
        for name in ("crossover_rate", "token_mutation_rate", "term_mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be in [0, population_size)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.generations < 0 or self.n_terms < 2 or self.t_max < 1:
            raise ValueError("generations >= 0, n_terms >= 2 and t_max >= 1 are required")
        if self.tournament_size < 1 or self.max_resample < 1:
            raise ValueError("tournament_size and max_resample must be positive")


@dataclass
class Individual:
    model: EquationModel
    result: FitnessResult | None = None

    @property
    def fitness(self) -> float:
        return self.result.fitness if self.result is not None else 0.0

    def copy(self) -> "Individual":
        return Individual(self.model.copy(), self.result)


@dataclass
class Population:
    individuals: list[Individual]
    generation: int = 0

    def best(self) -> Individual:
        # first maximum wins, keeps ties deterministic
        return max(self.individuals, key=lambda ind: ind.fitness)


@dataclass
class RunResult:
    best_per_generation: list[tuple[float, str]]
    population: Population
    elapsed_s: float
    history: list[dict] = field(default_factory=list)

    @property
    def best(self) -> Individual:
        return self.population.best()


def _require_table(mode: str, importance: ImportanceTable | None) -> None:
    if mode == "directed" and importance is None:
        raise ValueError("directed mode needs an importance table")


def _fresh_term(
    mode: str,
    space: SearchSpace,
    importance: ImportanceTable | None,
    rng: np.random.Generator,
    existing: set[str],
) -> Term:
    if mode == "classical":
        return generate_term(rng, space.t_max, space.families, existing, space.rules)
    try:
        sig = sample_term(importance, rng, existing, uniform_fallback=True)
    except EmptySupportError as exc:
        raise VocabularyExhausted(str(exc)) from exc
    return space.vocabulary.get(sig)


def initialize(
    cfg: EvolutionConfig,
    space: SearchSpace,
    importance: ImportanceTable | None,
    rng: np.random.Generator,
) -> Population:
    """Fill a population with models of ``n_terms`` distinct admissible terms."""
    _require_table(cfg.mode, importance)
    if len(space.vocabulary) < cfg.n_terms:
        raise VocabularyExhausted(
            f"vocabulary has {len(space.vocabulary)} terms, models need {cfg.n_terms}"
        )
    individuals = []
    for _ in range(cfg.population_size):
        terms: list[Term] = []
        existing: set[str] = set()
        while len(terms) < cfg.n_terms:
            term = _fresh_term(cfg.mode, space, importance, rng, existing)
            terms.append(term)
            existing.add(term.signature)
        individuals.append(Individual(EquationModel(terms)))
    return Population(individuals, 0)


def _choose(rng: np.random.Generator, weights) -> int:
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return int(rng.integers(len(w)))
    idx = int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"))
    return min(idx, len(w) - 1)


def _crossover_weights(model: EquationModel, mode: str, importance: ImportanceTable | None):
    if mode == "classical":
        return np.ones(len(model.terms))
    return np.array([importance.max_token_importance(t.names) for t in model.terms])


def crossover(
    parent_a: EquationModel,
    parent_b: EquationModel,
    mode: str,
    importance: ImportanceTable | None,
    rng: np.random.Generator,
    max_resample: int = 8,
) -> tuple[EquationModel, EquationModel]:
    """Swap one term between the parents.

    Classical mode picks each term uniformly; directed mode picks a term with
    probability proportional to the largest token importance among its tokens.
    Swaps that would duplicate a signature, or exchange equal terms, are redrawn
    up to ``max_resample`` times before the parents are returned unchanged.
    """
    _require_table(mode, importance)
    a, b = parent_a.copy(), parent_b.copy()
    if len(a.terms) < 1 or len(b.terms) < 1:
        return a, b
    wa = _crossover_weights(a, mode, importance)
    wb = _crossover_weights(b, mode, importance)
    sa, sb = set(a.signatures), set(b.signatures)
    for _ in range(max_resample):
        i, j = _choose(rng, wa), _choose(rng, wb)
        ta, tb = a.terms[i], b.terms[j]
        if ta.signature == tb.signature or tb.signature in sa or ta.signature in sb:
            continue
        a.terms[i], b.terms[j] = tb, ta
        for child in (a, b):
            child.coefficients = None
            child.target_index = None
        return a, b
    return a, b


def _mutate_token(model, i, mode, importance, space, rng, max_resample) -> bool:
    term = model.terms[i]
    others = set(model.signatures) - {term.signature}
    pool = [t.name for t in space.tokens]
    for _ in range(max_resample):
        pos = int(rng.integers(len(term.tokens)))
        old = term.tokens[pos].name
        if mode == "classical":
            choices = [n for n in pool if n != old]
            if not choices:
                return False
            new = choices[int(rng.integers(len(choices)))]
        else:
            try:
                new = sample_token(importance, rng, exclude={old}, uniform_fallback=True)
            except EmptySupportError:
                return False
        tokens = list(term.tokens)
        tokens[pos] = space.token(new)
        candidate = Term.of(tokens)
        if candidate.signature in others or not space.rules.admits(candidate.tokens):
            continue
        model.terms[i] = candidate
        return True
    return False


def _mutate_term(model, i, mode, importance, space, rng, max_resample) -> bool:
    existing = set(model.signatures)
    for _ in range(max_resample):
        try:
            candidate = _fresh_term(mode, space, importance, rng, existing)
        except VocabularyExhausted:
            return False
        if space.rules.admits(candidate.tokens) and candidate.signature not in existing:
            model.terms[i] = candidate
            return True
    return False


def mutate(
    model: EquationModel,
    mode: str,
    importance: ImportanceTable | None,
    space: SearchSpace,
    rng: np.random.Generator,
    cfg: EvolutionConfig,
) -> EquationModel:
    """Token and term mutation, each applied with its own probability.

    Both pick the affected term uniformly. The replacement token or term is
    uniform (token) or drawn by the generator (term) in classical mode, and
    drawn from the importance table in directed mode.
    """
    _require_table(mode, importance)
    out = model.copy()
    changed = False
    if out.terms and rng.random() < cfg.token_mutation_rate:
        i = int(rng.integers(len(out.terms)))
        changed |= _mutate_token(out, i, mode, importance, space, rng, cfg.max_resample)
    if out.terms and rng.random() < cfg.term_mutation_rate:
        i = int(rng.integers(len(out.terms)))
        changed |= _mutate_term(out, i, mode, importance, space, rng, cfg.max_resample)
    if changed:
        out.coefficients = None
        out.target_index = None
    return out


def _evaluate(ind: Individual, bundle, fitness_cfg, seed, generation, index, cache) -> None:
    rng = substream(seed, 1, generation, index)
    try:
        ind.result = evaluate(ind.model, bundle, rng, fitness_cfg, cache=cache)
    except (ValueError, ArithmeticError, KeyError):
        ind.result = FitnessResult(0.0)


def _tournament(pop: list[Individual], rng, size: int) -> Individual:
    picks = [pop[int(rng.integers(len(pop)))] for _ in range(size)]
    return max(picks, key=lambda ind: ind.fitness)


def run(
    cfg: EvolutionConfig,
    bundle: FieldBundle,
    importance: ImportanceTable | None = None,
    fitness_cfg: FitnessConfig | None = None,
    space: SearchSpace | None = None,
    log: Callable[[dict], None] | None = None,
    timing: bool = True,
) -> RunResult:
    """Run the evolutionary search and return per-generation bests.

    Operators draw from the stream ``substream(seed, 0)``; the fitness of the
    individual at position ``i`` in generation ``g`` draws from
    ``substream(seed, 1, g, i)``, so results do not depend on evaluation order.
    """
    fitness_cfg = fitness_cfg or FitnessConfig()
    if space is None:
        space = SearchSpace.from_names(bundle.names, t_max=cfg.t_max)
    elif space.t_max != cfg.t_max:
        space = replace(space, t_max=cfg.t_max)
    _require_table(cfg.mode, importance)
    rng = substream(cfg.seed, 0)
    cache: dict = {}
    start = time.monotonic()

    pop = initialize(cfg, space, importance, rng)
    for i, ind in enumerate(pop.individuals):
        _evaluate(ind, bundle, fitness_cfg, cfg.seed, 0, i, cache)

    best_per_gen: list[tuple[float, str]] = []
    history: list[dict] = []

    def record(gen: int) -> None:
        best = pop.best()
        best_per_gen.append((best.fitness, best.model.render()))
        entry = {
            "generation": gen,
            "best_fitness": best.fitness,
            "best_equation": best.model.render(),
            "mean_fitness": float(np.mean([ind.fitness for ind in pop.individuals])),
            "elapsed_s": time.monotonic() - start if timing else None,
        }
        history.append(entry)
        if log is not None:
            log(entry)

    record(0)
    for gen in range(1, cfg.generations + 1):
        ranked = sorted(pop.individuals, key=lambda ind: -ind.fitness)
        nxt = [ind.copy() for ind in ranked[: cfg.elitism]]
        offspring: list[Individual] = []
        while len(nxt) + len(offspring) < cfg.population_size:
            pa = _tournament(pop.individuals, rng, cfg.tournament_size)
            pb = _tournament(pop.individuals, rng, cfg.tournament_size)
            if rng.random() < cfg.crossover_rate:
                ca, cb = crossover(pa.model, pb.model, cfg.mode, importance, rng, cfg.max_resample)
            else:
                ca, cb = pa.model.copy(), pb.model.copy()
            for child in (ca, cb):
                offspring.append(Individual(mutate(child, cfg.mode, importance, space, rng, cfg)))
        offspring = offspring[: cfg.population_size - len(nxt)]
        base = len(nxt)
        for k, ind in enumerate(offspring):
            _evaluate(ind, bundle, fitness_cfg, cfg.seed, gen, base + k, cache)
        pop = Population(nxt + offspring, gen)
        record(gen)

    elapsed = time.monotonic() - start
    return RunResult(best_per_gen, pop, elapsed, history)

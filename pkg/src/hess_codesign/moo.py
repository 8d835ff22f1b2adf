"""Controlled-elitist NSGA-II over (bank count, membership genome).

Both objectives are maximized.  The integer gene is the supercapacitor bank
count; the real genes are the normalized membership-function corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when ``a`` is at least as good everywhere and better somewhere (maximization)."""
    better = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            better = True
    return better


def _check_objectives(objs) -> np.ndarray:
    if any(o is None for o in objs):
        raise ValueError("unevaluated individual in population")
    F = np.asarray(objs, dtype=float)
    if F.ndim != 2:
        raise ValueError("objectives must form an (n, m) array")
    if np.isnan(F).any():
        raise ValueError("unevaluated individual in population (NaN objective)")
    return F


def non_dominated_sort(objs) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts of indices, best first."""
    F = _check_objectives(objs)
    n = len(F)
    if n == 0:
        return []
    ge = np.all(F[:, None, :] >= F[None, :, :], axis=2)
    gt = np.any(F[:, None, :] > F[None, :, :], axis=2)
    dom = ge & gt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(objs) -> np.ndarray:
    """Crowding distance of each member of one front."""
    F = np.asarray(objs, dtype=float)
    n = len(F)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = math.inf
        return dist
    for m in range(F.shape[1]):
        order = np.argsort(F[:, m], kind="stable")
        col = F[order, m]
        dist[order[0]] = dist[order[-1]] = math.inf
        span = col[-1] - col[0]
        if not np.isfinite(span) or span <= 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def _crowded_pick(front: list[int], F: np.ndarray, k: int) -> list[int]:
    if k >= len(front):
        return list(front)
    d = crowding_distance(F[front])
    order = sorted(range(len(front)), key=lambda i: (-d[i], front[i]))
    return [front[i] for i in order[:k]]


def controlled_elitist_select(pool_objs, n_select: int, elite_fraction: float = 0.7) -> list[int]:
    """Indices of the next population drawn from the combined pool.

    The first front is always kept (crowding-truncated if it alone overfills
    the population).  The remaining slots are shared by the lower fronts
    with geometrically shrinking quotas, ratio ``1 - elite_fraction``, so
    lower-ranked but diverse individuals survive.  Unused quota carries
    over to the next front; leftover slots are filled by rank then
    crowding.  ``elite_fraction = 1`` is plain NSGA-II elitism.
    """
    F = _check_objectives(pool_objs)
    if n_select > len(F):
        raise ValueError("pool smaller than the population size")
    if not 0.0 < elite_fraction <= 1.0:
        raise ValueError("elite_fraction must lie in (0, 1]")
    fronts = non_dominated_sort(F)
    chosen = _crowded_pick(fronts[0], F, n_select)
    rest = fronts[1:]
    slots = n_select - len(chosen)
    if slots <= 0 or not rest:
        return chosen

    if elite_fraction < 1.0:
        r = 1.0 - elite_fraction
        k = len(rest)
        weights = r ** np.arange(k)
        quotas = slots * weights / weights.sum()
        carry = 0.0
        taken = []
        for front, q in zip(rest, quotas):
            want = q + carry
            n_take = min(len(front), int(math.floor(want + 1e-12)))
            carry = want - n_take
            taken.append(_crowded_pick(front, F, n_take))
        for t in taken:
            chosen.extend(t)

    # Fill remaining slots by rank, then crowding.
    picked = set(chosen)
    for front in rest:
        if len(chosen) >= n_select:
            break
        left = [i for i in front if i not in picked]
        if not left:
            continue
        add = _crowded_pick(left, F, n_select - len(chosen))
        chosen.extend(add)
        picked.update(add)
    return chosen


def rank_and_crowding(objs) -> tuple[np.ndarray, np.ndarray]:
    F = _check_objectives(objs)
    rank = np.zeros(len(F), dtype=int)
    crowd = np.zeros(len(F))
    for r, front in enumerate(non_dominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


def tournament(rank, crowd, n: int, rng: np.random.Generator) -> np.ndarray:
    """Binary tournament on (rank, crowding); ties go to the first draw."""
    a = rng.integers(0, len(rank), n)
    b = rng.integers(0, len(rank), n)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


@dataclass(frozen=True)
class VariationSettings:
    crossover_rate: float = 0.9
    eta_c: float = 15.0
    gene_swap_prob: float = 0.5
    mutation_rate: float | None = None  # per gene; None means 1 / (n_genes + 1)
    eta_m: float = 20.0
    n_sc_bounds: tuple[int, int] = (0, 120)
    n_sc_step: int = 6


def _sbx_pair(x1, x2, eta, rng, per_gene):
    """Bounded simulated binary crossover on [0, 1]."""
    c1, c2 = x1.copy(), x2.copy()
    for j in range(len(x1)):
        if rng.random() > per_gene:
            continue
        y1, y2 = min(x1[j], x2[j]), max(x1[j], x2[j])
        if y2 - y1 < 1e-14:
            continue
        u = rng.random()
        out = []
        for bound_gap in (y1 - 0.0, 1.0 - y2):
            beta = 1.0 + 2.0 * bound_gap / (y2 - y1)
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                bq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                bq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            out.append(bq)
        lo_child = 0.5 * ((y1 + y2) - out[0] * (y2 - y1))
        hi_child = 0.5 * ((y1 + y2) + out[1] * (y2 - y1))
        lo_child, hi_child = min(max(lo_child, 0.0), 1.0), min(max(hi_child, 0.0), 1.0)
        if rng.random() < 0.5:
            lo_child, hi_child = hi_child, lo_child
        c1[j], c2[j] = lo_child, hi_child
    return c1, c2


def _polynomial_mutation(x, eta, rate, rng):
    """Bounded polynomial mutation on [0, 1]."""
    y = x.copy()
    for j in range(len(x)):
        if rng.random() >= rate:
            continue
        v = y[j]
        u = rng.random()
        if u < 0.5:
            xy = 1.0 - v
            dq = (2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)) ** (1.0 / (eta + 1.0)) - 1.0
        else:
            xy = v
            dq = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)) ** (1.0 / (eta + 1.0))
        y[j] = min(max(v + dq, 0.0), 1.0)
    return y


def vary(n_sc, genomes, settings: VariationSettings, rng: np.random.Generator):
    """Offspring of consecutive parent pairs: SBX + polynomial mutation on
    genes, swap + bounded random walk on the bank count."""
    n_sc = np.asarray(n_sc, dtype=int)
    genomes = np.asarray(genomes, dtype=float)
    n = len(n_sc)
    if n % 2:
        raise ValueError("parent count must be even")
    n_genes = genomes.shape[1]
    rate = settings.mutation_rate if settings.mutation_rate is not None else 1.0 / (n_genes + 1)
    lo, hi = settings.n_sc_bounds
    child_sc = n_sc.copy()
    child_g = genomes.copy()
    for p in range(0, n, 2):
        if rng.random() < settings.crossover_rate:
            child_g[p], child_g[p + 1] = _sbx_pair(genomes[p], genomes[p + 1], settings.eta_c, rng, settings.gene_swap_prob)
            if rng.random() < 0.5:
                child_sc[p], child_sc[p + 1] = n_sc[p + 1], n_sc[p]
    for c in range(n):
        child_g[c] = _polynomial_mutation(child_g[c], settings.eta_m, rate, rng)
        if rng.random() < rate:
            step = int(rng.integers(-settings.n_sc_step, settings.n_sc_step + 1))
            child_sc[c] = child_sc[c] + step
    return np.clip(child_sc, lo, hi), np.clip(child_g, 0.0, 1.0)


def hypervolume_2d(objs, ref=(0.0, 0.0)) -> float:
    """Area dominated by the points (maximization) above ``ref``."""
    F = np.asarray(objs, dtype=float).reshape(-1, 2)
    F = F[np.all(np.isfinite(F), axis=1) & (F[:, 0] > ref[0]) & (F[:, 1] > ref[1])]
    if len(F) == 0:
        return 0.0
    F = F[np.lexsort((-F[:, 1], -F[:, 0]))]
    area, best_y = 0.0, ref[1]
    for x, y in F:
        if y > best_y:
            area += (x - ref[0]) * (y - best_y)
            best_y = y
    return float(area)


@dataclass(frozen=True)
class MooSettings:
    population: int = 40
    generations: int = 30
    elite_fraction: float = 0.7
    seed: int = 0
    init_sigma: float = 0.2
    variation: VariationSettings = field(default_factory=VariationSettings)

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be an even number >= 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must lie in (0, 1]")
        lo, hi = self.variation.n_sc_bounds
        if not 0 <= lo <= hi:
            raise ValueError("n_sc bounds must satisfy 0 <= min <= max")


@dataclass
class Individual:
    n_sc: int
    genome: np.ndarray
    objectives: tuple[float, float]
    avg_current: float = math.nan
    gen: int = 0  # generation in which it was evaluated


@dataclass
class OptimizationResult:
    front: list[Individual]
    population: list[Individual]
    archive: list[Individual]
    history: list[dict]
    initial_front: list[Individual]


# evaluate(n_sc array, genome matrix) -> list of (objectives, avg_current)
Evaluator = Callable[[np.ndarray, np.ndarray], list[tuple[tuple[float, float], float]]]


def initial_population(template_genome, settings: MooSettings, rng: np.random.Generator):
    """Template genome once, then noisy copies of it; bank counts uniform over the bounds."""
    n, g0 = settings.population, np.asarray(template_genome, dtype=float)
    lo, hi = settings.variation.n_sc_bounds
    n_sc = rng.integers(lo, hi + 1, n)
    genomes = np.clip(g0 + rng.normal(0.0, settings.init_sigma, (n, len(g0))), 0.0, 1.0)
    genomes[0] = g0
    return n_sc, genomes


def _unique_front(pop: list[Individual]) -> list[Individual]:
    F = [ind.objectives for ind in pop]
    front = [pop[i] for i in non_dominated_sort(F)[0]]
    seen, out = set(), []
    for ind in front:
        key = (ind.n_sc, ind.genome.tobytes())
        if key not in seen:
            seen.add(key)
            out.append(ind)
    return sorted(out, key=lambda ind: (ind.n_sc, ind.objectives))


def optimize(
    evaluate: Evaluator,
    template_genome,
    settings: MooSettings = MooSettings(),
    progress: Callable[[dict], None] | None = None,
) -> OptimizationResult:
    rng = np.random.default_rng(settings.seed)
    archive: list[Individual] = []
    history: list[dict] = []

    def run(n_sc, genomes, gen):
        results = evaluate(n_sc, genomes)
        inds = [
            Individual(int(s), g.copy(), (float(o[0]), float(o[1])), float(i), gen)
            for s, g, (o, i) in zip(n_sc, genomes, results)
        ]
        archive.extend(inds)
        return inds

    def record(gen, pop):
        F = np.array([ind.objectives for ind in pop])
        front = _unique_front(pop)
        entry = {
            "gen": gen,
            "hypervolume": hypervolume_2d([ind.objectives for ind in front]),
            "best_laps": float(F[:, 0].max()),
            "best_life": float(F[:, 1].max()),
            "front_size": len(front),
        }
        history.append(entry)
        if progress:
            progress(entry)

    n_sc, genomes = initial_population(template_genome, settings, rng)
    pop = run(n_sc, genomes, 0)
    record(0, pop)
    initial_front = _unique_front(pop)

    for gen in range(1, settings.generations + 1):
        rank, crowd = rank_and_crowding([ind.objectives for ind in pop])
        parents = tournament(rank, crowd, settings.population, rng)
        kid_sc, kid_g = vary(
            [pop[i].n_sc for i in parents],
            np.array([pop[i].genome for i in parents]),
            settings.variation,
            rng,
        )
        kids = run(kid_sc, kid_g, gen)
        pool = pop + kids
        keep = controlled_elitist_select([ind.objectives for ind in pool], settings.population, settings.elite_fraction)
        pop = [pool[i] for i in keep]
        record(gen, pop)

    return OptimizationResult(_unique_front(pop), pop, archive, history, initial_front)

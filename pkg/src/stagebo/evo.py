"""NSGA-II solver for the cheap sampled-front subproblems.

Maximization convention throughout. Constraint handling follows Deb's
feasibility rules: feasible individuals beat infeasible ones, and between two
infeasible individuals the lower total violation wins. The evaluation
callback is batched: fn(X) with X of shape (q, d) must return a (q, m)
objective array and a (q,) violation array (zeros when feasible).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

BatchFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

SBX_ETA = 15.0
SBX_RATE = 0.9
MUTATION_ETA = 20.0


@dataclass
class Population:
    individuals: np.ndarray
    objectives: np.ndarray
    constraint_violation: np.ndarray
    rank: np.ndarray
    crowding: np.ndarray

    def __len__(self) -> int:
        return self.individuals.shape[0]


def _dominance_matrix(points: np.ndarray, violations: Optional[np.ndarray]) -> np.ndarray:
    n, m = points.shape
    # Accumulate per objective to avoid (n, n, m) temporaries.
    ge = np.ones((n, n), dtype=bool)
    gt = np.zeros((n, n), dtype=bool)
    for j in range(m):
        col = points[:, j]
        ge &= col[:, None] >= col[None, :]
        gt |= col[:, None] > col[None, :]
    pareto = ge & gt
    if violations is None:
        return pareto
    feas = violations <= 0.0
    fi, fj = feas[:, None], feas[None, :]
    by_violation = violations[:, None] < violations[None, :]
    return (fi & ~fj) | (~fi & ~fj & by_violation) | (fi & fj & pareto)


def non_dominated_sort(
    points: np.ndarray, violations: Optional[np.ndarray] = None
) -> list[np.ndarray]:
    """Partition indices into fronts of mutually non-dominated points.

    Front 0 holds the points dominated by nothing; every point of front k>0
    is dominated by at least one point of front k-1. When `violations` is
    given, constraint-domination is used instead of plain Pareto dominance.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n == 0:
        return []
    dom = _dominance_matrix(pts, None if violations is None else np.asarray(violations, float))
    n_dominators = dom.sum(axis=0).astype(np.int64)
    unassigned = np.ones(n, dtype=bool)
    fronts = []
    while unassigned.any():
        front = np.flatnonzero(unassigned & (n_dominators == 0))
        if front.size == 0:  # unreachable for a strict partial order
            front = np.flatnonzero(unassigned)
        fronts.append(front)
        unassigned[front] = False
        n_dominators -= dom[front].sum(axis=0)
    return fronts


def crowding_distance(front: np.ndarray) -> np.ndarray:
    """Canonical NSGA-II crowding distance for the points of one front.

    Per-objective extreme points get +inf; interior points accumulate the
    neighbour gap normalized by the objective's range.
    """
    pts = np.atleast_2d(np.asarray(front, dtype=float))
    k, m = pts.shape
    if k == 0:
        raise ValueError("front must be non-empty")
    if k <= 2:
        return np.full(k, np.inf)
    dist = np.zeros(k)
    for j in range(m):
        order = np.argsort(pts[:, j], kind="stable")
        fmin, fmax = pts[order[0], j], pts[order[-1], j]
        dist[order[0]] = dist[order[-1]] = np.inf
        if fmax > fmin:
            gaps = (pts[order[2:], j] - pts[order[:-2], j]) / (fmax - fmin)
            dist[order[1:-1]] += gaps
    return dist


def _rank_and_crowding(objectives, violations):
    n = objectives.shape[0]
    rank = np.empty(n, dtype=np.int64)
    crowd = np.empty(n, dtype=float)
    for r, front in enumerate(non_dominated_sort(objectives, violations)):
        rank[front] = r
        crowd[front] = crowding_distance(objectives[front])
    return rank, crowd


def _evaluate(fn: BatchFn, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    objs, viol = fn(xs)
    objs = np.atleast_2d(np.asarray(objs, dtype=float))
    viol = np.asarray(viol, dtype=float).ravel().copy()
    # Quarantine non-finite evaluations: worst possible rank, never a crash.
    bad = ~np.all(np.isfinite(objs), axis=1) | ~np.isfinite(viol)
    if bad.any():
        objs = objs.copy()
        objs[bad] = 0.0
        viol[bad] = np.inf
    return objs, viol


def _sbx(rng, parents_a, parents_b, lo, hi):
    child_a = parents_a.copy()
    child_b = parents_b.copy()
    do_pair = rng.random(parents_a.shape[0]) < SBX_RATE
    u = rng.random(parents_a.shape)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (SBX_ETA + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (SBX_ETA + 1.0)),
    )
    cross_var = (rng.random(parents_a.shape) < 0.5) & do_pair[:, None]
    a = 0.5 * ((1.0 + beta) * parents_a + (1.0 - beta) * parents_b)
    b = 0.5 * ((1.0 - beta) * parents_a + (1.0 + beta) * parents_b)
    child_a[cross_var] = a[cross_var]
    child_b[cross_var] = b[cross_var]
    return np.clip(child_a, lo, hi), np.clip(child_b, lo, hi)


def _polynomial_mutation(rng, xs, lo, hi):
    d = xs.shape[1]
    span = hi - lo
    do_var = rng.random(xs.shape) < (1.0 / d)
    u = rng.random(xs.shape)
    delta_lo = (xs - lo) / span
    delta_hi = (hi - xs) / span
    exp = 1.0 / (MUTATION_ETA + 1.0)
    low_branch = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta_lo) ** (MUTATION_ETA + 1.0)) ** exp - 1.0
    high_branch = 1.0 - (
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - delta_hi) ** (MUTATION_ETA + 1.0)
    ) ** exp
    delta = np.where(u < 0.5, low_branch, high_branch)
    mutated = xs + do_var * delta * span
    return np.clip(mutated, lo, hi)


def _tournament(rng, rank, crowd, n_picks):
    n = rank.shape[0]
    a = rng.integers(0, n, size=n_picks)
    b = rng.integers(0, n, size=n_picks)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] > crowd[b]))
    return np.where(a_wins, a, b)


def _survival(xs, objs, viol, pop):
    """Merge-and-truncate step; also returns the survivors' rank/crowding."""
    chosen: list[np.ndarray] = []
    ranks: list[np.ndarray] = []
    crowds: list[np.ndarray] = []
    total = 0
    for r, front in enumerate(non_dominated_sort(objs, viol)):
        cd = crowding_distance(objs[front])
        if total + front.size <= pop:
            chosen.append(front)
            crowds.append(cd)
            total += front.size
        else:
            order = np.argsort(-cd, kind="stable")[: pop - total]
            chosen.append(front[order])
            crowds.append(cd[order])
            total = pop
        ranks.append(np.full(chosen[-1].size, r, dtype=np.int64))
        if total == pop:
            break
    idx = np.concatenate(chosen)
    return (
        xs[idx],
        objs[idx],
        viol[idx],
        np.concatenate(ranks),
        np.concatenate(crowds),
    )


def nsga2(
    fn: BatchFn,
    bounds: np.ndarray,
    pop: int,
    gens: int,
    seed: int,
    generation_hook: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
) -> Population:
    """Run NSGA-II and return the final first front.

    Args:
        fn: Batched evaluation, X (q, d) -> (objectives (q, m), violation (q,)).
        bounds (2D-array, shape=(d, 2)): Box bounds of the search space.
        pop: Population size, must be even.
        gens: Number of generations, >= 1.
        seed: RNG seed; identical seeds give identical populations.
        generation_hook: Optional callback (generation, objectives, violations)
            invoked on the surviving population of every generation.

    Returns:
        Population restricted to the final non-dominated front (rank all 0).
        When no feasible individual exists the front consists of the
        least-violating individuals.
    """
    if pop % 2 != 0:
        raise ValueError("population size must be even")
    if gens < 1:
        raise ValueError("gens must be >= 1")
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    rng = np.random.default_rng(seed)

    xs = rng.uniform(lo, hi, size=(pop, bounds.shape[0]))
    objs, viol = _evaluate(fn, xs)
    rank, crowd = _rank_and_crowding(objs, viol)

    for gen in range(gens):
        if generation_hook is not None:
            generation_hook(gen, objs, viol)
        parents = _tournament(rng, rank, crowd, pop)
        half = pop // 2
        child_a, child_b = _sbx(rng, xs[parents[:half]], xs[parents[half:]], lo, hi)
        children = np.vstack([child_a, child_b])
        children = _polynomial_mutation(rng, children, lo, hi)
        c_objs, c_viol = _evaluate(fn, children)
        xs, objs, viol, rank, crowd = _survival(
            np.vstack([xs, children]),
            np.vstack([objs, c_objs]),
            np.concatenate([viol, c_viol]),
            pop,
        )

    if generation_hook is not None:
        generation_hook(gens, objs, viol)
    # Survivors with rank 0 are exactly the final non-dominated front: lower
    # fronts are only ever truncated, never skipped, during survival.
    first = np.flatnonzero(rank == 0)
    return Population(
        individuals=xs[first],
        objectives=objs[first],
        constraint_violation=viol[first],
        rank=np.zeros(first.size, dtype=np.int64),
        crowding=crowding_distance(objs[first]),
    )

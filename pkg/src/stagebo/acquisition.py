"""Constrained expected improvement over epsilon-constraint subproblems.

The acquisition value at x is the expected improvement of the augmented
primary objective (primary mean plus a small slack times the other
objectives' means) multiplied by the probability that every threshold
constraint is satisfied. Objectives and constraints are independent GPs, so
the probability of feasibility factorizes and the augmented variance is the
slack-weighted sum of the per-objective variances.

All functions here are pure with respect to the (immutable) models and work
in the models' input space; the optimization loop passes the unit hypercube.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .surrogate import GpModel, posterior

DEFAULT_SLACK = 1e-3
N_PROBES = 512
PATTERN_ITERS = 128
_SD_FLOOR = 1e-12


@dataclass(frozen=True)
class EpsilonSubproblem:
    """One epsilon-constraint subproblem: maximize objective k subject to
    lower thresholds on the remaining objectives (plus any external
    constraints and preference bounds).

    `k` is the 1-based primary objective number. `epsilons` holds one
    threshold per non-primary objective, ordered by ascending objective
    index. `incumbent` is the best observed augmented value among
    observations satisfying every subproblem constraint, or None when no
    observation satisfies them (the acquisition then degenerates to pure
    feasibility seeking).
    """

    k: int
    epsilons: np.ndarray
    s: float = DEFAULT_SLACK
    external_thresholds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    preference_bounds: Optional[tuple[np.ndarray, np.ndarray]] = None
    incumbent: Optional[float] = None

    @property
    def num_objectives(self) -> int:
        return len(self.epsilons) + 1


def expected_improvement(mean, stdev, incumbent):
    """Closed-form EI for maximization; max(0, mean - incumbent) when the
    standard deviation vanishes. Accepts scalars or arrays."""
    mean = np.asarray(mean, dtype=float)
    stdev = np.asarray(stdev, dtype=float)
    improvement = mean - incumbent
    safe_sd = np.where(stdev > _SD_FLOOR, stdev, 1.0)
    z = improvement / safe_sd
    pdf = np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)
    ei = np.where(
        stdev > _SD_FLOOR,
        improvement * ndtr(z) + stdev * pdf,
        np.maximum(improvement, 0.0),
    )
    if ei.ndim == 0:
        return float(ei)
    return ei


def _exceed_probability(means, stdevs, thresholds):
    """P(f >= threshold) per entry; 0/1 indicators when stdev is zero."""
    means = np.asarray(means, dtype=float)
    stdevs = np.asarray(stdevs, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    safe_sd = np.where(stdevs > _SD_FLOOR, stdevs, 1.0)
    soft = ndtr((means - thresholds) / safe_sd)
    hard = (means >= thresholds).astype(float)
    return np.where(stdevs > _SD_FLOOR, soft, hard)


def _below_probability(means, stdevs, thresholds):
    means = np.asarray(means, dtype=float)
    stdevs = np.asarray(stdevs, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    safe_sd = np.where(stdevs > _SD_FLOOR, stdevs, 1.0)
    soft = ndtr((thresholds - means) / safe_sd)
    hard = (means <= thresholds).astype(float)
    return np.where(stdevs > _SD_FLOOR, soft, hard)


def probability_of_feasibility(means, stdevs, thresholds) -> float:
    """Product over independent constraints of P(f_j >= threshold_j).

    An empty threshold list gives 1.0 (the empty product).
    """
    means = np.atleast_1d(np.asarray(means, dtype=float))
    stdevs = np.atleast_1d(np.asarray(stdevs, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if not (means.shape == stdevs.shape == thresholds.shape):
        raise ValueError("means, stdevs and thresholds must be aligned")
    if means.size == 0:
        return 1.0
    return float(np.prod(_exceed_probability(means, stdevs, thresholds)))


def _posteriors(models: Sequence[GpModel], xs: np.ndarray):
    means = np.empty((xs.shape[0], len(models)))
    stds = np.empty_like(means)
    for i, model in enumerate(models):
        mu, var = posterior(model, xs)
        means[:, i] = mu
        stds[:, i] = np.sqrt(var)
    return means, stds


def cei_batch(
    xs: np.ndarray, sub: EpsilonSubproblem, models: Sequence[GpModel]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Acquisition values for a batch of points.

    Returns (cei, pof, primary_mean); the latter two feed the all-zero
    fallback of :func:`maximize_cei`.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    m = sub.num_objectives
    c = len(sub.external_thresholds)
    if len(models) != m + c:
        raise ValueError(f"expected {m + c} models, got {len(models)}")
    k0 = sub.k - 1
    others = [j for j in range(m) if j != k0]

    means, stds = _posteriors(models, xs)
    obj_means, obj_stds = means[:, :m], stds[:, :m]

    pof = np.ones(xs.shape[0])
    if others:
        pof *= np.prod(
            _exceed_probability(obj_means[:, others], obj_stds[:, others], sub.epsilons),
            axis=1,
        )
    if c:
        pof *= np.prod(
            _exceed_probability(means[:, m:], stds[:, m:], sub.external_thresholds),
            axis=1,
        )
    if sub.preference_bounds is not None and others:
        # P(all >= a or all <= b) by inclusion-exclusion over independent GPs.
        a, b = sub.preference_bounds
        mu, sd = obj_means[:, others], obj_stds[:, others]
        below_b = _below_probability(mu, sd, b[others])
        below_a = _below_probability(mu, sd, a[others])
        p_lower = np.prod(_exceed_probability(mu, sd, a[others]), axis=1)
        p_upper = np.prod(below_b, axis=1)
        p_both = np.prod(np.clip(below_b - below_a, 0.0, None), axis=1)
        pof *= np.clip(p_lower + p_upper - p_both, 0.0, 1.0)

    if sub.incumbent is None:
        return pof, pof, obj_means[:, k0]

    aug_mean = obj_means[:, k0] + sub.s * np.sum(obj_means[:, others], axis=1)
    aug_sd = np.sqrt(obj_stds[:, k0] ** 2 + sub.s**2 * np.sum(obj_stds[:, others] ** 2, axis=1))
    ei = expected_improvement(aug_mean, aug_sd, sub.incumbent)
    return ei * pof, pof, obj_means[:, k0]


def cei(x: np.ndarray, sub: EpsilonSubproblem, models: Sequence[GpModel]) -> float:
    """Constrained expected improvement at a single point."""
    values, _, _ = cei_batch(np.atleast_2d(x), sub, models)
    return float(values[0])


def maximize_cei(
    sub: EpsilonSubproblem,
    models: Sequence[GpModel],
    bounds: np.ndarray,
    n_starts: int = 20,
    seed: int = 0,
) -> np.ndarray:
    """Maximize cEI by pattern search from the best low-discrepancy probes.

    512 scrambled-Sobol probes are scored; the best `n_starts` seed
    derivative-free pattern searches (128 iterations, run in lockstep). The
    returned point scores at least as high as every probe. If every probe
    has zero acquisition value, the probe with the highest probability of
    feasibility wins (ties broken by the primary objective's posterior
    mean). Deterministic given the seed.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    d = bounds.shape[0]

    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    probes = lo + sampler.random(N_PROBES) * (hi - lo)
    values, pof, mean_k = cei_batch(probes, sub, models)

    if np.max(values) <= 0.0:
        best = np.lexsort((mean_k, pof))[-1]
        return probes[best]

    n_starts = min(n_starts, N_PROBES)
    order = np.argsort(-values, kind="stable")[:n_starts]
    points = probes[order].copy()
    best_vals = values[order].copy()
    steps = np.full(n_starts, 0.1)
    span = hi - lo
    offsets = np.concatenate([np.eye(d), -np.eye(d)])  # (2d, d)

    for _ in range(PATTERN_ITERS):
        # Poll all +/- coordinate moves of every start in one batch.
        cand = points[:, None, :] + steps[:, None, None] * offsets[None, :, :] * span
        cand = np.clip(cand, lo, hi)
        flat = cand.reshape(-1, d)
        cand_vals = cei_batch(flat, sub, models)[0].reshape(n_starts, 2 * d)
        best_move = np.argmax(cand_vals, axis=1)
        move_vals = cand_vals[np.arange(n_starts), best_move]
        improved = move_vals > best_vals
        points[improved] = cand[np.arange(n_starts), best_move][improved]
        best_vals[improved] = move_vals[improved]
        steps[~improved] *= 0.5
        if np.all(steps < 1e-7):
            break

    winner = int(np.argmax(best_vals))
    return points[winner]

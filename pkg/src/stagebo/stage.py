"""The gap-targeting outer loop.

Each iteration: refit the per-output GPs, draw one posterior path per output,
build the sampled Pareto front of the paths with NSGA-II, pick the front
point with the largest minimum distance to the observations (the center of
the largest unexplored gap), turn its coordinates into lower thresholds on
the non-primary objectives, and hand the resulting subproblem to the
constrained-EI maximizer. The primary objective rotates round-robin so
optimization pressure is spread evenly.

Constrained mode additionally samples constraint paths and restricts the
sampled front to the (sampled) feasible region; preference mode restricts it
to the either/or bounds of the user's region of interest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import evo
from .acquisition import DEFAULT_SLACK, EpsilonSubproblem, maximize_cei
from .exceptions import ConfigError
from .metrics import pareto_filter
from .problems import ProblemSpec, evaluate
from .surrogate import GpModel, SampledPath, fit, sample_path

MODES = ("unconstrained", "constrained", "preference")
SCHEDULES = ("round_robin", "random", "feasible")
TARGET_RULES = ("maxmin", "random_lexicographic")
QUERY_RULES = ("cei", "direct_sample")

# Tags for deriving independent per-iteration RNG streams.
_TAG_FIT, _TAG_PATH, _TAG_NSGA, _TAG_CEI, _TAG_SCHEDULE, _TAG_TARGET = range(6)


@dataclass(frozen=True)
class StageConfig:
    """Loop hyperparameters; the defaults are the reference settings."""

    s: float = DEFAULT_SLACK
    nsga_pop: int = 300
    nsga_gens: int = 50
    cei_starts: int = 20
    rff_features: int = 512
    objective_schedule: str = "round_robin"
    target_rule: str = "maxmin"
    query_rule: str = "cei"
    maxmin_normalize: bool = False

    def validate(self) -> None:
        if self.objective_schedule not in SCHEDULES:
            raise ConfigError(f"unknown objective_schedule {self.objective_schedule!r}")
        if self.target_rule not in TARGET_RULES:
            raise ConfigError(f"unknown target_rule {self.target_rule!r}")
        if self.query_rule not in QUERY_RULES:
            raise ConfigError(f"unknown query_rule {self.query_rule!r}")
        if self.target_rule == "random_lexicographic" and self.query_rule == "direct_sample":
            raise ConfigError("direct_sample requires the maxmin target rule")
        if self.target_rule == "random_lexicographic" and self.objective_schedule == "feasible":
            raise ConfigError("the feasible schedule requires the maxmin target rule")
        if self.nsga_pop < 2 or self.nsga_pop % 2:
            raise ConfigError("nsga_pop must be even and >= 2")
        if self.nsga_gens < 1 or self.cei_starts < 1 or self.rff_features < 64:
            raise ConfigError("nsga_gens/cei_starts/rff_features out of range")


@dataclass(frozen=True)
class Dataset:
    """Aligned evaluation records: inputs, objective vectors, constraints."""

    xs: np.ndarray
    ys: np.ndarray
    cs: np.ndarray

    def __len__(self) -> int:
        return self.xs.shape[0]

    def append(self, x: np.ndarray, y: np.ndarray, c: np.ndarray) -> "Dataset":
        return Dataset(
            xs=np.vstack([self.xs, x[None, :]]),
            ys=np.vstack([self.ys, y[None, :]]),
            cs=np.vstack([self.cs, c[None, :]]),
        )

    def feasible_mask(self) -> np.ndarray:
        if self.cs.shape[1] == 0:
            return np.ones(len(self), dtype=bool)
        return np.all(self.cs >= 0.0, axis=1)


@dataclass(frozen=True)
class LoopState:
    problem: ProblemSpec
    dataset: Dataset
    t: int
    models: tuple[GpModel, ...]
    mode: str
    rng_seed: int
    config: StageConfig
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SampledFront:
    """Non-dominated front of one posterior draw, with carrier inputs.

    `fallback` is set when the evolutionary solver found no individual
    satisfying the sampled constraints and the least-violating front was
    used instead.
    """

    points: np.ndarray
    inputs: np.ndarray
    fallback: bool


def _seed_for(master: int, t: int, tag: int, index: int = 0) -> int:
    return int(np.random.SeedSequence([master, t, tag, index]).generate_state(1)[0])


def _normalize(problem: ProblemSpec, xs: np.ndarray) -> np.ndarray:
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    return (xs - lo) / (hi - lo)


def _denormalize(problem: ProblemSpec, xs: np.ndarray) -> np.ndarray:
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    return lo + xs * (hi - lo)


def _check_mode(problem: ProblemSpec, mode: str) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "constrained" and problem.dim_c == 0:
        raise ConfigError(f"{problem.name} has no constraints; constrained mode invalid")
    if mode != "constrained" and problem.dim_c > 0:
        raise ConfigError(f"{problem.name} has constraints; run it in constrained mode")
    if mode == "preference" and problem.preference is None:
        raise ConfigError(f"{problem.name} has no preference box")


def _fit_models(problem, dataset, mode, master_seed, t):
    xs_norm = _normalize(problem, dataset.xs)
    outputs = [dataset.ys[:, i] for i in range(problem.dim_y)]
    if mode == "constrained":
        outputs += [dataset.cs[:, i] for i in range(problem.dim_c)]
    return tuple(
        fit(xs_norm, values, seed=_seed_for(master_seed, t, _TAG_FIT, i))
        for i, values in enumerate(outputs)
    )


def initialize(
    problem: ProblemSpec,
    xs: np.ndarray,
    ys: np.ndarray,
    cs: np.ndarray,
    mode: str,
    seed: int,
    config: Optional[StageConfig] = None,
) -> LoopState:
    """Build the loop state from an evaluated initial design."""
    config = config or StageConfig()
    config.validate()
    _check_mode(problem, mode)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    cs = np.asarray(cs, dtype=float).reshape(xs.shape[0], problem.dim_c)
    dataset = Dataset(xs=xs, ys=ys, cs=cs)
    models = _fit_models(problem, dataset, mode, seed, 0)
    return LoopState(
        problem=problem,
        dataset=dataset,
        t=0,
        models=models,
        mode=mode,
        rng_seed=seed,
        config=config,
    )


def sampled_front(
    state: LoopState,
    paths: Optional[Sequence[SampledPath]] = None,
    constraint_paths: Optional[Sequence[SampledPath]] = None,
) -> SampledFront:
    """Front of one joint posterior draw, solved in normalized input space.

    `paths`/`constraint_paths` override the Thompson draws (used by tests
    with deterministic stand-ins); by default one path per output is drawn
    from the current models.
    """
    if len(state.dataset) < 2:
        raise ValueError("need at least 2 observations per output")
    problem, config = state.problem, state.config
    m = problem.dim_y
    if paths is None:
        paths = [
            sample_path(state.models[i], config.rff_features, _seed_for(state.rng_seed, state.t, _TAG_PATH, i))
            for i in range(m)
        ]
    if state.mode == "constrained" and constraint_paths is None:
        constraint_paths = [
            sample_path(
                state.models[m + i],
                config.rff_features,
                _seed_for(state.rng_seed, state.t, _TAG_PATH, m + i),
            )
            for i in range(problem.dim_c)
        ]

    if state.mode == "preference":
        pref_a = problem.preference[:, 0]
        pref_b = problem.preference[:, 1]

    def batch(xs_norm):
        objs = np.column_stack([p(xs_norm) for p in paths])
        if state.mode == "constrained":
            gs = np.column_stack([p(xs_norm) for p in constraint_paths])
            viol = np.sum(np.clip(-gs, 0.0, None), axis=1)
        elif state.mode == "preference":
            # Feasible iff all lower bounds hold or all upper bounds hold.
            viol_lower = np.sum(np.clip(pref_a - objs, 0.0, None), axis=1)
            viol_upper = np.sum(np.clip(objs - pref_b, 0.0, None), axis=1)
            viol = np.minimum(viol_lower, viol_upper)
        else:
            viol = np.zeros(xs_norm.shape[0])
        return objs, viol

    unit = np.tile(np.array([[0.0, 1.0]]), (problem.dim_x, 1))
    result = evo.nsga2(
        batch,
        unit,
        pop=config.nsga_pop,
        gens=config.nsga_gens,
        seed=_seed_for(state.rng_seed, state.t, _TAG_NSGA),
    )
    fallback = bool(np.any(result.constraint_violation > 0.0))
    return SampledFront(
        points=result.objectives,
        inputs=_denormalize(problem, result.individuals),
        fallback=fallback,
    )


def maxmin_index(front: np.ndarray, observations: np.ndarray, normalize: bool = False) -> int:
    """Index of the front point farthest from its nearest observation.

    Ties break toward the lowest index. With `normalize`, distances are
    computed after per-objective min-max scaling over both sets combined.
    """
    front = np.atleast_2d(np.asarray(front, dtype=float))
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    if front.shape[0] == 0 or obs.shape[0] == 0:
        raise ValueError("front and observations must be non-empty")
    if normalize:
        both = np.vstack([front, obs])
        lo, hi = both.min(axis=0), both.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        front = (front - lo) / span
        obs = (obs - lo) / span
    gaps = np.min(cdist(front, obs), axis=1)
    return int(np.argmax(gaps))


def select_target(front: np.ndarray, observations: np.ndarray, normalize: bool = False) -> np.ndarray:
    """The front point at the center of the largest under-explored gap."""
    front = np.atleast_2d(np.asarray(front, dtype=float))
    return front[maxmin_index(front, observations, normalize=normalize)]


def select_objective(
    t: int,
    m: int,
    strategy: str = "round_robin",
    rng: Optional[np.random.Generator] = None,
    target: Optional[np.ndarray] = None,
    observations: Optional[np.ndarray] = None,
) -> int:
    """Pick the primary objective for iteration t. Returns a 1-based index.

    round_robin: k = (t mod m) + 1. random: uniform draw. feasible: the
    objective whose target coordinate is closest to an observed coordinate,
    i.e. the most crowded dimension, maximizing the room the remaining
    thresholds leave to the acquisition.
    """
    if m < 2:
        raise ValueError("need at least two objectives")
    if strategy == "round_robin":
        return (t % m) + 1
    if strategy == "random":
        if rng is None:
            raise ValueError("random schedule needs an rng")
        return int(rng.integers(1, m + 1))
    if strategy == "feasible":
        if target is None or observations is None:
            raise ValueError("feasible schedule needs target and observations")
        obs = np.atleast_2d(np.asarray(observations, dtype=float))
        per_coord = np.min(np.abs(obs - np.asarray(target, dtype=float)), axis=0)
        return int(np.argmin(per_coord)) + 1
    raise ConfigError(f"unknown schedule {strategy!r}")


def build_subproblem(
    y_target: np.ndarray,
    observed_y: np.ndarray,
    k: int,
    config: StageConfig,
    mode: str,
    observed_c: Optional[np.ndarray] = None,
    preference: Optional[np.ndarray] = None,
    epsilons_override: Optional[np.ndarray] = None,
) -> EpsilonSubproblem:
    """Turn a target point into thresholds and an incumbent.

    Each non-primary threshold is the target coordinate, clipped down to the
    best observed value of that coordinate when no observation exceeds it
    (so the thresholds alone can never make the observed-feasible set
    empty). Constrained mode appends the external thresholds at zero;
    preference mode attaches the region-of-interest corner pair.
    """
    y_target = np.asarray(y_target, dtype=float).ravel()
    observed_y = np.atleast_2d(np.asarray(observed_y, dtype=float))
    m = y_target.shape[0]
    k0 = k - 1
    others = [j for j in range(m) if j != k0]

    if epsilons_override is not None:
        epsilons = np.asarray(epsilons_override, dtype=float)
    else:
        epsilons = np.empty(m - 1)
        for pos, j in enumerate(others):
            best = np.max(observed_y[:, j])
            epsilons[pos] = y_target[j] if np.any(observed_y[:, j] > y_target[j]) else best

    external = np.zeros(observed_c.shape[1]) if mode == "constrained" else np.zeros(0)
    bounds = None
    if mode == "preference":
        if preference is None:
            raise ConfigError("preference mode needs a preference box")
        bounds = (preference[:, 0].copy(), preference[:, 1].copy())

    satisfied = np.ones(observed_y.shape[0], dtype=bool)
    for pos, j in enumerate(others):
        satisfied &= observed_y[:, j] >= epsilons[pos]
    if mode == "constrained":
        satisfied &= np.all(observed_c >= 0.0, axis=1)
    if bounds is not None and others:
        in_lower = np.all(observed_y[:, others] >= bounds[0][others], axis=1)
        in_upper = np.all(observed_y[:, others] <= bounds[1][others], axis=1)
        satisfied &= in_lower | in_upper

    incumbent = None
    if np.any(satisfied):
        augmented = observed_y[:, k0] + config.s * np.sum(observed_y[:, others], axis=1)
        incumbent = float(np.max(augmented[satisfied]))

    return EpsilonSubproblem(
        k=k,
        epsilons=epsilons,
        s=config.s,
        external_thresholds=external,
        preference_bounds=bounds,
        incumbent=incumbent,
    )


def _lexicographic_epsilons(rng, observed_y, k0):
    """Random thresholds validated objective-by-objective (f1, f2, ...).

    A random coordinate inside the observed front's bounding box replaces the
    maxmin target; each threshold is clipped so that at least one observation
    satisfies all thresholds fixed so far, keeping the constraint set
    jointly reachable.
    """
    front = pareto_filter(observed_y)
    lo, hi = front.min(axis=0), front.max(axis=0)
    target = rng.uniform(lo, hi)
    m = observed_y.shape[1]
    epsilons = []
    pool = observed_y
    for j in range(m):
        if j == k0:
            continue
        if not np.any(pool[:, j] >= target[j]):
            target[j] = np.max(pool[:, j])
        pool = pool[pool[:, j] >= target[j]]
        epsilons.append(target[j])
    return np.array(epsilons)


def step(state: LoopState) -> tuple[np.ndarray, LoopState]:
    """Run one loop iteration: pick, evaluate and absorb the next query."""
    problem, config = state.problem, state.config
    m = problem.dim_y
    flags: list[str] = []

    front = sampled_front(state)
    if front.fallback:
        flags.append("fallback_front")
    elif state.mode == "preference":
        flags.append("roi_target")

    observed_y = state.dataset.ys
    if state.mode == "constrained":
        feasible = state.dataset.feasible_mask()
        target_obs = observed_y[feasible] if np.any(feasible) else observed_y
    else:
        target_obs = observed_y

    schedule_rng = np.random.default_rng(_seed_for(state.rng_seed, state.t, _TAG_SCHEDULE))
    target_rng = np.random.default_rng(_seed_for(state.rng_seed, state.t, _TAG_TARGET))

    epsilons_override = None
    if config.target_rule == "maxmin":
        idx = maxmin_index(front.points, target_obs, normalize=config.maxmin_normalize)
        y_target = front.points[idx]
        k = select_objective(
            state.t, m, config.objective_schedule, schedule_rng, y_target, observed_y
        )
    else:
        k = select_objective(state.t, m, config.objective_schedule, schedule_rng)
        epsilons_override = _lexicographic_epsilons(target_rng, observed_y, k - 1)
        y_target = np.zeros(m)  # thresholds come from the override

    sub = build_subproblem(
        y_target,
        observed_y,
        k,
        config,
        state.mode,
        observed_c=state.dataset.cs,
        preference=problem.preference,
        epsilons_override=epsilons_override,
    )

    if config.query_rule == "direct_sample":
        x_next = front.inputs[idx]
    else:
        unit = np.tile(np.array([[0.0, 1.0]]), (problem.dim_x, 1))
        x_norm = maximize_cei(
            sub,
            state.models,
            unit,
            n_starts=config.cei_starts,
            seed=_seed_for(state.rng_seed, state.t, _TAG_CEI),
        )
        x_next = _denormalize(problem, x_norm)

    x_next = np.clip(x_next, problem.bounds[:, 0], problem.bounds[:, 1])
    y, g = evaluate(problem, x_next)
    dataset = state.dataset.append(x_next, y, g)
    new_t = state.t + 1
    models = _fit_models(problem, dataset, state.mode, state.rng_seed, new_t)
    new_state = replace(
        state, dataset=dataset, t=new_t, models=models, flags=tuple(flags)
    )
    return x_next, new_state

"""Benchmark problem definitions and the problem registry.

Every problem is exposed in maximization form: classical minimization
benchmarks (ZDT, DTLZ, MW, CONSTR) are negated once here, at the problem
boundary, so that larger objective values are always better downstream.
Constraint values follow the `g(x) >= 0 is feasible` convention.

Evaluation is pure and stateless, so problem objects are safe to share
across worker processes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError, DomainError, FrontUnavailableError
from .metrics import pareto_filter

EvalFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
FrontFn = Callable[[int], np.ndarray]

#: Default directory for cached fronts of problems without a closed form.
DEFAULT_CACHE_DIR = Path("reference_fronts")


@dataclass(frozen=True)
class ProblemSpec:
    """A black-box vector objective with box bounds and optional constraints.

    Args:
        name: Registry key used by the CLI and config files.
        dim_x: Input dimension d.
        dim_y: Objective count m (all maximized).
        dim_c: Constraint count c, 0 when unconstrained.
        bounds (2D-array, shape=(d, 2)): Per-dimension (lo, hi) box bounds.
        eval_fn: Deterministic map x -> (y in R^m, g in R^c).
        reference_point (1D-array, shape=(m,)): Hypervolume reference point.
        preference (2D-array, shape=(m, 2) or None): Objective-space box
            corners (a_i, b_i) for preference-aware runs.
        front_fn: Closed-form front sampler, None when only a cached
            evolutionary front is available.
    """

    name: str
    dim_x: int
    dim_y: int
    dim_c: int
    bounds: np.ndarray
    eval_fn: EvalFn = field(repr=False)
    reference_point: np.ndarray
    preference: Optional[np.ndarray] = None
    front_fn: Optional[FrontFn] = field(default=None, repr=False)


@dataclass(frozen=True)
class ReferenceFront:
    """A finite approximation of a problem's true Pareto front.

    `provenance` is "analytic" for closed-form fronts and
    "cached-evolutionary" for fronts produced by a long NSGA-II run.
    """

    points: np.ndarray
    provenance: str


def evaluate(problem: ProblemSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a problem at a single in-bounds point.

    Args:
        problem: Problem to evaluate.
        x (1D-array, shape=(d,)): Input point.

    Returns:
        Tuple (y, g) where y has shape (m,) in maximization form and g has
        shape (c,) with g >= 0 meaning feasible.

    Raises:
        DomainError: If x is outside the problem bounds.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != problem.dim_x:
        raise DomainError(
            f"{problem.name}: expected {problem.dim_x} inputs, got {x.shape[0]}"
        )
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"{problem.name}: point {x} outside bounds")
    y, g = problem.eval_fn(x)
    y = np.asarray(y, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    return y, g


def true_front(
    problem: ProblemSpec, n: int, cache_dir: Path | str | None = None
) -> ReferenceFront:
    """Return n points of the problem's reference front.

    ZDT/DTLZ-family problems are sampled from their closed-form front
    expression. Problems without a closed form fall back to the cached front
    written by the harness (`reference-front` command).

    Raises:
        FrontUnavailableError: No analytic form and no cache file.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if problem.front_fn is not None:
        return ReferenceFront(points=problem.front_fn(n), provenance="analytic")
    cache_dir = Path(cache_dir) if cache_dir is not None else DEFAULT_CACHE_DIR
    path = front_cache_path(problem.name, cache_dir)
    if not path.is_file():
        raise FrontUnavailableError(
            f"{problem.name} has no analytic front and no cache at {path}; "
            "generate one with the harness reference-front command"
        )
    return ReferenceFront(points=read_front_csv(path), provenance="cached-evolutionary")


def front_cache_path(name: str, cache_dir: Path | str) -> Path:
    return Path(cache_dir) / f"{name}_front.csv"


def write_front_csv(points: np.ndarray, path: Path | str) -> None:
    """Write a front as CSV, one point per row, header f1..fm.

    The write is atomic (temp file + rename) so concurrent readers never see
    a partial cache.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = pts.shape[1]
    lines = [",".join(f"f{i + 1}" for i in range(m))]
    for row in pts:
        lines.append(",".join(f"{v:.10g}" for v in row))
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def read_front_csv(path: Path | str) -> np.ndarray:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("f1"):
        raise FrontUnavailableError(f"{path} is not a front CSV")
    return np.array([[float(v) for v in line.split(",")] for line in text[1:]])


# ---------------------------------------------------------------------------
# Benchmark evaluation functions (minimization sources, negated on return)
# ---------------------------------------------------------------------------

_EMPTY = np.zeros(0)


def _zdt_g(x: np.ndarray) -> float:
    return 1.0 + 9.0 * float(np.sum(x[1:])) / (len(x) - 1)


def _zdt1(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f1 = float(x[0])
    g = _zdt_g(x)
    f2 = g * (1.0 - np.sqrt(f1 / g))
    return -np.array([f1, f2]), _EMPTY


def _zdt2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f1 = float(x[0])
    g = _zdt_g(x)
    f2 = g * (1.0 - (f1 / g) ** 2)
    return -np.array([f1, f2]), _EMPTY


def _zdt3(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f1 = float(x[0])
    g = _zdt_g(x)
    f2 = g * (1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1))
    return -np.array([f1, f2]), _EMPTY


def _dtlz2(x: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    g = float(np.sum((x[m - 1 :] - 0.5) ** 2))
    f = np.full(m, 1.0 + g)
    for i in range(m):
        f[i] *= np.prod(np.cos(x[: m - 1 - i] * np.pi / 2.0))
        if i > 0:
            f[i] *= np.sin(x[m - 1 - i] * np.pi / 2.0)
    return -f, _EMPTY


def _dtlz7(x: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    g = 1.0 + 9.0 * float(np.mean(x[m - 1 :]))
    f = np.empty(m)
    f[: m - 1] = x[: m - 1]
    h = m - np.sum(f[: m - 1] / (1.0 + g) * (1.0 + np.sin(3.0 * np.pi * f[: m - 1])))
    f[m - 1] = (1.0 + g) * h
    return -f, _EMPTY


def _mw7(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Ring-shaped feasible band around the unit circle (MW suite, g3 distance).
    terms = x[2:] + (x[1:-1] - 0.5) ** 2 - 1.0
    g = 1.0 + 2.0 * float(np.sum(terms**2))
    f1 = g * float(x[0])
    f2 = g * np.sqrt(max(0.0, 1.0 - float(x[0]) ** 2))
    r2 = f1**2 + f2**2
    ang = np.arctan2(f2, f1)
    c1 = (1.2 + 0.4 * np.sin(4.0 * ang) ** 4) ** 2 - r2
    c2 = r2 - (1.15 - 0.2 * np.sin(4.0 * ang) ** 4) ** 2
    return -np.array([f1, f2]), np.array([c1, c2])


def _constr(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f1 = float(x[0])
    f2 = (1.0 + float(x[1])) / f1
    g1 = float(x[1]) + 9.0 * f1 - 6.0
    g2 = -float(x[1]) + 9.0 * f1 - 1.0
    return -np.array([f1, f2]), np.array([g1, g2])


# ---------------------------------------------------------------------------
# Closed-form front samplers (negated, mutually non-dominated)
# ---------------------------------------------------------------------------


def _zdt1_front(n: int) -> np.ndarray:
    # Uniform in sqrt(f1) so the sample is uniform along f2 as well.
    s = np.linspace(0.0, 1.0, n)
    return -np.column_stack([s**2, 1.0 - s])


def _zdt2_front(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    return -np.column_stack([t, 1.0 - t**2])


def _zdt3_front(n: int) -> np.ndarray:
    # The front is discontinuous: sample g=1 densely, keep the non-dominated
    # pieces, then thin to n points.
    t = np.linspace(0.0, 1.0, max(4096, 8 * n))
    f2 = 1.0 - np.sqrt(t) - t * np.sin(10.0 * np.pi * t)
    pts = pareto_filter(-np.column_stack([t, f2]))
    return _thin(pts, n)


def _dtlz2_front(n: int, m: int) -> np.ndarray:
    # Uniform directions on the positive orthant of the unit sphere.
    rng = np.random.default_rng(20240 + m)
    v = np.abs(rng.standard_normal((n, m)))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return -v


def _dtlz7_front(n: int, m: int) -> np.ndarray:
    # Rejection from the closed form at g=1: sample the free objectives,
    # evaluate the last one, and keep the non-dominated subset.
    rng = np.random.default_rng(20470 + m)
    k = max(4096, 8 * n)
    fm1 = rng.uniform(0.0, 1.0, size=(k, m - 1))
    h = m - np.sum(fm1 / 2.0 * (1.0 + np.sin(3.0 * np.pi * fm1)), axis=1)
    pts = pareto_filter(-np.column_stack([fm1, 2.0 * h]))
    return _thin(pts, n)


def _thin(points: np.ndarray, n: int) -> np.ndarray:
    if points.shape[0] <= n:
        return points
    order = np.argsort(points[:, 0], kind="stable")
    idx = np.unique(np.round(np.linspace(0, points.shape[0] - 1, n)).astype(int))
    return points[order][idx]


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


def _box(d: int, lo: float, hi: float) -> np.ndarray:
    return np.tile(np.array([[lo, hi]], dtype=float), (d, 1))


def _zdt_spec(name, d, fn, front, reference, preference=None):
    return ProblemSpec(
        name=name,
        dim_x=d,
        dim_y=2,
        dim_c=0,
        bounds=_box(d, 0.0, 1.0),
        eval_fn=fn,
        reference_point=np.asarray(reference, dtype=float),
        preference=None if preference is None else np.asarray(preference, dtype=float),
        front_fn=front,
    )


def _builtin_problems() -> list[ProblemSpec]:
    problems = [
        _zdt_spec("ZDT1", 10, _zdt1, _zdt1_front, (-11.0, -11.0)),
        # Reduced-dimension variant for fast end-to-end checks.
        _zdt_spec("ZDT1-d6", 6, _zdt1, _zdt1_front, (-11.0, -11.0)),
        _zdt_spec("ZDT2", 8, _zdt2, _zdt2_front, (-11.0, -11.0)),
        _zdt_spec(
            "ZDT3",
            2,
            _zdt3,
            _zdt3_front,
            (-1.0, -1.0),
            preference=[(-0.7, -0.2), (-0.6, -0.4)],
        ),
        ProblemSpec(
            name="DTLZ2",
            dim_x=6,
            dim_y=5,
            dim_c=0,
            bounds=_box(6, 0.0, 1.0),
            eval_fn=partial(_dtlz2, m=5),
            reference_point=np.array([-0.8442, -0.8999, -0.8358, -0.8710, -0.8553]),
            preference=np.column_stack([np.full(5, -0.4), np.full(5, -0.2)]),
            front_fn=partial(_dtlz2_front, m=5),
        ),
        ProblemSpec(
            name="DTLZ7",
            dim_x=6,
            dim_y=5,
            dim_c=0,
            bounds=_box(6, 0.0, 1.0),
            eval_fn=partial(_dtlz7, m=5),
            reference_point=np.full(5, -1.1),
            front_fn=partial(_dtlz7_front, m=5),
        ),
        ProblemSpec(
            name="MW7",
            dim_x=4,
            dim_y=2,
            dim_c=2,
            bounds=_box(4, 0.0, 1.0),
            eval_fn=_mw7,
            reference_point=np.array([-1.2, -1.2]),
        ),
        ProblemSpec(
            name="CONSTR",
            dim_x=2,
            dim_y=2,
            dim_c=2,
            bounds=np.array([[0.1, 1.0], [0.0, 5.0]]),
            eval_fn=_constr,
            reference_point=np.array([-10.0, -10.0]),
        ),
    ]
    return problems


_REGISTRY: dict[str, ProblemSpec] = {p.name: p for p in _builtin_problems()}


def register_problem(spec: ProblemSpec) -> None:
    """Add a problem to the registry (extension point for extra packs)."""
    _REGISTRY[spec.name] = spec


def catalog() -> list[ProblemSpec]:
    """All registered problems, in registration order."""
    return list(_REGISTRY.values())


def get_problem(name: str) -> ProblemSpec:
    """Look up a problem by name (case-insensitive).

    Raises:
        ConfigError: Unknown problem name.
    """
    if name in _REGISTRY:
        return _REGISTRY[name]
    for key, spec in _REGISTRY.items():
        if key.lower() == name.lower():
            return spec
    raise ConfigError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}")


def with_preference(problem: ProblemSpec, lower, upper) -> ProblemSpec:
    """Copy of `problem` with an explicit preference box (both corners)."""
    a = np.asarray(lower, dtype=float).ravel()
    b = np.asarray(upper, dtype=float).ravel()
    if a.shape[0] != problem.dim_y or b.shape[0] != problem.dim_y:
        raise ConfigError("preference corners must have one entry per objective")
    if np.any(a >= b):
        raise ConfigError("preference box requires a_i < b_i componentwise")
    return replace(problem, preference=np.column_stack([a, b]))

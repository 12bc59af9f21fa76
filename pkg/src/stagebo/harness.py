"""Run orchestration: configs, baselines, metrics records and persistence.

A run evaluates one problem with one algorithm over several seeds. Every
seed starts from a scrambled low-discrepancy initial design of `init`
points, then queries one point per iteration until `budget` total
evaluations. After each iteration a RunRecord row is emitted with the five
front-quality metrics. Identical (config, seed) pairs produce identical
records; wall-clock timing is the only nondeterministic column and can be
disabled with `timing=false` when byte-identical outputs are required.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.stats import qmc

from . import stage
from .evo import nsga2
from .exceptions import AlignmentError, ConfigError, FrontUnavailableError
from .metrics import (
    ParetoArchive,
    feasible_ratio,
    fill_distance,
    hypervolume,
    igd,
    igd_plus,
    pareto_filter,
)
from .problems import (
    DEFAULT_CACHE_DIR,
    ProblemSpec,
    ReferenceFront,
    evaluate,
    front_cache_path,
    get_problem,
    read_front_csv,
    true_front,
    with_preference,
    write_front_csv,
)

ALGORITHMS = ("stage", "random", "sobol")
REFERENCE_POP = 500
REFERENCE_GENS = 500
REFERENCE_SEED = 2024

CSV_HEADER = "seed,iteration,hv,igd,igd_plus,fill_distance,feasible_ratio,wall_seconds,flags"

#: Schema of the JSON export (an array of per-iteration records).
RECORD_JSON_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "seed": {"type": "integer"},
            "iteration": {"type": "integer"},
            "hv": {"type": ["number", "null"]},
            "igd": {"type": ["number", "null"]},
            "igd_plus": {"type": ["number", "null"]},
            "fill_distance": {"type": ["number", "null"]},
            "feasible_ratio": {"type": "number"},
            "wall_seconds": {"type": "number"},
            "flags": {"type": "string"},
        },
        "required": [
            "seed",
            "iteration",
            "hv",
            "igd",
            "igd_plus",
            "fill_distance",
            "feasible_ratio",
            "wall_seconds",
            "flags",
        ],
        "additionalProperties": False,
    },
}

METRIC_COLUMNS = ("hv", "igd", "igd_plus", "fill_distance", "feasible_ratio", "wall_seconds")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    iteration: int
    hv: float
    igd: float
    igd_plus: float
    fill_distance: float
    feasible_ratio: float
    wall_seconds: float
    flags: str = ""


@dataclass(frozen=True)
class RunConfig:
    problem: str
    mode: str = "unconstrained"
    budget: int = 60
    seeds: tuple[int, ...] = (0,)
    init: Optional[int] = None
    stage: stage.StageConfig = field(default_factory=stage.StageConfig)
    algorithm: str = "stage"
    out_dir: Optional[str] = None
    metrics_every: int = 1
    timing: bool = True
    front_points: int = 500
    cache_dir: Optional[str] = None
    roi_lower: Optional[tuple[float, ...]] = None
    roi_upper: Optional[tuple[float, ...]] = None


def default_init_count(dim_x: int) -> int:
    return 2 * (dim_x + 1)


def resolve_problem(config: RunConfig) -> ProblemSpec:
    problem = get_problem(config.problem)
    if config.roi_lower is not None or config.roi_upper is not None:
        if config.roi_lower is None or config.roi_upper is None:
            raise ConfigError("both roi_lower and roi_upper must be given")
        problem = with_preference(problem, config.roi_lower, config.roi_upper)
    return problem


def validate_config(config: RunConfig) -> tuple[ProblemSpec, int]:
    """Check a config against the catalog; raises ConfigError before any
    evaluation happens."""
    problem = resolve_problem(config)
    stage._check_mode(problem, config.mode)
    config.stage.validate()
    if config.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {config.algorithm!r}")
    if not config.seeds:
        raise ConfigError("seeds must be non-empty")
    if any(s < 0 for s in config.seeds):
        raise ConfigError("seeds must be non-negative")
    n_init = config.init if config.init is not None else default_init_count(problem.dim_x)
    if n_init < 2:
        raise ConfigError("init must be at least 2")
    if config.budget <= n_init:
        raise ConfigError(f"budget ({config.budget}) must exceed init ({n_init})")
    if config.metrics_every < 1:
        raise ConfigError("metrics_every must be >= 1")
    return problem, n_init


def _sobol_points(d: int, n: int, seed: int) -> np.ndarray:
    """First n points of a scrambled Sobol stream (drawn as a power of two)."""
    if n == 0:
        return np.zeros((0, d))
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    return sampler.random(2 ** math.ceil(math.log2(max(n, 2))))[:n]


def _scale(problem: ProblemSpec, unit: np.ndarray) -> np.ndarray:
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    return lo + unit * (hi - lo)


def _metrics_reference(problem: ProblemSpec, config: RunConfig) -> np.ndarray:
    """Reference front used for IGD/IGD+/FD; ROI-clipped in preference mode."""
    ref = reference_front(problem, config.front_points, cache_dir=config.cache_dir).points
    if config.mode == "preference" and problem.preference is not None:
        a, b = problem.preference[:, 0], problem.preference[:, 1]
        inside = np.all(ref >= a, axis=1) & np.all(ref <= b, axis=1)
        if np.any(inside):
            ref = ref[inside]
    return ref


def _record(problem, dataset, ref_points, seed, iteration, wall, flags):
    mask = dataset.feasible_mask()
    archive = ParetoArchive(points=dataset.ys, feasible_mask=mask)
    pts = dataset.ys[mask]
    row_flags = list(flags)
    if pts.shape[0] == 0:
        row_flags.append("no_feasible")
        hv_val = 0.0
        igd_val = igdp_val = fd_val = float("nan")
    else:
        hv_val = hypervolume(pareto_filter(pts), problem.reference_point)
        igd_val = igd(pts, ref_points)
        igdp_val = igd_plus(pts, ref_points)
        fd_val = fill_distance(pts, ref_points)
    return RunRecord(
        seed=seed,
        iteration=iteration,
        hv=hv_val,
        igd=igd_val,
        igd_plus=igdp_val,
        fill_distance=fd_val,
        feasible_ratio=feasible_ratio(archive),
        wall_seconds=wall,
        flags=";".join(row_flags),
    )


def run_seed(config: RunConfig, seed: int) -> tuple[list[RunRecord], stage.Dataset]:
    """Execute one seed; returns its records and the final dataset."""
    problem, n_init = validate_config(config)
    ref_points = _metrics_reference(problem, config)
    n_steps = config.budget - n_init

    if config.algorithm == "sobol":
        all_points = _scale(problem, _sobol_points(problem.dim_x, config.budget, seed))
        init_x = all_points[:n_init]
        future_x = all_points[n_init:]
    else:
        init_x = _scale(problem, _sobol_points(problem.dim_x, n_init, seed))
        future_x = None

    evals = [evaluate(problem, x) for x in init_x]
    ys = np.array([e[0] for e in evals])
    cs = np.array([e[1] for e in evals]).reshape(n_init, problem.dim_c)
    records: list[RunRecord] = []

    if config.algorithm == "stage":
        state = stage.initialize(problem, init_x, ys, cs, config.mode, seed, config.stage)
        for t in range(1, n_steps + 1):
            started = time.perf_counter()
            _, state = stage.step(state)
            wall = time.perf_counter() - started if config.timing else 0.0
            if t % config.metrics_every == 0:
                records.append(
                    _record(problem, state.dataset, ref_points, seed, t, wall, state.flags)
                )
        return records, state.dataset

    rng = np.random.default_rng(np.random.SeedSequence([seed, 7001]))
    dataset = stage.Dataset(xs=init_x, ys=ys, cs=cs)
    for t in range(1, n_steps + 1):
        started = time.perf_counter()
        if config.algorithm == "random":
            x = rng.uniform(problem.bounds[:, 0], problem.bounds[:, 1])
        else:
            x = future_x[t - 1]
        y, g = evaluate(problem, x)
        dataset = dataset.append(x, y, g)
        wall = time.perf_counter() - started if config.timing else 0.0
        if t % config.metrics_every == 0:
            records.append(_record(problem, dataset, ref_points, seed, t, wall, ()))
    return records, dataset


def run(config: RunConfig, jobs: int = 1) -> Iterator[RunRecord]:
    """Stream RunRecords for all seeds (in seed order).

    Sampled-path fronts and the evolutionary solver consume no evaluation
    budget; exactly `budget` true-function evaluations happen per seed.
    """
    problem, _ = validate_config(config)
    if jobs <= 1:
        for seed in config.seeds:
            records, _ = run_seed(config, seed)
            yield from records
        return
    _metrics_reference(problem, config)  # warm the front cache once
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_seed, config, seed) for seed in config.seeds]
        for future in futures:
            yield from future.result()[0]


def execute(config: RunConfig, jobs: int = 1) -> dict[str, Path]:
    """Run all seeds and persist records plus per-seed datasets.

    Returns the mapping of written file labels to paths.
    """
    problem, _ = validate_config(config)
    out_dir = Path(config.out_dir) if config.out_dir else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{problem.name}_{config.mode}_{config.algorithm}"

    if jobs <= 1:
        results = [run_seed(config, seed) for seed in config.seeds]
    else:
        _metrics_reference(problem, config)  # warm the front cache once
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_seed, config, seed) for seed in config.seeds]
            results = [f.result() for f in futures]

    records = [rec for recs, _ in results for rec in recs]
    paths: dict[str, Path] = {}
    records_path = out_dir / f"{prefix}_records.csv"
    export(records, "csv", records_path)
    paths["records"] = records_path
    for seed, (_, dataset) in zip(config.seeds, results):
        data_path = out_dir / f"{prefix}_seed{seed}_data.csv"
        _write_dataset_csv(dataset, data_path)
        paths[f"data_seed{seed}"] = data_path
    return paths


def _write_dataset_csv(dataset: stage.Dataset, path: Path) -> None:
    d = dataset.xs.shape[1]
    m = dataset.ys.shape[1]
    c = dataset.cs.shape[1]
    header = (
        [f"x{i + 1}" for i in range(d)]
        + [f"y{i + 1}" for i in range(m)]
        + [f"g{i + 1}" for i in range(c)]
    )
    lines = [",".join(header)]
    for i in range(len(dataset)):
        row = np.concatenate([dataset.xs[i], dataset.ys[i], dataset.cs[i]])
        lines.append(",".join(f"{v:.10g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Reference fronts
# ---------------------------------------------------------------------------


def reference_front(
    problem: ProblemSpec, budget: int = 500, cache_dir: Optional[str] = None
) -> ReferenceFront:
    """Reference front for metric computation.

    Analytic when the problem has a closed form. Otherwise a cached front
    from a one-off long NSGA-II run on the true problem; the cache file is
    written on first use and reloaded afterwards (regenerated if corrupt).
    """
    if problem.front_fn is not None:
        return true_front(problem, budget)
    cache = Path(cache_dir) if cache_dir is not None else DEFAULT_CACHE_DIR
    path = front_cache_path(problem.name, cache)
    if path.is_file():
        try:
            pts = read_front_csv(path)
            if pts.shape[0] >= 2 and pts.shape[1] == problem.dim_y and np.all(np.isfinite(pts)):
                return ReferenceFront(points=pts, provenance="cached-evolutionary")
        except (ValueError, FrontUnavailableError):
            pass  # fall through and regenerate

    def batch(xs):
        rows = [evaluate(problem, x) for x in xs]
        objs = np.array([r[0] for r in rows])
        gs = np.array([r[1] for r in rows]).reshape(len(rows), problem.dim_c)
        return objs, np.sum(np.clip(-gs, 0.0, None), axis=1)

    pop = nsga2(batch, problem.bounds, REFERENCE_POP, REFERENCE_GENS, REFERENCE_SEED)
    feasible = pop.constraint_violation <= 0.0
    pts = pop.objectives[feasible] if np.any(feasible) else pop.objectives
    pts = pareto_filter(pts)
    write_front_csv(pts, path)
    # Use the round-tripped values so metrics are identical whether the
    # front was just generated or loaded from the cache.
    return ReferenceFront(points=read_front_csv(path), provenance="cached-evolutionary")


# ---------------------------------------------------------------------------
# Export / import / summaries
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def export(records: list[RunRecord], fmt: str, path: Path | str) -> Path:
    """Write records as CSV or JSON (floats at 10 significant digits)."""
    if not records:
        raise ValueError("no records to export")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in records:
            lines.append(
                f"{r.seed},{r.iteration},{_fmt(r.hv)},{_fmt(r.igd)},{_fmt(r.igd_plus)},"
                f"{_fmt(r.fill_distance)},{_fmt(r.feasible_ratio)},{_fmt(r.wall_seconds)},{r.flags}"
            )
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        entries = []
        for r in records:
            fields = [
                f'"seed": {r.seed}',
                f'"iteration": {r.iteration}',
                f'"hv": {_json_number(r.hv)}',
                f'"igd": {_json_number(r.igd)}',
                f'"igd_plus": {_json_number(r.igd_plus)}',
                f'"fill_distance": {_json_number(r.fill_distance)}',
                f'"feasible_ratio": {_json_number(r.feasible_ratio)}',
                f'"wall_seconds": {_json_number(r.wall_seconds)}',
                f'"flags": {json.dumps(r.flags)}',
            ]
            entries.append("  {" + ", ".join(fields) + "}")
        path.write_text("[\n" + ",\n".join(entries) + "\n]\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def _json_number(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    return _fmt(v)


def parse_records_csv(path: Path | str) -> list[RunRecord]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path} is not a records CSV")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        records.append(
            RunRecord(
                seed=int(parts[0]),
                iteration=int(parts[1]),
                hv=float(parts[2]),
                igd=float(parts[3]),
                igd_plus=float(parts[4]),
                fill_distance=float(parts[5]),
                feasible_ratio=float(parts[6]),
                wall_seconds=float(parts[7]),
                flags=parts[8] if len(parts) > 8 else "",
            )
        )
    return records


def summarize_records(records: list[RunRecord]) -> dict:
    """Per-iteration mean and standard error of each metric across seeds."""
    seeds = sorted({r.seed for r in records})
    if len(seeds) < 2:
        raise ValueError("need records from at least 2 seeds")
    by_seed = {s: sorted((r for r in records if r.seed == s), key=lambda r: r.iteration) for s in seeds}
    grids = [tuple(r.iteration for r in rows) for rows in by_seed.values()]
    if len(set(grids)) != 1:
        raise AlignmentError("seeds have mismatched iteration grids")
    iterations = np.array(grids[0])
    table: dict[str, np.ndarray] = {"iteration": iterations}
    for metric in METRIC_COLUMNS:
        values = np.array([[getattr(r, metric) for r in by_seed[s]] for s in seeds])
        table[f"{metric}_mean"] = values.mean(axis=0)
        table[f"{metric}_se"] = values.std(axis=0, ddof=1) / np.sqrt(len(seeds))
    return table


def summarize(out_dir: Path | str) -> dict[str, dict]:
    """Summarize every records CSV in a directory.

    Writes `<stem>_summary.csv` plus a gnuplot-friendly `<stem>_summary.dat`
    next to each records file and returns the tables keyed by stem.
    """
    out_dir = Path(out_dir)
    tables = {}
    for records_path in sorted(out_dir.glob("*_records.csv")):
        table = summarize_records(parse_records_csv(records_path))
        stem = records_path.stem
        columns = list(table.keys())
        rows = np.column_stack([table[c] for c in columns])
        csv_lines = [",".join(columns)]
        dat_lines = ["# " + " ".join(columns)]
        for row in rows:
            formatted = [f"{int(row[0])}"] + [_fmt(v) for v in row[1:]]
            csv_lines.append(",".join(formatted))
            dat_lines.append(" ".join(formatted))
        (out_dir / f"{stem}_summary.csv").write_text("\n".join(csv_lines) + "\n")
        (out_dir / f"{stem}_summary.dat").write_text("\n".join(dat_lines) + "\n")
        tables[stem] = table
    return tables

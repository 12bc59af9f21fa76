"""Command-line interface.

Subcommands: `run`, `summarize`, `reference-front`, `list-problems`.
Run settings come from a flat key=value config file and/or CLI flags; flags
win over the file. The only environment override is STAGEBO_OUT_DIR for the
output directory. Exit codes: 0 success, 2 configuration error, 1 runtime
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import harness, stage
from .exceptions import ConfigError, StageBoError
from .problems import catalog, get_problem

_STAGE_KEYS = {f.name for f in dataclasses.fields(stage.StageConfig)}


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


def read_config_file(path: Path | str) -> dict[str, str]:
    """Parse a flat `key = value` config file; '#' starts a comment."""
    entries: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def build_run_config(entries: dict[str, str]) -> harness.RunConfig:
    """Assemble a RunConfig from string key/value settings."""
    run_kwargs: dict = {}
    stage_kwargs: dict = {}
    for key, value in entries.items():
        if key in ("seeds", "seed"):
            run_kwargs["seeds"] = _parse_ints(value)
        elif key in ("roi_lower", "roi_upper"):
            run_kwargs[key] = _parse_floats(value)
        elif key == "timing":
            run_kwargs["timing"] = _parse_bool(value)
        elif key in ("budget", "init", "metrics_every", "front_points"):
            run_kwargs[key] = int(value)
        elif key in ("problem", "mode", "algorithm", "out_dir", "cache_dir"):
            run_kwargs[key] = value
        elif key in _STAGE_KEYS:
            if key == "s":
                stage_kwargs[key] = float(value)
            elif key == "maxmin_normalize":
                stage_kwargs[key] = _parse_bool(value)
            elif key in ("nsga_pop", "nsga_gens", "cei_starts", "rff_features"):
                stage_kwargs[key] = int(value)
            else:
                stage_kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "problem" not in run_kwargs:
        raise ConfigError("a problem name is required (--problem or config file)")
    return harness.RunConfig(stage=stage.StageConfig(**stage_kwargs), **run_kwargs)


def _cmd_run(args: argparse.Namespace) -> int:
    entries: dict[str, str] = {}
    if args.config:
        entries.update(read_config_file(args.config))
    overrides = {
        "problem": args.problem,
        "mode": args.mode,
        "budget": args.budget,
        "seed": args.seed,
        "algorithm": args.algorithm,
        "out_dir": args.out,
        "init": args.init,
        "metrics_every": args.metrics_every,
        "cache_dir": args.cache_dir,
        "roi_lower": args.roi_lower,
        "roi_upper": args.roi_upper,
    }
    for key, value in overrides.items():
        if value is not None:
            entries[key] = str(value)
    if args.no_timing:
        entries["timing"] = "false"
    if "out_dir" not in entries and os.environ.get("STAGEBO_OUT_DIR"):
        entries["out_dir"] = os.environ["STAGEBO_OUT_DIR"]
    config = build_run_config(entries)
    paths = harness.execute(config, jobs=args.jobs)
    for label, path in sorted(paths.items()):
        print(f"{label}: {path}")
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    out_dir = args.out or os.environ.get("STAGEBO_OUT_DIR") or "."
    tables = harness.summarize(out_dir)
    if not tables:
        print(f"no *_records.csv files under {out_dir}", file=sys.stderr)
        return 1
    for stem, table in tables.items():
        last = -1
        print(
            f"{stem}: final igd {table['igd_mean'][last]:.6g} "
            f"+/- {table['igd_se'][last]:.2g}, final hv {table['hv_mean'][last]:.6g} "
            f"+/- {table['hv_se'][last]:.2g}"
        )
    return 0


def _cmd_reference_front(args: argparse.Namespace) -> int:
    problem = get_problem(args.problem)
    front = harness.reference_front(problem, args.points, cache_dir=args.cache_dir)
    print(f"{problem.name}: {front.points.shape[0]} points ({front.provenance})")
    return 0


def _cmd_list_problems(_args: argparse.Namespace) -> int:
    for spec in catalog():
        pref = "yes" if spec.preference is not None else "no"
        ref = "(" + ", ".join(f"{v:g}" for v in spec.reference_point) + ")"
        print(
            f"{spec.name}: d={spec.dim_x} m={spec.dim_y} c={spec.dim_c} "
            f"ref={ref} preference={pref}"
        )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagebo", description="Gap-targeting multi-objective Bayesian optimization"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an optimization benchmark")
    run_p.add_argument("--config", help="flat key=value config file")
    run_p.add_argument("--problem")
    run_p.add_argument("--mode", choices=stage.MODES)
    run_p.add_argument("--budget", type=int)
    run_p.add_argument("--seed", help="comma-separated seed list")
    run_p.add_argument("--algorithm", choices=harness.ALGORITHMS)
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--init", type=int)
    run_p.add_argument("--metrics-every", type=int, dest="metrics_every")
    run_p.add_argument("--cache-dir", dest="cache_dir")
    run_p.add_argument("--roi-lower", dest="roi_lower", help="comma-separated corner")
    run_p.add_argument("--roi-upper", dest="roi_upper", help="comma-separated corner")
    run_p.add_argument("--no-timing", action="store_true", help="record wall_seconds as 0")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    run_p.set_defaults(func=_cmd_run)

    sum_p = sub.add_parser("summarize", help="aggregate records across seeds")
    sum_p.add_argument("--out", help="directory holding *_records.csv files")
    sum_p.set_defaults(func=_cmd_summarize)

    ref_p = sub.add_parser("reference-front", help="build or load a reference front")
    ref_p.add_argument("--problem", required=True)
    ref_p.add_argument("--points", type=int, default=500)
    ref_p.add_argument("--cache-dir", dest="cache_dir")
    ref_p.set_defaults(func=_cmd_reference_front)

    list_p = sub.add_parser("list-problems", help="show the problem catalog")
    list_p.set_defaults(func=_cmd_list_problems)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StageBoError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

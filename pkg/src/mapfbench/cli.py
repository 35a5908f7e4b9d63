"""mapf-bench: generate scenarios, run the portfolio, label, encode,
evaluate selectors, and render reports.

Stages share a layout under --out: instances/ for problem files,
results.csv, labels.csv, images/ + manifest.csv, report.txt / report.csv.
Exit codes: 0 success, 1 usage, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import functools
import hashlib
import logging
import pathlib
import sys
from dataclasses import dataclass, field, fields, replace

from .bmaa import BmaaConfig
from .encoder import encode, export_dataset
from .engine import Budget
from .far import FarConfig, dump_flows
from .grid import GridMap, MapParseError, load_map
from .labels import (
    EvaluationError,
    read_labels,
    read_results,
    write_labels,
    write_results,
)
from .portfolio import PortfolioParams, run_portfolio
from .scenarios import (
    SCENARIO_TYPES,
    GenerationError,
    ProblemInstance,
    generate,
    load_instance,
    write_instance,
)
from .selector import (
    evaluate_selector,
    load_predictions,
    parse_selector,
    prediction_accuracy,
    render_report,
)
from .whca import WhcaConfig

log = logging.getLogger("mapfbench")


class UsageError(Exception):
    pass


@dataclass
class BenchmarkConfig:
    maps: list[str] = field(default_factory=list)
    types: list[str] = field(default_factory=lambda: list(SCENARIO_TYPES))
    agents: int = 300
    count: int = 20
    seed: int = 0
    budget: str = "wall:30"
    jobs: int = 1
    out: str = "bench_out"
    whca_window: int = 8
    whca_replan_interval: int | None = None
    far_reservation: int = 3
    far_wait_threshold: int = 5
    bmaa_lookahead: int = 32
    bmaa_flows: bool = False

    def portfolio_params(self) -> PortfolioParams:
        return PortfolioParams(
            whca=WhcaConfig(self.whca_window, self.whca_replan_interval),
            far=FarConfig(self.far_reservation, self.far_wait_threshold),
            bmaa=BmaaConfig(self.bmaa_lookahead, self.bmaa_flows),
        )

    def parsed_budget(self) -> Budget:
        return Budget.parse(self.budget)


_LIST_KEYS = {"maps", "types"}
_INT_KEYS = {
    "agents", "count", "seed", "jobs", "whca_window", "whca_replan_interval",
    "far_reservation", "far_wait_threshold", "bmaa_lookahead",
}
_BOOL_KEYS = {"bmaa_flows"}


def read_config(path) -> dict:
    """Flat key-value file: one 'key value' per line, # comments."""
    p = pathlib.Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    known = {f.name for f in fields(BenchmarkConfig)}
    out: dict = {}
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        value = value.strip()
        if key not in known or not value:
            raise UsageError(f"{p}:{ln}: bad config line {line!r}")
        if key in _LIST_KEYS:
            out[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in _INT_KEYS:
            out[key] = int(value)
        elif key in _BOOL_KEYS:
            out[key] = value.lower() in ("1", "true", "yes")
        else:
            out[key] = value
    return out


def build_config(args: argparse.Namespace) -> BenchmarkConfig:
    cfg = BenchmarkConfig()
    if args.config:
        cfg = replace(cfg, **read_config(args.config))
    overrides = {}
    for f in fields(BenchmarkConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides.get("whca_replan_interval") == 0:
        overrides["whca_replan_interval"] = None
    return replace(cfg, **overrides)


@functools.lru_cache(maxsize=64)
def _cached_map(path: str) -> GridMap:
    return load_map(path)


def map_registry(cfg: BenchmarkConfig) -> dict[str, GridMap]:
    if not cfg.maps:
        raise UsageError("no maps given; pass --map PATH (repeatable) or 'maps' in the config")
    registry = {}
    for path in cfg.maps:
        grid = _cached_map(str(path))
        registry[grid.name] = grid
    return registry


def derive_seed(base: int, map_name: str, scenario: str, index: int) -> int:
    digest = hashlib.sha256(f"{base}|{map_name}|{scenario}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def load_instances(directory) -> list[ProblemInstance]:
    d = pathlib.Path(directory)
    if not d.is_dir():
        raise UsageError(f"instance directory not found: {d}")
    paths = sorted(d.glob("*.inst"))
    if not paths:
        raise UsageError(f"no .inst files under {d}")
    return [load_instance(p) for p in paths]


# -- subcommands ---------------------------------------------------------------


def cmd_generate(cfg: BenchmarkConfig) -> int:
    registry = map_registry(cfg)
    out_dir = pathlib.Path(cfg.out) / "instances"
    out_dir.mkdir(parents=True, exist_ok=True)
    errors = []
    written = 0
    for name in sorted(registry):
        grid = registry[name]
        for scenario in cfg.types:
            for i in range(cfg.count):
                seed = derive_seed(cfg.seed, name, scenario, i)
                iid = f"{name}__{scenario}__{i:03d}"
                try:
                    inst = generate(grid, scenario, cfg.agents, seed, instance_id=iid)
                except GenerationError as exc:
                    errors.append(str(exc))
                    continue
                with open(out_dir / f"{iid}.inst", "w") as fh:
                    write_instance(inst, fh)
                written += 1
    print(f"generated {written} instances under {out_dir}")
    for err in errors:
        print(f"generation error: {err}", file=sys.stderr)
    return 2 if errors else 0


def _run_one(map_path: str, instance_path: str, params: PortfolioParams, budget: Budget):
    grid = _cached_map(map_path)
    instance = load_instance(instance_path)
    return run_portfolio(grid, instance, params, budget)


def cmd_run(cfg: BenchmarkConfig) -> int:
    registry = map_registry(cfg)
    paths_by_name = {}
    for path in cfg.maps:
        paths_by_name[_cached_map(str(path)).name] = str(path)
    inst_dir = pathlib.Path(cfg.out) / "instances"
    instances = load_instances(inst_dir)
    for inst in instances:
        if inst.map_name not in registry:
            raise UsageError(f"instance {inst.id} needs map {inst.map_name!r}; not among --map flags")
    params = cfg.portfolio_params()
    budget = cfg.parsed_budget()
    tasks = [
        (paths_by_name[i.map_name], str(inst_dir / f"{i.id}.inst"), params, budget)
        for i in sorted(instances, key=lambda i: i.id)
    ]
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one_star, tasks))
    else:
        results = [_run_one(*t) for t in tasks]
    out_path = pathlib.Path(cfg.out) / "results.csv"
    with open(out_path, "w") as fh:
        write_results(results, fh)
    failures = sum(1 for r in results for v in r.failed.values() if v)
    print(f"wrote {len(results) * 3} result rows to {out_path}" + (f" ({failures} failed runs)" if failures else ""))
    return 0


def _run_one_star(task):
    return _run_one(*task)


def cmd_label(cfg: BenchmarkConfig) -> int:
    results = read_results(pathlib.Path(cfg.out) / "results.csv")
    out_path = pathlib.Path(cfg.out) / "labels.csv"
    with open(out_path, "w") as fh:
        write_labels(results, fh)
    print(f"wrote {len(results)} labels to {out_path}")
    return 0


def cmd_encode(cfg: BenchmarkConfig) -> int:
    registry = map_registry(cfg)
    out = pathlib.Path(cfg.out)
    instances = load_instances(out / "instances")
    labels = read_labels(out / "labels.csv")
    results = {r.instance_id: r for r in read_results(out / "results.csv")}
    images = {}
    for inst in sorted(instances, key=lambda i: i.id):
        if inst.map_name not in registry:
            raise UsageError(f"instance {inst.id} needs map {inst.map_name!r}; not among --map flags")
        images[inst.id] = encode(inst, registry[inst.map_name])
    manifest = export_dataset(
        sorted(instances, key=lambda i: i.id), labels, images, results, out
    )
    print(f"wrote {len(images)} images and {manifest}")
    return 0


def cmd_evaluate(cfg: BenchmarkConfig, selector_spec: str, results_path: str | None) -> int:
    results = read_results(results_path or pathlib.Path(cfg.out) / "results.csv")
    kind = parse_selector(selector_spec)
    predictions = load_predictions(kind.predictions_path) if kind.kind == "learned" else None
    triple = evaluate_selector(kind, results, predictions)
    print(
        f"selector={kind.describe()} instances={len(results)} "
        f"completion_rate={triple.completion_rate!r} total_distance={triple.total_distance!r} "
        f"goal_achievement_time={triple.goal_achievement_time!r}"
    )
    if predictions is not None:
        acc = prediction_accuracy(results, predictions)
        hits = round(acc * len(results))
        print(f"accuracy={acc!r} ({hits}/{len(results)} match the oracle label)")
    return 0


def cmd_report(cfg: BenchmarkConfig, results_path: str | None, prediction_paths: list[str], with_types: bool) -> int:
    out = pathlib.Path(cfg.out)
    results = read_results(results_path or out / "results.csv")
    splits = [load_predictions(p) for p in prediction_paths] or None
    types = None
    inst_dir = out / "instances"
    if with_types and inst_dir.is_dir():
        types = {i.id: i.scenario for i in load_instances(inst_dir)}
    text, csv_text = render_report(results, splits, types)
    (out / "report.txt").write_text(text)
    (out / "report.csv").write_text(csv_text)
    print(text, end="")
    return 0


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="mapf-bench", description=__doc__)
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--out", help="artifact directory (default bench_out)")
    parser.add_argument("--jobs", type=int, help="instance-level parallelism for run")
    parser.add_argument("--budget", help="wall:SECONDS or steps:N[:SECONDS]")
    parser.add_argument("--dump-flows", metavar="MAP", help="print a map's flow annotation grid and exit")
    parser.add_argument("--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--map", action="append", dest="maps", metavar="PATH", help="map file (repeatable)")

    g = sub.add_parser("generate", help="write problem instances")
    add_common(g)
    g.add_argument("--types", type=lambda s: s.split(","), help="comma list of scenario types")
    g.add_argument("--agents", type=int)
    g.add_argument("--count", type=int, help="instances per (map, type)")
    g.add_argument("--seed", type=int)

    r = sub.add_parser("run", help="run the portfolio over the instances")
    add_common(r)
    r.add_argument("--whca-window", type=int, dest="whca_window")
    r.add_argument("--whca-replan-interval", type=int, dest="whca_replan_interval")
    r.add_argument("--far-reservation", type=int, dest="far_reservation")
    r.add_argument("--far-wait-threshold", type=int, dest="far_wait_threshold")
    r.add_argument("--bmaa-lookahead", type=int, dest="bmaa_lookahead")
    r.add_argument("--bmaa-flows", action="store_const", const=True, dest="bmaa_flows")

    sub.add_parser("label", help="derive best/worst labels from results")

    e = sub.add_parser("encode", help="export images and the dataset manifest")
    add_common(e)

    ev = sub.add_parser("evaluate", help="score a selector against results")
    ev.add_argument("--selector", required=True, help="fixed:NAME | oracle | worst | learned:PATH")
    ev.add_argument("--results", help="results file (default <out>/results.csv)")

    rp = sub.add_parser("report", help="render the benchmark tables")
    rp.add_argument("--results", help="results file (default <out>/results.csv)")
    rp.add_argument("--predictions", action="append", default=[], metavar="PATH",
                    help="per-split predictions file (repeatable)")
    rp.add_argument("--no-types", action="store_true", help="skip the per-type table")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        if args.dump_flows:
            print(dump_flows(load_map(args.dump_flows)))
            return 0
        if not args.command:
            raise UsageError("a subcommand is required (generate/run/label/encode/evaluate/report)")
        cfg = build_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "label":
            return cmd_label(cfg)
        if args.command == "encode":
            return cmd_encode(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.selector, args.results)
        if args.command == "report":
            return cmd_report(cfg, args.results, args.predictions, not args.no_types)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (MapParseError, GenerationError, EvaluationError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failures
        log.exception("runtime failure")
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

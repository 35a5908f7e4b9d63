"""Portfolio results, the lexicographic best/worst rule, selector quality."""

from __future__ import annotations

import pathlib
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from .engine import MetricsTriple

PORTFOLIO = ("BMAA*", "FAR", "WHCA*")  # canonical order, also the residual tie order


class EvaluationError(RuntimeError):
    pass


@dataclass
class PortfolioResult:
    instance_id: str
    triples: dict[str, MetricsTriple]
    seeds: dict[str, int] = field(default_factory=dict)
    budgets: dict[str, str] = field(default_factory=dict)
    failed: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        missing = [p for p in PORTFOLIO if p not in self.triples]
        if missing:
            raise EvaluationError(f"instance {self.instance_id}: missing triples for {missing}")


@dataclass(frozen=True)
class Label:
    best: int
    worst: int

    @property
    def best_name(self) -> str:
        return PORTFOLIO[self.best]

    @property
    def worst_name(self) -> str:
        return PORTFOLIO[self.worst]


def _rank(triple: MetricsTriple) -> tuple[float, float, float]:
    # Higher completion wins; ties fall to smaller distance, then smaller GAT.
    return (-triple.completion_rate, triple.total_distance, triple.goal_achievement_time)


def label(result: PortfolioResult) -> Label:
    """Best/worst portfolio member.

    Residual exact ties go by PORTFOLIO order: earliest wins best, latest
    takes worst (the mirror of the best rule).
    """
    ranked = [(_rank(result.triples[name]), i) for i, name in enumerate(PORTFOLIO)]
    best = min(ranked)[1]
    worst = max(ranked)[1]
    return Label(best, worst)


def selector_quality(
    selection: Mapping[str, str], results: Iterable[PortfolioResult]
) -> MetricsTriple:
    """Mean triple of the algorithm each instance's selection names."""
    results = list(results)
    missing = [r.instance_id for r in results if r.instance_id not in selection]
    if missing:
        raise EvaluationError(f"selection missing instances: {', '.join(sorted(missing))}")
    if not results:
        raise EvaluationError("no results to evaluate")
    chosen = [r.triples[selection[r.instance_id]] for r in results]
    n = len(chosen)
    return MetricsTriple(
        sum(t.completion_rate for t in chosen) / n,
        sum(t.total_distance for t in chosen) / n,
        sum(t.goal_achievement_time for t in chosen) / n,
    )


# -- results and labels files ------------------------------------------------

RESULTS_HEADER = (
    "instance_id,algorithm,completion_rate,total_distance,goal_achievement_time,seed,budget,failed"
)


def write_results(results: Iterable[PortfolioResult], fh: IO[str]) -> None:
    fh.write(RESULTS_HEADER + "\n")
    for r in results:
        for name in PORTFOLIO:
            t = r.triples[name]
            fh.write(
                f"{r.instance_id},{name},{t.completion_rate!r},{t.total_distance!r},"
                f"{t.goal_achievement_time!r},{r.seeds.get(name, 0)},"
                f"{r.budgets.get(name, '')},{int(r.failed.get(name, False))}\n"
            )


def read_results(path) -> list[PortfolioResult]:
    p = pathlib.Path(path)
    if not p.exists():
        raise EvaluationError(f"results file not found: {p}")
    acc: dict[str, dict] = {}
    order: list[str] = []
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#") or line == RESULTS_HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise EvaluationError(f"{p}:{ln}: expected 8 fields, found {len(parts)}")
        iid, name, cr, dist, gat, seed, budget, failed = parts
        if name not in PORTFOLIO:
            raise EvaluationError(f"{p}:{ln}: unknown algorithm {name!r}")
        if iid not in acc:
            acc[iid] = {"triples": {}, "seeds": {}, "budgets": {}, "failed": {}}
            order.append(iid)
        entry = acc[iid]
        try:
            entry["triples"][name] = MetricsTriple(float(cr), float(dist), float(gat))
            entry["seeds"][name] = int(seed)
        except ValueError:
            raise EvaluationError(f"{p}:{ln}: non-numeric field in {line!r}") from None
        entry["budgets"][name] = budget
        entry["failed"][name] = failed == "1"
    try:
        return [PortfolioResult(iid, **acc[iid]) for iid in order]
    except EvaluationError as exc:
        raise EvaluationError(f"{p}: {exc}") from None


LABELS_HEADER = "instance_id,best,worst"


def write_labels(results: Iterable[PortfolioResult], fh: IO[str]) -> None:
    fh.write(LABELS_HEADER + "\n")
    for r in results:
        lab = label(r)
        fh.write(f"{r.instance_id},{lab.best_name},{lab.worst_name}\n")


def read_labels(path) -> dict[str, Label]:
    p = pathlib.Path(path)
    if not p.exists():
        raise EvaluationError(f"labels file not found: {p}")
    out: dict[str, Label] = {}
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip() or line == LABELS_HEADER:
            continue
        try:
            iid, best, worst = line.split(",")
            out[iid] = Label(PORTFOLIO.index(best), PORTFOLIO.index(worst))
        except ValueError:
            raise EvaluationError(f"{p}:{ln}: bad label row {line!r}") from None
    return out

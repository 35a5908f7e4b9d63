"""Selectors (fixed, oracle, worst, learned) and benchmark report tables."""

from __future__ import annotations

import math
import pathlib
from dataclasses import dataclass
from typing import Iterable, Mapping

from .engine import MetricsTriple
from .labels import PORTFOLIO, EvaluationError, PortfolioResult, label, selector_quality

PREDICTIONS_HEADER = "instance_id,predicted_algorithm"


@dataclass(frozen=True)
class SelectorKind:
    kind: str  # fixed | oracle | worst | learned
    algorithm: str | None = None
    predictions_path: str | None = None

    def describe(self) -> str:
        if self.kind == "fixed":
            return self.algorithm or "fixed"
        if self.kind == "learned":
            return "learned"
        return self.kind


def parse_selector(text: str) -> SelectorKind:
    """Parse 'fixed:NAME', 'oracle', 'worst', or 'learned:PATH'."""
    if text == "oracle":
        return SelectorKind("oracle")
    if text == "worst":
        return SelectorKind("worst")
    if text.startswith("fixed:"):
        name = text.split(":", 1)[1]
        if name not in PORTFOLIO:
            raise EvaluationError(f"unknown portfolio algorithm {name!r}; choose from {PORTFOLIO}")
        return SelectorKind("fixed", algorithm=name)
    if text.startswith("learned:"):
        return SelectorKind("learned", predictions_path=text.split(":", 1)[1])
    raise EvaluationError(f"bad selector spec {text!r}")


def load_predictions(path) -> dict[str, str]:
    p = pathlib.Path(path)
    if not p.exists():
        raise EvaluationError(f"predictions file not found: {p}")
    out: dict[str, str] = {}
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#") or line == PREDICTIONS_HEADER:
            continue
        try:
            iid, name = line.split(",")
        except ValueError:
            raise EvaluationError(f"{p}:{ln}: bad prediction row {line!r}") from None
        if name not in PORTFOLIO:
            raise EvaluationError(f"{p}:{ln}: unknown algorithm {name!r}")
        out[iid] = name
    return out


def select(
    kind: SelectorKind,
    instance_id: str,
    result: PortfolioResult,
    predictions: Mapping[str, str] | None = None,
) -> str:
    if kind.kind == "fixed":
        return kind.algorithm
    if kind.kind == "oracle":
        return label(result).best_name
    if kind.kind == "worst":
        return label(result).worst_name
    if kind.kind == "learned":
        if predictions is None or instance_id not in predictions:
            raise EvaluationError(f"no prediction for instance {instance_id}")
        return predictions[instance_id]
    raise EvaluationError(f"unknown selector kind {kind.kind!r}")


def evaluate_selector(
    kind: SelectorKind,
    results: Iterable[PortfolioResult],
    predictions: Mapping[str, str] | None = None,
) -> MetricsTriple:
    results = list(results)
    if kind.kind == "learned":
        missing = [r.instance_id for r in results if predictions is None or r.instance_id not in predictions]
        if missing:
            raise EvaluationError(f"predictions missing instances: {', '.join(sorted(missing))}")
    selection = {r.instance_id: select(kind, r.instance_id, r, predictions) for r in results}
    return selector_quality(selection, results)


def prediction_accuracy(results: Iterable[PortfolioResult], predictions: Mapping[str, str]) -> float:
    """Fraction of instances whose prediction matches the oracle label."""
    results = list(results)
    hits = sum(1 for r in results if predictions.get(r.instance_id) == label(r).best_name)
    return hits / len(results) if results else 0.0


# -- report rendering ---------------------------------------------------------


def _mean_sem(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def _cell(values: list[float], with_pm: bool) -> str:
    mean, sem = _mean_sem(values)
    if with_pm:
        return f"{mean:.1f} ± {sem:.1f}"
    return f"{mean:.1f}"


ROW_NAMES = {"oracle": "pi*", "learned": "pi", "worst": "Worst"}


def summary_table(
    results: list[PortfolioResult],
    prediction_splits: list[Mapping[str, str]] | None = None,
) -> tuple[str, list[str]]:
    """Overall performance block: one row per selector, columns completion
    rate (%), distance traveled, goal achievement time, as mean ± standard
    error over splits. With prediction files each split is evaluated on the
    instances that file covers (its test set); without them the whole result
    set forms a single split and the learned row is omitted.
    """
    by_id = {r.instance_id: r for r in results}
    selectors: list[SelectorKind] = [SelectorKind("oracle")]
    if prediction_splits:
        selectors.append(SelectorKind("learned"))
    selectors += [SelectorKind("fixed", algorithm=name) for name in PORTFOLIO]
    selectors.append(SelectorKind("worst"))

    splits: list[tuple[list[PortfolioResult], Mapping[str, str] | None]] = []
    if prediction_splits:
        for k, preds in enumerate(prediction_splits):
            missing = sorted(set(preds) - set(by_id))
            if missing:
                raise EvaluationError(
                    f"split {k}: predictions for unknown instances: {', '.join(missing)}"
                )
            subset = [by_id[iid] for iid in sorted(preds)]
            if not subset:
                raise EvaluationError(f"split {k}: no evaluable instances")
            splits.append((subset, preds))
    else:
        splits.append((results, None))

    cells: dict[str, list[MetricsTriple]] = {}
    accuracies: list[float] = []
    for subset, preds in splits:
        for sel in selectors:
            triple = evaluate_selector(sel, subset, preds)
            cells.setdefault(sel.describe(), []).append(triple)
        if preds is not None:
            accuracies.append(prediction_accuracy(subset, preds))

    with_pm = len(splits) > 1
    name_width = max(len(ROW_NAMES.get(s.describe(), s.describe())) for s in selectors)
    header = ["Selector".ljust(name_width), "Completion rate (%)", "Distance traveled", "Goal achievement time (s)"]
    lines = ["  ".join(header)]
    csv_rows = ["selector,completion_rate_pct,completion_rate_sem,distance,distance_sem,gat,gat_sem"]
    for sel in selectors:
        key = sel.describe()
        triples = cells[key]
        comp = [t.completion_rate * 100 for t in triples]
        dist = [t.total_distance for t in triples]
        gat = [t.goal_achievement_time for t in triples]
        row_name = ROW_NAMES.get(key, key)
        lines.append(
            "  ".join(
                [
                    row_name.ljust(name_width),
                    _cell(comp, with_pm).rjust(len(header[1])),
                    _cell(dist, with_pm).rjust(len(header[2])),
                    _cell(gat, with_pm).rjust(len(header[3])),
                ]
            )
        )
        mc, sc = _mean_sem(comp)
        md, sd = _mean_sem(dist)
        mg, sg = _mean_sem(gat)
        csv_rows.append(f"{row_name},{mc!r},{sc!r},{md!r},{sd!r},{mg!r},{sg!r}")
    if accuracies:
        mean, sem = _mean_sem([a * 100 for a in accuracies])
        lines.append("")
        lines.append(f"pi accuracy: {mean:.1f}% ± {sem:.1f} over {len(accuracies)} splits")
        csv_rows.append(f"pi_accuracy,{mean!r},{sem!r},,,,")
    return "\n".join(lines), csv_rows


def per_type_table(results: list[PortfolioResult], types: Mapping[str, str]) -> tuple[str, list[str]]:
    """Completion rate (%) by problem type for each fixed algorithm; the best
    entry of each row is starred."""
    missing = sorted(r.instance_id for r in results if r.instance_id not in types)
    if missing:
        raise EvaluationError(f"no scenario type recorded for: {', '.join(missing)}")
    from .scenarios import SCENARIO_TYPES

    groups: dict[str, list[PortfolioResult]] = {}
    for r in results:
        groups.setdefault(types[r.instance_id], []).append(r)
    order = [t for t in SCENARIO_TYPES if t in groups] + sorted(set(groups) - set(SCENARIO_TYPES))
    name_width = max(len(t) for t in order + ["Problem type"])
    header = ["Problem type".ljust(name_width)] + [name.rjust(10) for name in PORTFOLIO]
    lines = ["  ".join(header)]
    csv_rows = ["problem_type," + ",".join(PORTFOLIO)]
    for t in order:
        rows = groups[t]
        means = [
            sum(r.triples[name].completion_rate for r in rows) / len(rows) * 100
            for name in PORTFOLIO
        ]
        best = max(range(len(PORTFOLIO)), key=lambda i: (means[i], -i))
        cells = [
            (f"{m:.1f}*" if i == best else f"{m:.1f}").rjust(10)
            for i, m in enumerate(means)
        ]
        lines.append("  ".join([t.ljust(name_width)] + cells))
        csv_rows.append(t + "," + ",".join(repr(m) for m in means))
    return "\n".join(lines), csv_rows


def render_report(
    results: list[PortfolioResult],
    prediction_splits: list[Mapping[str, str]] | None = None,
    types: Mapping[str, str] | None = None,
) -> tuple[str, str]:
    """Full benchmark report; returns (plain text, csv text)."""
    text, csv_rows = summary_table(results, prediction_splits)
    blocks = ["Algorithm performance on all problems", "(± is the standard error over splits)", "", text]
    csv_all = ["# overall"] + csv_rows
    if types is not None:
        t2, csv2 = per_type_table(results, types)
        blocks += ["", "Completion rate (%) by problem type", "", t2]
        csv_all += ["# per_type"] + csv2
    return "\n".join(blocks) + "\n", "\n".join(csv_all) + "\n"


def write_predictions(predictions: Mapping[str, str], fh) -> None:
    fh.write(PREDICTIONS_HEADER + "\n")
    for iid in sorted(predictions):
        fh.write(f"{iid},{predictions[iid]}\n")

"""Running the full planner portfolio on instances."""

from __future__ import annotations

from dataclasses import dataclass, field

from .bmaa import BmaaConfig, BmaaPlanner
from .engine import Budget, RunResult, make_agents, run_instance
from .far import FarConfig, FarPlanner
from .grid import GridMap
from .labels import PORTFOLIO, PortfolioResult
from .scenarios import ProblemInstance
from .whca import WhcaConfig, WhcaPlanner


@dataclass(frozen=True)
class PortfolioParams:
    whca: WhcaConfig = field(default_factory=WhcaConfig)
    far: FarConfig = field(default_factory=FarConfig)
    bmaa: BmaaConfig = field(default_factory=BmaaConfig)


def planner_factory(name: str, params: PortfolioParams):
    """Factory with the run_instance signature (grid, agents, seed, clock)."""
    if name == "WHCA*":
        return lambda grid, agents, seed, clock: WhcaPlanner(grid, agents, seed, clock, params.whca)
    if name == "FAR":
        return lambda grid, agents, seed, clock: FarPlanner(grid, agents, seed, clock, params.far)
    if name == "BMAA*":
        return lambda grid, agents, seed, clock: BmaaPlanner(grid, agents, seed, clock, params.bmaa)
    raise ValueError(f"unknown planner {name!r}; portfolio is {PORTFOLIO}")


def run_planner(
    grid: GridMap,
    instance: ProblemInstance,
    name: str,
    params: PortfolioParams,
    budget: Budget,
) -> RunResult:
    agents = make_agents(instance.agents)
    return run_instance(grid, agents, planner_factory(name, params), budget, seed=instance.seed)


def run_portfolio(
    grid: GridMap,
    instance: ProblemInstance,
    params: PortfolioParams,
    budget: Budget,
) -> PortfolioResult:
    """One instance through all three planners; collects the label inputs."""
    triples = {}
    seeds = {}
    budgets = {}
    failed = {}
    for name in PORTFOLIO:
        result = run_planner(grid, instance, name, params, budget)
        triples[name] = result.metrics
        seeds[name] = instance.seed
        budgets[name] = budget.spec()
        failed[name] = result.failed
    return PortfolioResult(instance.id, triples, seeds, budgets, failed)

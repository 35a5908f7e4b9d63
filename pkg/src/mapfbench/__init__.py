"""Multi-agent pathfinding benchmark engine with a planner portfolio."""

from .engine import Budget, ExecutionTrace, MetricsTriple, RunResult, run_instance
from .grid import GridMap, MapParseError, Node, load_map, octile, parse_movingai
from .labels import PORTFOLIO, Label, PortfolioResult, label
from .portfolio import PortfolioParams, run_portfolio
from .scenarios import SCENARIO_TYPES, GenerationError, ProblemInstance, generate

__all__ = [
    "Budget",
    "ExecutionTrace",
    "GenerationError",
    "GridMap",
    "Label",
    "MapParseError",
    "MetricsTriple",
    "Node",
    "PORTFOLIO",
    "PortfolioParams",
    "PortfolioResult",
    "ProblemInstance",
    "RunResult",
    "SCENARIO_TYPES",
    "generate",
    "label",
    "load_map",
    "octile",
    "parse_movingai",
    "run_instance",
    "run_portfolio",
]

"""Bounded Multi-Agent A*: per-agent real-time search with a learning
heuristic, other agents treated as obstacles, and goal-vacate requests."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

from .engine import AgentState, PlanningClock
from .grid import GridMap, Node, octile


@dataclass(frozen=True)
class BmaaConfig:
    lookahead: int = 32
    flow_annotations: bool = False

    def __post_init__(self):
        if self.lookahead < 1:
            raise ValueError("lookahead must be at least 1")


class HeuristicTable:
    """Per-agent heuristic toward one goal: octile as the base, raised in
    place by search updates. Values never drop below octile and the goal
    stays at 0."""

    def __init__(self, goal: Node):
        self.goal = goal
        self._learned: dict[Node, float] = {}

    def get(self, n: Node) -> float:
        base = octile(n, self.goal)
        return max(base, self._learned.get(n, base))

    def raise_to(self, n: Node, value: float) -> None:
        if n == self.goal:
            return
        if value > self.get(n):
            self._learned[n] = value

    def learned(self) -> dict[Node, float]:
        return dict(self._learned)


def bounded_search(
    grid: GridMap,
    start: Node,
    goal: Node,
    htab: HeuristicTable,
    occupied: set[Node],
    lookahead: int,
) -> tuple[list[Node], dict[Node, float], float]:
    """A* from start with other agents' nodes excluded, stopping when the
    goal is selected for expansion or after ``lookahead`` expansions.

    Returns (path to the best frontier node, CLOSED set with g values,
    f of that node). With the goal reached the path is complete and f is
    its g. A boxed-in agent gets an empty path and infinite f.
    """
    g: dict[Node, float] = {start: 0.0}
    parent: dict[Node, Node] = {}
    closed: dict[Node, float] = {}
    h0 = htab.get(start)
    frontier: list[tuple[float, float, int, int, Node]] = [(h0, h0, start.x, start.y, start)]
    expansions = 0

    def path_to(node: Node) -> list[Node]:
        path = [node]
        while node in parent:
            node = parent[node]
            path.append(node)
        path.reverse()
        return path

    while frontier:
        f, h, x, y, u = heapq.heappop(frontier)
        if u in closed:
            continue
        if u == goal:
            return path_to(u), closed, g[u]
        closed[u] = g[u]
        for v, c in grid.neighbors(u):
            if v in occupied:
                continue
            nv = g[u] + c
            if v in closed or nv >= g.get(v, math.inf) - 1e-12:
                continue
            g[v] = nv
            parent[v] = u
            hv = htab.get(v)
            heapq.heappush(frontier, (nv + hv, hv, v.x, v.y, v))
        expansions += 1
        if expansions >= lookahead:
            break

    while frontier:
        f, h, x, y, u = heapq.heappop(frontier)
        if u in closed:
            continue
        return path_to(u), closed, f
    return [], closed, math.inf


def update_heuristics(htab: HeuristicTable, closed: dict[Node, float], f_best: float) -> None:
    """RTAA*-style learning: h(n) <- max(h(n), f_best - g(n)) on CLOSED."""
    if math.isinf(f_best):
        return
    for n, gv in closed.items():
        htab.raise_to(n, f_best - gv)


class BmaaPlanner:
    """Each agent independently runs bounded searches toward its goal and
    follows the returned partial path, re-searching when the path runs out
    or its next node is occupied. Agents resting on someone else's goal are
    asked to step aside."""

    name = "BMAA*"

    def __init__(
        self,
        grid: GridMap,
        agents: list[AgentState],
        seed: int = 0,
        clock: PlanningClock | None = None,
        config: BmaaConfig | None = None,
    ):
        self.config = config or BmaaConfig()
        if self.config.flow_annotations:
            raise ValueError("flow annotations are not supported for BMAA*")
        self.grid = grid
        self.agents = agents
        self.clock = clock
        self.tables = {a.id: HeuristicTable(a.goal) for a in agents}

    def prepare(self, now: int) -> None:
        positions = {a.current: a.id for a in self.agents}
        resting = {a.id for a in self.agents if not a.plan}
        vacate: set[int] = set()
        for a in self.agents:
            if a.current == a.goal:
                continue
            occupant = positions.get(a.goal)
            if occupant is not None and occupant != a.id and occupant in resting:
                vacate.add(occupant)

        for a in self.agents:
            if a.id in vacate:
                free = sorted(v for v, _ in self.grid.neighbors(a.current) if v not in positions)
                a.plan = deque([(a.current, free[0])]) if free else deque()
                continue
            if a.current == a.goal:
                a.plan = deque()
                continue
            stale = bool(a.plan) and a.plan[0][0] != a.current
            next_blocked = bool(a.plan) and positions.get(a.plan[0][1]) not in (None, a.id)
            if a.plan and not stale and not next_blocked:
                continue
            if self.clock is not None and not self.clock.begin_plan():
                a.plan = deque()
                continue
            occupied = set(positions) - {a.current}
            htab = self.tables[a.id]
            path, closed, f_best = bounded_search(
                self.grid, a.current, a.goal, htab, occupied, self.config.lookahead
            )
            update_heuristics(htab, closed, f_best)
            a.plan = deque((path[i], path[i + 1]) for i in range(len(path) - 1))

    def after_commit(self, now: int, committed: dict[int, tuple[Node, Node]]) -> None:
        pass  # all recovery happens by re-searching in prepare()

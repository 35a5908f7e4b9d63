"""Windowed cooperative A*: time-expanded search against a shared reservation table."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

from .engine import AgentState, PlanningClock
from .grid import GridMap, Node


class ReservationTable:
    """Space-time bookings shared by all agents of one run.

    Vertices are keyed (node, t), edges (u, v, t) meaning the traversal
    u->v during step t. At most one owner per key; a second reservation of
    a taken key is refused rather than overwritten.
    """

    def __init__(self):
        self._vertex: dict[tuple[Node, int], int] = {}
        self._edge: dict[tuple[Node, Node, int], int] = {}
        self._by_agent: dict[int, list] = {}

    def vertex_owner(self, node: Node, t: int) -> int | None:
        return self._vertex.get((node, t))

    def edge_owner(self, u: Node, v: Node, t: int) -> int | None:
        return self._edge.get((u, v, t))

    def reserve_vertex(self, agent: int, node: Node, t: int) -> bool:
        key = (node, t)
        owner = self._vertex.get(key)
        if owner is not None and owner != agent:
            return False
        if owner is None:
            self._vertex[key] = agent
            self._by_agent.setdefault(agent, []).append(("v", key))
        return True

    def reserve_edge(self, agent: int, u: Node, v: Node, t: int) -> bool:
        key = (u, v, t)
        owner = self._edge.get(key)
        if owner is not None and owner != agent:
            return False
        if owner is None:
            self._edge[key] = agent
            self._by_agent.setdefault(agent, []).append(("e", key))
        return True

    def reserve_path(self, agent: int, nodes: list[Node], t0: int) -> None:
        """Book every vertex along the path and the edge of every real move."""
        for i, n in enumerate(nodes):
            self.reserve_vertex(agent, n, t0 + i)
        for i in range(len(nodes) - 1):
            u, v = nodes[i], nodes[i + 1]
            if u != v:
                self.reserve_edge(agent, u, v, t0 + i)

    def release(self, agent: int) -> None:
        for kind, key in self._by_agent.pop(agent, ()):
            table = self._vertex if kind == "v" else self._edge
            if table.get(key) == agent:
                del table[key]


class RraHeuristic:
    """Resumable abstract distances: a lazily expanded uniform-cost search
    rooted at the goal. ``query`` grows the search only until the asked node
    settles, so values are exact agent-free distances on the grid."""

    def __init__(self, grid: GridMap, goal: Node):
        if not grid.is_passable(goal.x, goal.y):
            raise ValueError(f"heuristic goal {goal} is blocked")
        self.grid = grid
        self.goal = goal
        self._settled: dict[Node, float] = {}
        self._best: dict[Node, float] = {goal: 0.0}
        self._frontier: list[tuple[float, int, int, Node]] = [(0.0, goal.x, goal.y, goal)]

    def query(self, node: Node) -> float:
        """Distance from ``node`` to the goal; inf when unreachable."""
        settled = self._settled
        while node not in settled and self._frontier:
            d, _, _, u = heapq.heappop(self._frontier)
            if u in settled:
                continue
            settled[u] = d
            for v, c in self.grid.neighbors(u):
                nd = d + c
                if nd < self._best.get(v, math.inf) - 1e-12:
                    self._best[v] = nd
                    heapq.heappush(self._frontier, (nd, v.x, v.y, v))
        return settled.get(node, math.inf)


@dataclass(frozen=True)
class WhcaConfig:
    window: int = 8
    replan_interval: int | None = None  # default window // 2

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        ri = self.interval
        if not 1 <= ri <= self.window:
            raise ValueError("replan_interval must lie in [1, window]")

    @property
    def interval(self) -> int:
        if self.replan_interval is not None:
            return self.replan_interval
        return max(1, self.window // 2)


def plan_window(
    agent: AgentState,
    grid: GridMap,
    table: ReservationTable,
    heuristic: RraHeuristic,
    window: int,
    now: int,
) -> list[Node]:
    """A* over (node, time) for one agent, depth ``window`` steps from now.

    Moves already reserved by other agents are pruned: a vertex taken at
    t+1, or the opposing edge traversal at t (a swap). Waiting costs 1 off
    the goal and 0 on it. The best node at full depth wins; if the search
    exhausts earlier the deepest reachable state with the lowest f is used,
    falling back to a wait in place.
    """
    start = agent.current
    aid = agent.id
    g: dict[tuple[Node, int], float] = {(start, now): 0.0}
    parent: dict[tuple[Node, int], tuple[Node, int]] = {}
    closed: set[tuple[Node, int]] = set()
    h0 = heuristic.query(start)
    # Heap keys (f, h, x, y, t) give a total order: deterministic expansions.
    frontier = [(h0, h0, start.x, start.y, now, start)]
    horizon = now + window
    terminal: tuple[Node, int] | None = None
    deepest: tuple[int, float, float, int, int] | None = None  # (-t, f, h, x, y)
    deepest_state: tuple[Node, int] | None = None

    while frontier:
        f, h, x, y, t, u = heapq.heappop(frontier)
        state = (u, t)
        if state in closed:
            continue
        closed.add(state)
        if t == horizon:
            terminal = state
            break
        rank = (-t, f, h, x, y)
        if deepest is None or rank < deepest:
            deepest = rank
            deepest_state = state
        gu = g[state]
        wait_cost = 0.0 if u == agent.goal else 1.0
        options = [(u, wait_cost)] + list(grid.neighbors(u))
        for v, c in options:
            if table.vertex_owner(v, t + 1) not in (None, aid):
                continue
            if v != u and table.edge_owner(v, u, t) not in (None, aid):
                continue
            nv = gu + c
            succ = (v, t + 1)
            if succ in closed or nv >= g.get(succ, math.inf) - 1e-12:
                continue
            hv = heuristic.query(v)
            if math.isinf(hv):
                continue
            g[succ] = nv
            parent[succ] = state
            heapq.heappush(frontier, (nv + hv, hv, v.x, v.y, t + 1, v))

    if terminal is None:
        terminal = deepest_state if deepest_state is not None else (start, now)
    nodes: list[Node] = []
    state = terminal
    while True:
        nodes.append(state[0])
        if state not in parent:
            break
        state = parent[state]
    nodes.reverse()
    if len(nodes) == 1:
        nodes = [start, start]  # nothing reachable: hold position, reserved
    return nodes


class WhcaPlanner:
    """Cooperative planner: agents search in turn, later agents route around
    the space-time reservations of earlier ones. Priority rotates by one
    position every replanning wave so no agent is permanently last."""

    name = "WHCA*"

    def __init__(
        self,
        grid: GridMap,
        agents: list[AgentState],
        seed: int = 0,
        clock: PlanningClock | None = None,
        config: WhcaConfig | None = None,
    ):
        self.grid = grid
        self.agents = agents
        self.config = config or WhcaConfig()
        self.clock = clock
        self.table = ReservationTable()
        self.heuristics = {a.id: RraHeuristic(grid, a.goal) for a in agents}
        self._wave = 0
        self._stale: set[int] = set()

    def prepare(self, now: int) -> None:
        cfg = self.config
        need = []
        for a in self.agents:
            dirty = a.id in self._stale or (a.plan and a.plan[0][0] != a.current)
            if dirty or len(a.plan) < cfg.interval:
                need.append(a.id)
        if not need:
            return
        need_set = set(need)
        n = len(self.agents)
        order = [self.agents[(self._wave + i) % n] for i in range(n)]
        self._wave = (self._wave + 1) % max(1, n)
        for a in order:
            if a.id not in need_set:
                continue
            if self.clock is not None and not self.clock.begin_plan():
                break
            self.table.release(a.id)
            nodes = plan_window(a, self.grid, self.table, self.heuristics[a.id], cfg.window, now)
            self.table.reserve_path(a.id, nodes, now)
            a.plan = deque((nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1))
            self._stale.discard(a.id)

    def after_commit(self, now: int, committed: dict[int, tuple[Node, Node]]) -> None:
        # A refused move leaves the old plan head in place; mark the agent so
        # its stale reservations are rebuilt from its real position.
        for a in self.agents:
            frm, to = committed[a.id]
            if to == frm and a.plan and a.plan[0][0] == frm and a.plan[0][1] != frm:
                self._stale.add(a.id)

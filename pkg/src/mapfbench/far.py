"""Flow Annotation Replanning: one-way cardinal highways with short move
reservations, waiting when blocked, and forced displacement on deadlock."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .engine import AgentState, PlanningClock
from .grid import GridMap, Node, astar, octile


@dataclass(frozen=True)
class FarConfig:
    reservation_length: int = 3
    wait_threshold: int = 5

    def __post_init__(self):
        if self.reservation_length < 1:
            raise ValueError("reservation_length must be at least 1")
        if self.wait_threshold < 1:
            raise ValueError("wait_threshold must be at least 1")


class FlowGraph:
    """Directed cardinal edges over the passable cells of a map."""

    def __init__(self, out: dict[Node, tuple[Node, ...]]):
        self.out = out

    def outgoing(self, n: Node) -> tuple[Node, ...]:
        return self.out.get(n, ())


def _corridor_axis(grid: GridMap, x: int, y: int) -> str | None:
    """'h' when both vertical neighbors are blocked, 'v' for both horizontal."""
    if not grid.is_passable(x, y - 1) and not grid.is_passable(x, y + 1):
        return "h"
    if not grid.is_passable(x - 1, y) and not grid.is_passable(x + 1, y):
        return "v"
    return None


def annotate(grid: GridMap) -> FlowGraph:
    """Assign one-way directions by parity: even rows flow west and odd rows
    east; even columns flow north and odd columns south. Cells on one-cell-wide
    corridors keep both directions along the corridor axis. A repair pass gives
    any node left with zero outgoing edges all its cardinal edges back,
    bidirectionally, so annotation never strands a node."""
    out: dict[Node, set[Node]] = {n: set() for n in grid.passable_nodes()}

    def add(n: Node, dx: int, dy: int) -> None:
        if grid.is_passable(n.x + dx, n.y + dy):
            out[n].add(Node(n.x + dx, n.y + dy))

    for n in out:
        axis = _corridor_axis(grid, n.x, n.y)
        if axis == "h":
            add(n, -1, 0)
            add(n, 1, 0)
        else:
            add(n, (-1 if n.y % 2 == 0 else 1), 0)
        if axis == "v":
            add(n, 0, -1)
            add(n, 0, 1)
        else:
            add(n, 0, (-1 if n.x % 2 == 0 else 1))

    for n in sorted(out):
        if out[n]:
            continue
        for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            m = Node(n.x + dx, n.y + dy)
            if grid.is_passable(m.x, m.y):
                out[n].add(m)
                out[m].add(n)

    return FlowGraph({n: tuple(sorted(s)) for n, s in out.items()})


def dump_flows(grid: GridMap) -> str:
    """Render the annotated graph as a text grid, one WENS token per cell.

    Each passable cell shows its outgoing directions as a 4-slot token
    (west, east, north, south), absent slots dashed; blocked cells are ####.
    """
    flow = annotate(grid)
    rows = []
    for y in range(grid.height):
        tokens = []
        for x in range(grid.width):
            if not grid.is_passable(x, y):
                tokens.append("####")
                continue
            outgoing = set(flow.outgoing(Node(x, y)))
            tokens.append(
                ("W" if Node(x - 1, y) in outgoing else "-")
                + ("E" if Node(x + 1, y) in outgoing else "-")
                + ("N" if Node(x, y - 1) in outgoing else "-")
                + ("S" if Node(x, y + 1) in outgoing else "-")
            )
        rows.append(" ".join(tokens))
    return "\n".join(rows)


def far_plan(start: Node, goal: Node, flow: FlowGraph, grid: GridMap) -> list[Node] | None:
    """Path on the annotated graph (unit costs), falling back to the
    undirected map graph when the flow graph disconnects the pair. None when
    the pair is unreachable even on the map."""
    path = astar(start, goal, lambda n: ((v, 1.0) for v in flow.outgoing(n)), lambda n: octile(n, goal))
    if path is None:
        path = astar(start, goal, grid.neighbors, lambda n: octile(n, goal))
    return path


@dataclass
class _FarAgent:
    route: deque = field(default_factory=deque)  # upcoming nodes, current excluded
    reserved: deque = field(default_factory=deque)  # (node, t) pairs already booked
    waits: int = 0
    planned: bool = False
    forced: tuple[Node, Node] | None = None  # (displacement target, node to return to)


class FarPlanner:
    """FAR: plan once on the flow graph, advance under short reservations,
    wait when the next stretch cannot be booked, and break deadlocks by
    forcing one member of each wait-for cycle off its node."""

    name = "FAR"

    def __init__(
        self,
        grid: GridMap,
        agents: list[AgentState],
        seed: int = 0,
        clock: PlanningClock | None = None,
        config: FarConfig | None = None,
    ):
        self.grid = grid
        self.agents = agents
        self.config = config or FarConfig()
        self.clock = clock
        self.flow = annotate(grid)
        self.rng = random.Random(seed)
        self.state = {a.id: _FarAgent() for a in agents}
        self._reservations: dict[tuple[Node, int], int] = {}
        self._held: dict[int, list[tuple[Node, int]]] = {}

    # -- reservation bookkeeping ------------------------------------------

    def _owner(self, node: Node, t: int) -> int | None:
        return self._reservations.get((node, t))

    def _release(self, aid: int) -> None:
        for key in self._held.pop(aid, ()):
            if self._reservations.get(key) == aid:
                del self._reservations[key]

    def _reserve(self, aid: int, pairs: list[tuple[Node, int]]) -> None:
        held = self._held.setdefault(aid, [])
        for node, t in pairs:
            self._reservations[(node, t)] = aid
            held.append((node, t))

    # -- planning steps ----------------------------------------------------

    def prepare(self, now: int) -> None:
        res_len = self.config.reservation_length
        for a in self.agents:
            st = self.state[a.id]
            if not st.planned:
                if self.clock is not None and not self.clock.begin_plan():
                    a.plan = deque()
                    continue
                path = far_plan(a.current, a.goal, self.flow, self.grid)
                st.route = deque(path[1:]) if path else deque()
                st.planned = True
            if st.forced is not None:
                continue  # single displacement move already queued
            if st.reserved:
                continue  # keep following the booked stretch
            if not st.route:
                # At the goal (or unsolvable): hold the current node.
                self._release(a.id)
                self._reserve(a.id, [(a.current, now + 1)])
                a.plan = deque()
                continue
            take = min(res_len, len(st.route))
            pairs = [(st.route[i], now + 1 + i) for i in range(take)]
            if any(self._owner(n, t) not in (None, a.id) for n, t in pairs):
                a.plan = deque()  # blocked: wait until the stretch frees up
                continue
            self._release(a.id)
            self._reserve(a.id, pairs)
            st.reserved = deque(pairs)
            nodes = [a.current] + [n for n, _ in pairs]
            a.plan = deque((nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1))
        self._break_deadlocks(now)

    def _break_deadlocks(self, now: int) -> None:
        """Force one agent per wait-for cycle (and per at-goal blockade) to a
        random free cardinal neighbor; it must come back to the node it was
        forced off before resuming its route."""
        threshold = self.config.wait_threshold
        positions = {a.current: a.id for a in self.agents}
        by_id = {a.id: a for a in self.agents}
        blocked = {}
        for a in self.agents:
            st = self.state[a.id]
            if st.waits < threshold or not st.route or st.forced is not None:
                continue
            nxt = st.route[0]
            blocker = positions.get(nxt)
            if blocker is None:
                blocker = self._owner(nxt, now + 1)
            if blocker is not None and blocker != a.id:
                blocked[a.id] = blocker

        to_force: set[int] = set()
        for aid, blocker in blocked.items():
            b = by_id[blocker]
            if b.current == b.goal and not self.state[blocker].route:
                to_force.add(min(aid, blocker))
        seen: dict[int, int] = {}
        color = 0
        for start in sorted(blocked):
            if start in seen:
                continue
            color += 1
            chain = []
            cur = start
            while cur in blocked and cur not in seen:
                seen[cur] = color
                chain.append(cur)
                cur = blocked[cur]
            if cur in seen and seen[cur] == color:
                to_force.add(min(chain[chain.index(cur):]))

        for aid in sorted(to_force):
            a = by_id[aid]
            st = self.state[aid]
            free = sorted(
                Node(a.current.x + dx, a.current.y + dy)
                for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if self.grid.is_passable(a.current.x + dx, a.current.y + dy)
                and Node(a.current.x + dx, a.current.y + dy) not in positions
            )
            if not free:
                continue  # boxed in; retry next step
            target = self.rng.choice(free)
            self._release(aid)
            self._reserve(aid, [(target, now + 1)])
            st.forced = (target, a.current)
            st.reserved = deque()
            a.plan = deque([(a.current, target)])

    def after_commit(self, now: int, committed: dict[int, tuple[Node, Node]]) -> None:
        for a in self.agents:
            frm, to = committed[a.id]
            st = self.state[a.id]
            if st.forced is not None:
                target, back = st.forced
                if to == target:
                    st.forced = None
                    st.waits = 0
                    ret = far_plan(to, back, self.flow, self.grid)
                    st.route = deque(ret[1:]) + st.route if ret else st.route
                    st.reserved = deque()
                else:
                    st.forced = None  # displacement refused; try again later
                a.plan = deque()
                continue
            if to != frm:
                st.waits = 0
                if st.reserved and st.reserved[0][0] == to:
                    st.reserved.popleft()
                if st.route and st.route[0] == to:
                    st.route.popleft()
            else:
                if a.plan and a.plan[0][0] == frm and a.plan[0][1] != frm:
                    # Commit refused our booked move: reservations are stale.
                    self._release(a.id)
                    st.reserved = deque()
                    a.plan = deque()
                if st.route:
                    st.waits += 1

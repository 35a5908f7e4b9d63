"""Discrete-time simulation: synchronous move commitment, budgets, metrics."""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple, Protocol

from .grid import GridMap, Node

log = logging.getLogger(__name__)

WALL_CLOCK = "wall_clock"
STEP_COUNT = "step_count"


@dataclass(frozen=True)
class Budget:
    """Run budget. ``wall_clock`` ends a run after ``limit`` real seconds;
    ``step_count`` runs exactly ``max_steps`` steps and charges each step a
    fixed simulated duration of ``limit / max_steps`` seconds, which makes
    runs reproducible regardless of host speed."""

    mode: str = WALL_CLOCK
    limit: float = 30.0
    max_steps: int = 512

    def __post_init__(self):
        if self.mode not in (WALL_CLOCK, STEP_COUNT):
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if self.limit <= 0:
            raise ValueError("budget limit must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @property
    def step_duration(self) -> float:
        return self.limit / self.max_steps

    def spec(self) -> str:
        if self.mode == WALL_CLOCK:
            return f"wall_clock:{self.limit:g}"
        return f"step_count:{self.max_steps}:{self.limit:g}"

    @classmethod
    def parse(cls, text: str) -> "Budget":
        """Parse 'wall:SECONDS' or 'steps:N[:SECONDS]' (long names accepted)."""
        parts = text.split(":")
        mode = {"wall": WALL_CLOCK, WALL_CLOCK: WALL_CLOCK,
                "steps": STEP_COUNT, STEP_COUNT: STEP_COUNT}.get(parts[0])
        try:
            if mode == WALL_CLOCK and len(parts) == 2:
                return cls(WALL_CLOCK, limit=float(parts[1]))
            if mode == STEP_COUNT and len(parts) in (2, 3):
                limit = float(parts[2]) if len(parts) == 3 else 30.0
                return cls(STEP_COUNT, limit=limit, max_steps=int(parts[1]))
        except ValueError:
            pass
        raise ValueError(f"bad budget spec {text!r}")


class Move(NamedTuple):
    step: int
    agent: int
    frm: Node
    to: Node
    cost: float


@dataclass
class AgentState:
    id: int
    start: Node
    goal: Node
    current: Node
    plan: deque = field(default_factory=deque)  # of (from, to) node pairs
    arrived_time: float | None = None


def make_agents(pairs: Iterable[tuple[Node, Node]]) -> list[AgentState]:
    return [AgentState(i, s, g, s) for i, (s, g) in enumerate(pairs)]


class Planner(Protocol):
    def prepare(self, now: int) -> None: ...

    def after_commit(self, now: int, committed: dict[int, tuple[Node, Node]]) -> None: ...


class PlanningClock:
    """Per-step planning budget shared across agents.

    The wall-clock time left in the run is split evenly over the agents; an
    agent may start a (re)plan only while the step's planning time is within
    its cumulative share. Under a step budget there is no limit.
    """

    def __init__(self, n_agents: int, limit: float | None):
        self.n_agents = max(1, n_agents)
        self.limit = limit
        self._slice = float("inf")
        self._step_t0 = 0.0
        self._planned = 0

    def start_step(self, elapsed: float) -> None:
        if self.limit is not None:
            self._slice = max(0.0, self.limit - elapsed) / self.n_agents
        self._step_t0 = time.monotonic()
        self._planned = 0

    def begin_plan(self) -> bool:
        """True if another plan may start this step."""
        if self.limit is None:
            self._planned += 1
            return True
        spent = time.monotonic() - self._step_t0
        ok = spent <= self._slice * (self._planned + 1)
        if ok:
            self._planned += 1
        return ok


def commit_moves(
    proposals: dict[int, tuple[Node, Node]],
    occupancy: dict[Node, int],
    grid: GridMap | None = None,
) -> dict[int, tuple[Node, Node]]:
    """Resolve simultaneous proposals into collision-free moves.

    Agents commit in ascending id. A move is demoted to a wait when its
    target is still occupied (the occupant may have vacated earlier in the
    same pass), when it would complete a position swap with an already
    committed move, or when the edge is illegal on the grid. Waits always
    succeed.
    """
    committed: dict[int, tuple[Node, Node]] = {}
    occ = dict(occupancy)
    done_moves: set[tuple[Node, Node]] = set()
    for aid in sorted(proposals):
        frm, to = proposals[aid]
        if to != frm and grid is not None:
            try:
                grid.edge_cost(frm, to)
            except ValueError:
                log.warning("agent %d proposed illegal edge %s->%s; waiting", aid, frm, to)
                to = frm
        if to != frm and occ.get(to) is not None:
            to = frm
        if to != frm and (to, frm) in done_moves:
            to = frm  # would swap positions with an already committed move
        committed[aid] = (frm, to)
        if to != frm:
            del occ[frm]
            occ[to] = aid
            done_moves.add((frm, to))
    return committed


@dataclass
class ExecutionTrace:
    moves: list[Move]
    final_positions: list[Node]
    arrivals: list[float | None]
    elapsed: float
    steps: int
    reason: str


class MetricsTriple(NamedTuple):
    completion_rate: float
    total_distance: float
    goal_achievement_time: float


def compute_metrics(trace: ExecutionTrace, n_agents: int, time_limit: float) -> MetricsTriple:
    """Completion rate, total traveled distance, mean goal achievement time.

    An agent's arrival time is the moment it last entered its goal and is
    discarded again if it leaves, so only agents on their goals when the run
    ends count as completed. Unfinished agents are charged the full time
    limit, and recorded arrivals are clamped to it.
    """
    done = sum(1 for t in trace.arrivals if t is not None)
    total = sum(m.cost for m in trace.moves)
    gat = [time_limit if t is None else min(t, time_limit) for t in trace.arrivals]
    mean_gat = sum(gat) / n_agents if n_agents else 0.0
    return MetricsTriple(done / n_agents if n_agents else 0.0, total, mean_gat)


@dataclass
class RunResult:
    trace: ExecutionTrace
    metrics: MetricsTriple
    failed: bool = False
    error: str | None = None


def run_instance(
    grid: GridMap,
    agents: list[AgentState],
    planner_factory,
    budget: Budget,
    seed: int = 0,
) -> RunResult:
    """Run one planner on one problem until the budget expires.

    ``planner_factory(grid, agents, seed, clock)`` builds the planner. Each
    step the planner refreshes agent plans, every agent proposes the head of
    its plan (or a wait when the plan is empty or stale), and the commit
    rule resolves conflicts. A planner exception aborts the run; the partial
    trace is kept and the result is flagged failed.
    """
    starts = [a.start for a in agents]
    if len(set(starts)) != len(starts):
        raise ValueError("agents must have pairwise distinct start nodes")
    for a in agents:
        if not grid.is_passable(a.start.x, a.start.y):
            raise ValueError(f"agent {a.id} starts on blocked cell {a.start}")
        if not grid.is_passable(a.goal.x, a.goal.y):
            raise ValueError(f"agent {a.id} goal is blocked: {a.goal}")
        if not grid.reachable(a.start, a.goal):
            raise ValueError(f"agent {a.id} goal {a.goal} unreachable from {a.start}")
        a.current = a.start
        a.plan = deque()
        a.arrived_time = 0.0 if a.start == a.goal else None

    clock = PlanningClock(len(agents), budget.limit if budget.mode == WALL_CLOCK else None)
    planner = planner_factory(grid, agents, seed, clock)
    moves: list[Move] = []
    t0 = time.monotonic()
    now = 0
    reason = "all_at_goal"
    failed = False
    error = None

    def sim_elapsed() -> float:
        if budget.mode == WALL_CLOCK:
            return time.monotonic() - t0
        return now * budget.step_duration

    while True:
        if all(a.current == a.goal for a in agents):
            reason = "all_at_goal"
            break
        if budget.mode == WALL_CLOCK and sim_elapsed() >= budget.limit:
            reason = "budget_exhausted"
            break
        if budget.mode == STEP_COUNT and now >= budget.max_steps:
            reason = "budget_exhausted"
            break

        clock.start_step(sim_elapsed())
        try:
            planner.prepare(now)
        except Exception as exc:  # planner bug: keep the partial trace
            log.error("planner failed at step %d: %s", now, exc)
            reason = "planner_error"
            failed = True
            error = f"{type(exc).__name__}: {exc}"
            break

        proposals: dict[int, tuple[Node, Node]] = {}
        for a in agents:
            if a.plan and a.plan[0][0] == a.current:
                proposals[a.id] = a.plan[0]
            else:
                proposals[a.id] = (a.current, a.current)
        occupancy = {a.current: a.id for a in agents}
        committed = commit_moves(proposals, occupancy, grid)

        for a in agents:
            frm, to = committed[a.id]
            cost = 0.0 if to == frm else grid.edge_cost(frm, to)
            moves.append(Move(now, a.id, frm, to, cost))
            if a.plan and a.plan[0] == (frm, to):
                a.plan.popleft()
            a.current = to
        now += 1
        arrival_clock = min(sim_elapsed(), budget.limit)
        for a in agents:
            if a.current == a.goal:
                if a.arrived_time is None:
                    a.arrived_time = arrival_clock
            else:
                a.arrived_time = None

        try:
            planner.after_commit(now - 1, committed)
        except Exception as exc:
            log.error("planner failed after commit at step %d: %s", now - 1, exc)
            reason = "planner_error"
            failed = True
            error = f"{type(exc).__name__}: {exc}"
            break

    trace = ExecutionTrace(
        moves=moves,
        final_positions=[a.current for a in agents],
        arrivals=[a.arrived_time for a in agents],
        elapsed=sim_elapsed(),
        steps=now,
        reason=reason,
    )
    metrics = compute_metrics(trace, len(agents), budget.limit)
    if failed:
        metrics = MetricsTriple(0.0, metrics.total_distance, budget.limit)
    return RunResult(trace, metrics, failed=failed, error=error)


TRACE_HEADER = "# step agent from_x from_y to_x to_y cost"


def write_trace(trace: ExecutionTrace, fh: IO[str]) -> None:
    fh.write(TRACE_HEADER + "\n")
    for m in trace.moves:
        fh.write(
            f"{m.step} {m.agent} {m.frm.x} {m.frm.y} {m.to.x} {m.to.y} {m.cost!r}\n"
        )
    fh.write(f"# steps={trace.steps} reason={trace.reason}\n")


def read_trace(fh: IO[str]) -> list[Move]:
    moves = []
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        s, a, fx, fy, tx, ty, c = line.split()
        moves.append(Move(int(s), int(a), Node(int(fx), int(fy)), Node(int(tx), int(ty)), float(c)))
    return moves

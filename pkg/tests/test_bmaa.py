from __future__ import annotations

import math
import random
from collections import deque

import pytest

from mapfbench.bmaa import (
    BmaaConfig,
    BmaaPlanner,
    HeuristicTable,
    bounded_search,
    update_heuristics,
)
from mapfbench.engine import Budget, make_agents, run_instance
from mapfbench.grid import SQRT2, Node, grid_from_strings, octile
from oracles import dijkstra, random_grid, shortest_cost, validate_trace


def bmaa_factory(config=None):
    def factory(grid, agents, seed, clock):
        return BmaaPlanner(grid, agents, seed, clock, config)

    return factory


def test_heuristic_table_floor_and_goal():
    goal = Node(3, 3)
    h = HeuristicTable(goal)
    n = Node(0, 0)
    base = octile(n, goal)
    assert h.get(n) == pytest.approx(base)
    h.raise_to(n, base - 1.0)  # learning never lowers below octile
    assert h.get(n) == pytest.approx(base)
    h.raise_to(n, base + 2.0)
    assert h.get(n) == pytest.approx(base + 2.0)
    h.raise_to(goal, 5.0)
    assert h.get(goal) == 0.0


def test_bounded_search_goal_within_lookahead():
    grid = grid_from_strings(["." * 5 for _ in range(5)])
    start, goal = Node(0, 0), Node(4, 4)
    h = HeuristicTable(goal)
    path, closed, f_best = bounded_search(grid, start, goal, h, set(), 64)
    assert path[0] == start and path[-1] == goal
    assert f_best == pytest.approx(octile(start, goal))
    update_heuristics(h, closed, f_best)
    assert h.learned() == {}  # exact heuristic: nothing to learn


def test_bounded_search_truncated_moves_toward_frontier():
    grid = grid_from_strings(["." * 20])
    start, goal = Node(0, 0), Node(19, 0)
    h = HeuristicTable(goal)
    path, closed, f_best = bounded_search(grid, start, goal, h, set(), 4)
    assert len(path) >= 2
    assert path[-1] != goal
    assert f_best == pytest.approx(octile(start, goal))  # straight-line frontier


def test_bounded_search_boxed_in_returns_empty():
    grid = grid_from_strings(["...", "...", "..."])
    start = Node(1, 1)
    occupied = {v for v, _ in grid.neighbors(start)}
    h = HeuristicTable(Node(2, 2))
    path, closed, f_best = bounded_search(grid, start, Node(2, 2), h, occupied, 32)
    assert path == []
    assert math.isinf(f_best)
    update_heuristics(h, closed, f_best)  # no-op, must not raise
    assert h.learned() == {}


def test_update_heuristics_wall_case_hand_traced():
    # Lookahead 2 from (1,0) toward (3,0) behind the wall column x=2:
    # expansions close (1,0) g=0 and (1,1) g=1, the best open node is
    # (0,0) with f = 1 + octile((0,0),(3,0)) = 4, so h(1,0) -> 4 and
    # h(1,1) -> 3.
    grid = grid_from_strings([
        "..@.",
        "..@.",
        "....",
    ])
    start, goal = Node(1, 0), Node(3, 0)
    h = HeuristicTable(goal)
    path, closed, f_best = bounded_search(grid, start, goal, h, set(), 2)
    assert closed == {start: 0.0, Node(1, 1): 1.0}
    assert f_best == pytest.approx(4.0)
    update_heuristics(h, closed, f_best)
    assert h.get(start) == pytest.approx(4.0)
    assert h.get(Node(1, 1)) == pytest.approx(3.0)
    assert h.get(start) > octile(start, goal)
    # Learned values stay below the true distances.
    exact = dijkstra(grid, goal)
    assert h.get(start) <= exact[start] + 1e-9
    assert h.get(Node(1, 1)) <= exact[Node(1, 1)] + 1e-9


def test_full_lookahead_single_agent_is_optimal():
    rng = random.Random(13)
    for _ in range(5):
        grid = random_grid(rng, 12, 12, density=0.25)
        comp = sorted(grid.connected_components()[0])
        start, goal = rng.sample(comp, 2)
        agents = make_agents([(start, goal)])
        config = BmaaConfig(lookahead=len(grid.passable_nodes()) + 1)
        result = run_instance(grid, agents, bmaa_factory(config), Budget.parse("steps:512"))
        assert result.trace.reason == "all_at_goal"
        assert result.metrics.total_distance == pytest.approx(
            shortest_cost(grid, start, goal), abs=1e-9
        )


def test_learned_h_within_bounds_over_full_runs():
    rng = random.Random(41)
    for _ in range(5):
        grid = random_grid(rng, 12, 12, density=0.25)
        comp = sorted(grid.connected_components()[0])
        start, goal = rng.sample(comp, 2)
        agents = make_agents([(start, goal)])
        planners = []

        def factory(g, ag, seed, clock, _keep=planners):
            p = BmaaPlanner(g, ag, seed, clock)
            _keep.append(p)
            return p

        run_instance(grid, agents, factory, Budget.parse("steps:512"))
        table = planners[0].tables[0]
        exact = dijkstra(grid, goal)
        for n, value in table.learned().items():
            assert value >= octile(n, goal) - 1e-9
            assert value <= exact[n] + 1e-9
        assert table.get(goal) == 0.0


def test_vacate_request_moves_resting_occupant():
    grid = grid_from_strings(["...", "...", "..."])
    # Agent 1 rests on agent 0's goal; it must offer the lexicographically
    # smallest free neighbor and clear its own plan.
    agents = make_agents([(Node(0, 0), Node(2, 2)), (Node(2, 2), Node(2, 2))])
    planner = BmaaPlanner(grid, agents, 0, None)
    planner.prepare(0)
    assert list(agents[1].plan) == [(Node(2, 2), Node(1, 1))]


def test_vacate_target_with_no_free_neighbor_stays():
    grid = grid_from_strings(["....."])
    # Occupant boxed between the requester and a third agent.
    agents = make_agents([
        (Node(1, 0), Node(2, 0)),
        (Node(2, 0), Node(2, 0)),
        (Node(3, 0), Node(4, 0)),
    ])
    planner = BmaaPlanner(grid, agents, 0, None)
    planner.prepare(0)
    assert not agents[1].plan


def test_flow_annotations_rejected():
    grid = grid_from_strings([".."])
    agents = make_agents([(Node(0, 0), Node(1, 0))])
    with pytest.raises(ValueError, match="flow annotations"):
        BmaaPlanner(grid, agents, 0, None, BmaaConfig(flow_annotations=True))


def test_bmaa_blocked_next_node_routes_around():
    # A stationary agent sits mid-corridor of a 2-row map; the traveler must
    # route around through the other row without conflicts.
    grid = grid_from_strings(["....", "...."])
    agents = make_agents([(Node(0, 0), Node(3, 0)), (Node(1, 0), Node(1, 0))])
    starts = [a.start for a in agents]
    result = run_instance(grid, agents, bmaa_factory(), Budget.parse("steps:64"))
    assert result.trace.reason == "all_at_goal"
    validate_trace(grid, starts, result.trace.moves)
    assert any(m.to.y == 1 for m in result.trace.moves if m.agent == 0)


def test_bmaa_multi_agent_trace_clean():
    grid = grid_from_strings([
        "......",
        "..@@..",
        "..@...",
        "......",
    ])
    rng = random.Random(8)
    comp = sorted(grid.connected_components()[0])
    starts = rng.sample(comp, 6)
    goals = rng.sample(comp, 6)
    agents = make_agents(list(zip(starts, goals)))
    result = run_instance(grid, agents, bmaa_factory(), Budget.parse("steps:256"))
    assert not result.failed
    validate_trace(grid, starts, result.trace.moves)


def test_bmaa_config_validation():
    with pytest.raises(ValueError):
        BmaaConfig(lookahead=0)

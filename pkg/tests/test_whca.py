from __future__ import annotations

import math
import random
from collections import deque

import pytest

from mapfbench.engine import Budget, make_agents, run_instance
from mapfbench.grid import Node, grid_from_strings, octile
from mapfbench.whca import (
    RraHeuristic,
    ReservationTable,
    WhcaConfig,
    WhcaPlanner,
    plan_window,
)
from oracles import dijkstra, random_grid, shortest_cost, validate_trace


def whca_factory(config=None):
    def factory(grid, agents, seed, clock):
        return WhcaPlanner(grid, agents, seed, clock, config)

    return factory


# -- reservation table --------------------------------------------------------


def test_reservation_ownership_and_refusal():
    t = ReservationTable()
    n = Node(1, 1)
    assert t.reserve_vertex(0, n, 3)
    assert t.vertex_owner(n, 3) == 0
    assert not t.reserve_vertex(1, n, 3)
    assert t.vertex_owner(n, 3) == 0
    assert t.reserve_vertex(0, n, 3)  # re-reserving one's own key is fine


def test_reservation_release_only_own_keys():
    t = ReservationTable()
    a, b = Node(0, 0), Node(1, 0)
    t.reserve_path(0, [a, b], 0)
    t.reserve_vertex(1, Node(2, 2), 1)
    t.release(0)
    assert t.vertex_owner(a, 0) is None
    assert t.vertex_owner(b, 1) is None
    assert t.edge_owner(a, b, 0) is None
    assert t.vertex_owner(Node(2, 2), 1) == 1


# -- rra heuristic ------------------------------------------------------------


def test_rra_matches_octile_on_open_grid():
    grid = grid_from_strings(["." * 6 for _ in range(6)])
    goal = Node(5, 5)
    h = RraHeuristic(grid, goal)
    for n in grid.passable_nodes():
        assert h.query(n) == pytest.approx(octile(n, goal), abs=1e-12)
    assert h.query(goal) == 0.0


def test_rra_exceeds_octile_behind_u_wall():
    grid = grid_from_strings([
        ".....",
        ".@@@.",
        ".@.@.",
        ".@.@.",
        ".....",
    ])
    goal = Node(2, 2)
    start = Node(2, 0)
    h = RraHeuristic(grid, goal)
    exact = dijkstra(grid, goal)
    assert h.query(start) == pytest.approx(exact[start], abs=1e-12)
    assert h.query(start) > octile(start, goal) + 0.5


def test_rra_exact_on_random_maps():
    rng = random.Random(11)
    for _ in range(20):
        grid = random_grid(rng, 14, 14, density=0.3)
        nodes = grid.passable_nodes()
        goal = rng.choice(nodes)
        h = RraHeuristic(grid, goal)
        exact = dijkstra(grid, goal)
        for n in nodes:
            if n in exact:
                assert h.query(n) == pytest.approx(exact[n], abs=1e-12)
            else:
                assert math.isinf(h.query(n))


def test_rra_unreachable_is_infinite():
    grid = grid_from_strings(["..@..", "..@..", "..@.."])
    h = RraHeuristic(grid, Node(0, 0))
    assert math.isinf(h.query(Node(4, 0)))


# -- plan_window --------------------------------------------------------------


def _plan_cost(grid, nodes, goal):
    cost = 0.0
    for i in range(len(nodes) - 1):
        if nodes[i + 1] != nodes[i]:
            cost += grid.edge_cost(nodes[i], nodes[i + 1])
    return cost


def test_plan_window_single_agent_optimal_prefix():
    grid = grid_from_strings(["." * 9 for _ in range(9)])
    agents = make_agents([(Node(0, 0), Node(8, 8))])
    a = agents[0]
    table = ReservationTable()
    h = RraHeuristic(grid, a.goal)
    nodes = plan_window(a, grid, table, h, 8, 0)
    assert len(nodes) == 9  # full window of moves
    # Following an optimal route: g of the endpoint plus its remaining
    # distance equals the true start-goal distance.
    assert _plan_cost(grid, nodes, a.goal) + h.query(nodes[-1]) == pytest.approx(h.query(a.start))


def test_plan_window_respects_vertex_reservation():
    grid = grid_from_strings(["...."])
    agents = make_agents([(Node(0, 0), Node(3, 0))])
    a = agents[0]
    table = ReservationTable()
    table.reserve_vertex(99, Node(1, 0), 1)  # someone sits there at t=1
    h = RraHeuristic(grid, a.goal)
    nodes = plan_window(a, grid, table, h, 4, 0)
    assert nodes[1] == Node(0, 0)  # forced to open with a wait
    assert nodes[-1] == Node(3, 0) or len(nodes) == 5


def test_plan_window_crossing_agents_conflict_free():
    grid = grid_from_strings(["." * 5 for _ in range(5)])
    agents = make_agents([(Node(0, 2), Node(4, 2)), (Node(2, 0), Node(2, 4))])
    table = ReservationTable()
    cfg = WhcaConfig(window=8)
    plans = []
    for a in agents:
        h = RraHeuristic(grid, a.goal)
        nodes = plan_window(a, grid, table, h, cfg.window, 0)
        table.reserve_path(a.id, nodes, 0)
        plans.append(nodes)
    # Exhaustive pairwise check of the two space-time paths.
    occupied = {}
    for aid, nodes in enumerate(plans):
        for t, n in enumerate(nodes):
            assert occupied.get((n, t), aid) == aid, f"vertex clash at {(n, t)}"
            occupied[(n, t)] = aid
    edges = set()
    for aid, nodes in enumerate(plans):
        for t in range(len(nodes) - 1):
            u, v = nodes[t], nodes[t + 1]
            if u != v:
                assert (v, u, t, 1 - aid) not in edges, f"swap at t={t}"
                edges.add((u, v, t, aid))
    # Both still make real progress.
    for nodes, a in zip(plans, agents):
        assert nodes[-1] != a.start


def test_plan_window_boxed_in_falls_back_to_wait():
    grid = grid_from_strings(["...", ".@.", "..."])
    agents = make_agents([(Node(0, 0), Node(2, 2))])
    a = agents[0]
    table = ReservationTable()
    # Wall off every move and the stand-still slot at t=1 except waiting.
    for v, _ in grid.neighbors(Node(0, 0)):
        table.reserve_vertex(99, v, 1)
    h = RraHeuristic(grid, a.goal)
    nodes = plan_window(a, grid, table, h, 4, 0)
    assert nodes[0] == Node(0, 0)
    assert nodes[1] == Node(0, 0)


# -- planner end-to-end -------------------------------------------------------


def test_whca_single_agent_cost_optimal_any_window():
    rng = random.Random(5)
    for window in (2, 3, 8):
        grid = random_grid(rng, 12, 12, density=0.25, name=f"w{window}")
        nodes = sorted(grid.connected_components()[0])
        start, goal = rng.sample(nodes, 2)
        agents = make_agents([(start, goal)])
        result = run_instance(
            grid, agents, whca_factory(WhcaConfig(window=window)), Budget.parse("steps:512")
        )
        assert result.trace.reason == "all_at_goal"
        assert result.metrics.total_distance == pytest.approx(
            shortest_cost(grid, start, goal), abs=1e-9
        )


def test_whca_goal_holding_reserves_goal():
    grid = grid_from_strings(["...."])
    agents = make_agents([(Node(1, 0), Node(1, 0))])
    planner = WhcaPlanner(grid, agents, 0, None, WhcaConfig(window=4))
    planner.prepare(0)
    a = agents[0]
    assert all(frm == to == a.goal for frm, to in a.plan)
    assert planner.table.vertex_owner(a.goal, 2) == a.id


def test_whca_multi_agent_trace_clean():
    grid = grid_from_strings([
        "........",
        "..@@@...",
        "..@.....",
        "........",
        "....@@..",
        "........",
    ])
    rng = random.Random(3)
    comp = sorted(grid.connected_components()[0])
    starts = rng.sample(comp, 6)
    goals = rng.sample(comp, 6)
    agents = make_agents(list(zip(starts, goals)))
    result = run_instance(grid, agents, whca_factory(), Budget.parse("steps:256"))
    assert not result.failed
    validate_trace(grid, starts, result.trace.moves)


def test_whca_config_validation():
    with pytest.raises(ValueError):
        WhcaConfig(window=0)
    with pytest.raises(ValueError):
        WhcaConfig(window=4, replan_interval=5)
    assert WhcaConfig(window=8).interval == 4
    assert WhcaConfig(window=1).interval == 1

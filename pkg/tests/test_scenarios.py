from __future__ import annotations

import io
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapfbench.grid import Node, grid_from_strings
from mapfbench.scenarios import (
    SCENARIO_TYPES,
    GenerationError,
    generate,
    grow_cluster,
    load_instance,
    read_instance,
    write_instance,
)
from oracles import random_grid

OPEN20 = grid_from_strings(["." * 20 for _ in range(20)], name="open20")


def assert_instance_invariants(grid, inst, n):
    starts = [s for s, _ in inst.agents]
    goals = [g for _, g in inst.agents]
    assert len(inst.agents) == n
    assert len(set(starts)) == n, "starts must be pairwise distinct"
    assert len(set(goals)) == n, "goals must be pairwise distinct"
    for s, g in inst.agents:
        assert grid.is_passable(s.x, s.y) and grid.is_passable(g.x, g.y)
        assert grid.reachable(s, g)


def test_generate_deterministic():
    a = generate(OPEN20, "random", 10, seed=7)
    b = generate(OPEN20, "random", 10, seed=7)
    assert a.agents == b.agents
    c = generate(OPEN20, "random", 10, seed=8)
    assert a.agents != c.agents


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(SCENARIO_TYPES),
    st.integers(0, 10_000),
    st.integers(2, 12),
)
def test_all_types_hold_invariants_on_random_maps(scenario, seed, n):
    rng = random.Random(seed)
    grid = random_grid(rng, 24, 24, density=0.15, name=f"m{seed}")
    try:
        inst = generate(grid, scenario, n, seed)
    except GenerationError:
        return  # small/fragmented regions are allowed to fail loudly
    assert_instance_invariants(grid, inst, n)
    assert inst.scenario == scenario
    assert inst.seed == seed


def test_cross_sides_band_membership():
    inst = generate(OPEN20, "cross_sides", 12, seed=3)
    depth = math.ceil(0.1 * 20)
    start_band = inst.regions["starts"]
    goal_band = inst.regions["goals"]
    for s, g in inst.agents:
        assert s in start_band
        assert g in goal_band
    # Opposite 10% bands: starts and goals hug opposing edges.
    edge = {min(n.x, n.y, 19 - n.x, 19 - n.y) for n in list(start_band) + list(goal_band)}
    assert max(edge) < depth


def test_swap_sides_mirrored_halves():
    n = 9
    inst = generate(OPEN20, "swap_sides", n, seed=11)
    a, b = inst.regions["side_a"], inst.regions["side_b"]
    k = (n + 1) // 2
    for i, (s, g) in enumerate(inst.agents):
        if i < k:
            assert s in a and g in b
        else:
            assert s in b and g in a


def test_inside_out_and_outside_in_regions():
    for scenario in ("inside_out", "outside_in"):
        inst = generate(OPEN20, scenario, 8, seed=4)
        r = math.ceil(0.15 * 20)
        center = {
            n for n in inst.regions["starts" if scenario == "inside_out" else "goals"]
        }
        for node in center:
            assert max(abs(node.x - 9.5), abs(node.y - 9.5)) <= r
        border = inst.regions["goals" if scenario == "inside_out" else "starts"]
        b = math.ceil(0.1 * 20)
        for node in border:
            assert min(node.x, node.y, 19 - node.x, 19 - node.y) < b
        assert_instance_invariants(OPEN20, inst, 8)


def test_tight_to_tight_start_cluster_connected():
    inst = generate(OPEN20, "tight_to_tight", 10, seed=5)
    starts = {s for s, _ in inst.agents}
    # BFS-grown: connected as a node set under the 8-neighborhood.
    seen = {next(iter(sorted(starts)))}
    frontier = list(seen)
    while frontier:
        u = frontier.pop()
        for v, _ in OPEN20.neighbors(u):
            if v in starts and v not in seen:
                seen.add(v)
                frontier.append(v)
    assert seen == starts


def test_tight_to_wide_goals_in_disc():
    inst = generate(OPEN20, "tight_to_wide", 10, seed=6)
    disc = inst.regions["goals"]
    for _, g in inst.agents:
        assert g in disc
    radius = math.ceil(0.2 * 20)
    xs = sorted(n.x for n in disc)
    ys = sorted(n.y for n in disc)
    assert xs[-1] - xs[0] <= 2 * radius
    assert ys[-1] - ys[0] <= 2 * radius


def test_grow_cluster_collects_requested_count():
    cluster = grow_cluster(OPEN20, Node(10, 10), 7)
    assert len(cluster) == 7
    assert len(set(cluster)) == 7


def test_generation_error_when_component_too_small():
    grid = grid_from_strings(["..@", "..@", "@@@"], name="tiny")
    with pytest.raises(GenerationError, match="largest component"):
        generate(grid, "random", 3, seed=0)


def test_generation_error_names_map_type_seed():
    # Bands of a 3-wide strip cannot host 4 distinct start cells.
    grid = grid_from_strings(["." * 30 for _ in range(3)], name="strip")
    with pytest.raises(GenerationError, match="strip") as err:
        generate(grid, "inside_out", 30, seed=9)
    assert "inside_out" in str(err.value)
    assert "seed=9" in str(err.value)


def test_sampling_stays_in_largest_component():
    # Right block is bigger; the small left block must never be used.
    grid = grid_from_strings([
        "..@....",
        "..@....",
        "..@....",
        "..@....",
    ], name="split")
    for seed in range(5):
        inst = generate(grid, "random", 6, seed=seed)
        for s, g in inst.agents:
            assert s.x > 2 and g.x > 2


def test_instance_file_round_trip(tmp_path):
    inst = generate(OPEN20, "cross_sides", 5, seed=12, instance_id="open20__cross_sides__000")
    path = tmp_path / f"{inst.id}.inst"
    with open(path, "w") as fh:
        write_instance(inst, fh)
    loaded = load_instance(path)
    assert loaded.id == inst.id
    assert loaded.map_name == inst.map_name
    assert loaded.scenario == inst.scenario
    assert loaded.seed == inst.seed
    assert loaded.agents == inst.agents


def test_read_instance_rejects_bad_header():
    with pytest.raises(GenerationError, match="bad header"):
        read_instance("map m\ntype random\nagents x\nseed 1\n", "broken")


def test_unknown_scenario_rejected():
    with pytest.raises(GenerationError, match="unknown scenario"):
        generate(OPEN20, "diagonal_swirl", 3, seed=0)

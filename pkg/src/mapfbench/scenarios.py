"""Seeded generation of the seven problem families, with reachability and
distinctness guarantees and per-type region geometry."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import IO

from .grid import GridMap, Node

SCENARIO_TYPES = (
    "random",
    "cross_sides",
    "swap_sides",
    "inside_out",
    "outside_in",
    "tight_to_tight",
    "tight_to_wide",
)

SIDES = ("left", "right", "top", "bottom")
OPPOSITE = {"left": "right", "right": "left", "top": "bottom", "bottom": "top"}

MAX_ATTEMPTS = 100  # each attempt resamples all n pairs


class GenerationError(RuntimeError):
    pass


class _Retry(Exception):
    pass


@dataclass
class ProblemInstance:
    id: str
    map_name: str
    scenario: str
    seed: int
    agents: list[tuple[Node, Node]]
    regions: dict[str, frozenset[Node]] = field(default_factory=dict, repr=False, compare=False)


def side_band(grid: GridMap, side: str) -> set[Node]:
    """Cells within ceil(10%) of one edge; depth scales with that axis."""
    if side in ("left", "right"):
        depth = math.ceil(0.1 * grid.width)
    else:
        depth = math.ceil(0.1 * grid.height)
    cells = set()
    for y in range(grid.height):
        for x in range(grid.width):
            if side == "left" and x < depth:
                cells.add(Node(x, y))
            elif side == "right" and x >= grid.width - depth:
                cells.add(Node(x, y))
            elif side == "top" and y < depth:
                cells.add(Node(x, y))
            elif side == "bottom" and y >= grid.height - depth:
                cells.add(Node(x, y))
    return cells


def center_region(grid: GridMap) -> set[Node]:
    """Chebyshev ball of radius ceil(15% of the short dimension) at the midpoint."""
    r = math.ceil(0.15 * min(grid.width, grid.height))
    cx = (grid.width - 1) / 2
    cy = (grid.height - 1) / 2
    return {
        Node(x, y)
        for y in range(grid.height)
        for x in range(grid.width)
        if max(abs(x - cx), abs(y - cy)) <= r
    }


def border_band(grid: GridMap) -> set[Node]:
    b = math.ceil(0.1 * min(grid.width, grid.height))
    return {
        Node(x, y)
        for y in range(grid.height)
        for x in range(grid.width)
        if min(x, y, grid.width - 1 - x, grid.height - 1 - y) < b
    }


def disc(grid: GridMap, anchor: Node, radius: int) -> set[Node]:
    return {
        Node(x, y)
        for y in range(grid.height)
        for x in range(grid.width)
        if (x - anchor.x) ** 2 + (y - anchor.y) ** 2 <= radius**2
    }


def grow_cluster(grid: GridMap, seed_cell: Node, n: int) -> list[Node]:
    """First n cells of a breadth-first flood from the seed cell."""
    cluster = [seed_cell]
    seen = {seed_cell}
    queue = deque([seed_cell])
    while queue and len(cluster) < n:
        u = queue.popleft()
        for v, _ in grid.neighbors(u):
            if v not in seen:
                seen.add(v)
                cluster.append(v)
                queue.append(v)
                if len(cluster) == n:
                    break
    return cluster


def _component_cells(grid: GridMap, region: set[Node], comp: frozenset[Node]) -> list[Node]:
    return sorted(region & comp)


def generate(
    grid: GridMap,
    scenario: str,
    n_agents: int,
    seed: int,
    instance_id: str | None = None,
) -> ProblemInstance:
    """Build one instance: distinct starts, distinct goals, every pair
    reachable. Sampling stays inside the largest connected component, so
    reachability holds by construction; violations trigger a resample, up
    to MAX_ATTEMPTS full redraws."""
    if scenario not in SCENARIO_TYPES:
        raise GenerationError(f"unknown scenario type {scenario!r}")
    if n_agents < 1:
        raise GenerationError("n_agents must be at least 1")
    comps = grid.connected_components()
    if not comps or len(comps[0]) < 2 * n_agents:
        raise GenerationError(
            f"map={grid.name} type={scenario} seed={seed}: largest component has "
            f"{len(comps[0]) if comps else 0} cells, need {2 * n_agents}"
        )
    comp = comps[0]
    rng = random.Random(seed)
    last = "exhausted retries"
    for _ in range(MAX_ATTEMPTS):
        try:
            starts, goals, regions = _sample(grid, scenario, n_agents, rng, comp)
        except _Retry as r:
            last = str(r)
            continue
        inst_id = instance_id or f"{grid.name}__{scenario}__{seed}"
        return ProblemInstance(inst_id, grid.name, scenario, seed, list(zip(starts, goals)), regions)
    raise GenerationError(f"map={grid.name} type={scenario} seed={seed}: {last}")


def _pick(rng: random.Random, cells: list[Node], n: int, what: str) -> list[Node]:
    if len(cells) < n:
        raise _Retry(f"{what} region has {len(cells)} usable cells, need {n}")
    return rng.sample(cells, n)


def _sample(grid, scenario, n, rng, comp):
    if scenario == "random":
        cells = sorted(comp)
        starts = _pick(rng, cells, n, "start")
        goals = _pick(rng, cells, n, "goal")
        return starts, goals, {}

    if scenario == "cross_sides":
        side = rng.choice(SIDES)
        a = side_band(grid, side)
        b = side_band(grid, OPPOSITE[side])
        starts = _pick(rng, _component_cells(grid, a, comp), n, f"{side} band")
        goals = _pick(rng, _component_cells(grid, b, comp), n, f"{OPPOSITE[side]} band")
        return starts, goals, {"starts": frozenset(a), "goals": frozenset(b)}

    if scenario == "swap_sides":
        side = rng.choice(SIDES)
        a = side_band(grid, side)
        b = side_band(grid, OPPOSITE[side])
        ca = _component_cells(grid, a, comp)
        cb = _component_cells(grid, b, comp)
        k = (n + 1) // 2
        starts_a = _pick(rng, ca, k, f"{side} band")
        goals_a = _pick(rng, cb, k, f"{OPPOSITE[side]} band")
        starts_b = _pick(rng, [c for c in cb if c not in set(starts_a)], n - k, f"{OPPOSITE[side]} band")
        goals_b = _pick(rng, [c for c in ca if c not in set(goals_a)], n - k, f"{side} band")
        return starts_a + starts_b, goals_a + goals_b, {"side_a": frozenset(a), "side_b": frozenset(b)}

    if scenario == "inside_out":
        starts = _pick(rng, _component_cells(grid, center_region(grid), comp), n, "center")
        goals = _pick(rng, _component_cells(grid, border_band(grid), comp), n, "border")
        return starts, goals, {"starts": frozenset(center_region(grid)), "goals": frozenset(border_band(grid))}

    if scenario == "outside_in":
        starts = _pick(rng, _component_cells(grid, border_band(grid), comp), n, "border")
        goals = _pick(rng, _component_cells(grid, center_region(grid), comp), n, "center")
        return starts, goals, {"starts": frozenset(border_band(grid)), "goals": frozenset(center_region(grid))}

    if scenario == "tight_to_tight":
        cells = sorted(comp)
        s_seed = rng.choice(cells)
        starts = grow_cluster(grid, s_seed, n)
        if len(starts) < n:
            raise _Retry("start cluster starved")  # cannot happen inside one component
        outside = [c for c in cells if c not in set(starts)]
        if not outside:
            raise _Retry("no room for the goal cluster")
        g_seed = rng.choice(outside)
        goals = grow_cluster(grid, g_seed, n)
        return starts, goals, {"starts": frozenset(starts), "goals": frozenset(goals)}

    if scenario == "tight_to_wide":
        cells = sorted(comp)
        s_seed = rng.choice(cells)
        starts = grow_cluster(grid, s_seed, n)
        anchor = rng.choice(cells)
        radius = math.ceil(0.2 * min(grid.width, grid.height))
        area = disc(grid, anchor, radius)
        goals = _pick(rng, _component_cells(grid, area, comp), n, "goal disc")
        return starts, goals, {"starts": frozenset(starts), "goals": frozenset(area)}

    raise GenerationError(f"unknown scenario type {scenario!r}")


# -- instance files ---------------------------------------------------------


def write_instance(instance: ProblemInstance, fh: IO[str]) -> None:
    fh.write(f"map {instance.map_name}\n")
    fh.write(f"type {instance.scenario}\n")
    fh.write(f"seed {instance.seed}\n")
    fh.write(f"agents {len(instance.agents)}\n")
    for s, g in instance.agents:
        fh.write(f"{s.x} {s.y} {g.x} {g.y}\n")


def read_instance(text: str, instance_id: str) -> ProblemInstance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = {}
    for ln in lines[:4]:
        key, _, value = ln.partition(" ")
        header[key] = value
    try:
        n = int(header["agents"])
        seed = int(header["seed"])
        map_name, scenario = header["map"], header["type"]
    except (KeyError, ValueError) as exc:
        raise GenerationError(f"instance {instance_id}: bad header ({exc})") from None
    agents = []
    for ln in lines[4 : 4 + n]:
        sx, sy, gx, gy = map(int, ln.split())
        agents.append((Node(sx, sy), Node(gx, gy)))
    if len(agents) != n:
        raise GenerationError(f"instance {instance_id}: expected {n} agent rows, found {len(agents)}")
    return ProblemInstance(instance_id, map_name, scenario, seed, agents)


def load_instance(path) -> ProblemInstance:
    import pathlib

    p = pathlib.Path(path)
    return read_instance(p.read_text(), p.stem)

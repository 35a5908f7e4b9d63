"""Octile grid world: MovingAI map parsing, 8-connected neighbors, distances."""

from __future__ import annotations

import heapq
import math
from collections import deque
from typing import Callable, Iterable, NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)

PASSABLE_CHARS = frozenset(".G")
BLOCKED_CHARS = frozenset("@OTSW")

# Fixed expansion order keeps BFS/A* tie-breaking reproducible.
CARDINAL_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAGONAL_OFFSETS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class Node(NamedTuple):
    x: int
    y: int


class MapParseError(ValueError):
    """Raised when a map file violates the MovingAI octile format."""


def octile(a: Node, b: Node) -> float:
    """Octile distance: exact cost of an obstacle-free 8-connected path."""
    dx = abs(a.x - b.x)
    dy = abs(a.y - b.y)
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


class GridMap:
    """Immutable grid. Cardinal moves cost 1, diagonal moves cost sqrt(2).

    A diagonal step is legal only when both flanking cardinal cells are
    passable, so paths cannot cut corners of obstacles.
    """

    def __init__(self, width: int, height: int, passable: Iterable, name: str = "map"):
        if width < 1 or height < 1:
            raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
        arr = np.asarray(passable, dtype=bool).reshape(height, width)
        arr.setflags(write=False)
        self.width = width
        self.height = height
        self.passable = arr
        self.name = name
        self._adjacency: dict[Node, tuple[tuple[Node, float], ...]] = {}
        self._components: list[frozenset[Node]] | None = None

    def __repr__(self) -> str:
        return f"GridMap({self.name!r}, {self.width}x{self.height})"

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_passable(self, x: int, y: int) -> bool:
        """True for passable in-bounds cells; out-of-bounds counts as blocked."""
        return self.in_bounds(x, y) and bool(self.passable[y, x])

    def passable_nodes(self) -> list[Node]:
        ys, xs = np.nonzero(self.passable)
        return [Node(int(x), int(y)) for y, x in zip(ys, xs)]

    def neighbors(self, n: Node) -> tuple[tuple[Node, float], ...]:
        """Legal (neighbor, cost) moves from a passable node."""
        cached = self._adjacency.get(n)
        if cached is not None:
            return cached
        if not self.is_passable(n.x, n.y):
            raise ValueError(f"node {n} is blocked or out of bounds on {self.name}")
        out: list[tuple[Node, float]] = []
        for dx, dy in CARDINAL_OFFSETS:
            if self.is_passable(n.x + dx, n.y + dy):
                out.append((Node(n.x + dx, n.y + dy), 1.0))
        for dx, dy in DIAGONAL_OFFSETS:
            if (
                self.is_passable(n.x + dx, n.y + dy)
                and self.is_passable(n.x + dx, n.y)
                and self.is_passable(n.x, n.y + dy)
            ):
                out.append((Node(n.x + dx, n.y + dy), SQRT2))
        result = tuple(out)
        self._adjacency[n] = result
        return result

    def edge_cost(self, a: Node, b: Node) -> float:
        """Cost of the edge a->b; 0.0 for a self-loop, raises for non-edges."""
        if a == b:
            return 0.0
        for v, c in self.neighbors(a):
            if v == b:
                return c
        raise ValueError(f"{a}->{b} is not a legal edge on {self.name}")

    def connected_components(self) -> list[frozenset[Node]]:
        """Components of the passable subgraph, largest first (ties by min node)."""
        if self._components is not None:
            return self._components
        seen: set[Node] = set()
        comps: list[frozenset[Node]] = []
        for start in self.passable_nodes():
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v, _ in self.neighbors(u):
                    if v not in comp:
                        comp.add(v)
                        queue.append(v)
            seen |= comp
            comps.append(frozenset(comp))
        comps.sort(key=lambda c: (-len(c), min(c)))
        self._components = comps
        return comps

    def reachable(self, a: Node, b: Node) -> bool:
        for comp in self.connected_components():
            if a in comp:
                return b in comp
        return False


def astar(
    start: Node,
    goal: Node,
    neighbors: Callable[[Node], Iterable[tuple[Node, float]]],
    heuristic: Callable[[Node], float],
) -> list[Node] | None:
    """Deterministic A*; returns the node path start..goal or None.

    Ties in f are broken by (h, x, y) so equal-cost searches reproduce the
    same path on every run.
    """
    g: dict[Node, float] = {start: 0.0}
    parent: dict[Node, Node] = {}
    closed: set[Node] = set()
    h0 = heuristic(start)
    frontier: list[tuple[float, float, int, int, Node]] = [(h0, h0, start.x, start.y, start)]
    while frontier:
        _, _, _, _, u = heapq.heappop(frontier)
        if u in closed:
            continue
        if u == goal:
            path = [u]
            while u in parent:
                u = parent[u]
                path.append(u)
            path.reverse()
            return path
        closed.add(u)
        gu = g[u]
        for v, c in neighbors(u):
            nv = gu + c
            if nv < g.get(v, math.inf) - 1e-12:
                g[v] = nv
                parent[v] = u
                hv = heuristic(v)
                heapq.heappush(frontier, (nv + hv, hv, v.x, v.y, v))
    return None


def parse_movingai(text: str, name: str = "map") -> GridMap:
    """Parse MovingAI octile map text.

    Header: ``type octile``, ``height H``, ``width W`` (either order), ``map``.
    Grid rows use '.'/'G' for passable and '@'/'O'/'T'/'S'/'W' for blocked.
    """
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    if not lines or lines[0].strip() != "type octile":
        raise MapParseError(f"{name}: line 1 must be 'type octile'")
    dims: dict[str, int] = {}
    for i in (1, 2):
        if i >= len(lines):
            raise MapParseError(f"{name}: missing header line {i + 1}")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] not in ("height", "width"):
            raise MapParseError(f"{name}: line {i + 1} must be 'height H' or 'width W'")
        try:
            dims[parts[0]] = int(parts[1])
        except ValueError:
            raise MapParseError(f"{name}: line {i + 1} has non-integer size {parts[1]!r}") from None
    if set(dims) != {"height", "width"}:
        raise MapParseError(f"{name}: header must give both height and width")
    if len(lines) < 4 or lines[3].strip() != "map":
        raise MapParseError(f"{name}: line 4 must be 'map'")
    height, width = dims["height"], dims["width"]
    if height < 1 or width < 1:
        raise MapParseError(f"{name}: dimensions must be positive, got {width}x{height}")

    rows = lines[4:]
    while rows and rows[-1].strip() == "":
        rows.pop()
    if len(rows) != height:
        raise MapParseError(f"{name}: expected {height} grid rows, found {len(rows)}")
    passable = np.zeros((height, width), dtype=bool)
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapParseError(
                f"{name}: line {y + 5} has {len(row)} cells, expected {width}"
            )
        for x, ch in enumerate(row):
            if ch in PASSABLE_CHARS:
                passable[y, x] = True
            elif ch not in BLOCKED_CHARS:
                raise MapParseError(
                    f"{name}: unknown terrain {ch!r} at line {y + 5}, column {x + 1}"
                )
    return GridMap(width, height, passable, name=name)


def load_map(path) -> GridMap:
    import pathlib

    p = pathlib.Path(path)
    return parse_movingai(p.read_text(), name=p.stem)


def grid_from_strings(rows: Iterable[str], name: str = "map") -> GridMap:
    """Build a map from row strings of '.'/'@'; convenient for fixtures."""
    rows = list(rows)
    width = len(rows[0])
    passable = [[ch in PASSABLE_CHARS for ch in row] for row in rows]
    return GridMap(width, len(rows), passable, name=name)

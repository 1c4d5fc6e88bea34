"""A* route planning over an :class:`~uasplan.grid.OccupancyGrid`.

Two planners share one search core:

* ``astar_3d``: 26-connected search through the whole voxel grid.
* ``astar_layered_2d``: one 8-connected search per flight level, joined to
  start and goal by vertical legs; the shortest candidate wins.

Diagonal moves never cut corners: every cell reached by zeroing one non-zero
component of the step must be free. Step costs are Euclidean distances
between cell centers, so a route's length is the sum of its segment lengths.

``dijkstra_oracle`` is a deliberately separate, unoptimized implementation
used to verify A* optimality.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .grid import OccupancyGrid

__all__ = [
    "GridIndex",
    "Route",
    "SearchStats",
    "PlanningError",
    "StartOccupiedError",
    "GoalOccupiedError",
    "NoPathError",
    "HEURISTICS",
    "PLANNERS",
    "heuristic_euclidean",
    "heuristic_manhattan",
    "astar_3d",
    "astar_layered_2d",
    "dijkstra_oracle",
    "plan",
    "route_length",
    "route_to_waypoints_m",
    "validate_route",
    "route_to_dict",
]

HEURISTICS = ("euclidean", "manhattan")
PLANNERS = ("3d", "layered2d")


class GridIndex(NamedTuple):
    x: int
    y: int
    z: int


@dataclass(frozen=True)
class Route:
    waypoints: tuple[GridIndex, ...]
    length_m: float
    planner: str
    heuristic: str


@dataclass
class SearchStats:
    expanded_nodes: int = 0
    wall_time: float = 0.0
    open_list_peak: int = 0

    def merge(self, other: "SearchStats") -> None:
        self.expanded_nodes += other.expanded_nodes
        self.wall_time += other.wall_time
        self.open_list_peak = max(self.open_list_peak, other.open_list_peak)


class PlanningError(Exception):
    pass


class StartOccupiedError(PlanningError):
    def __init__(self, idx):
        super().__init__(f"start occupied or out of bounds: {tuple(idx)}")
        self.index = idx


class GoalOccupiedError(PlanningError):
    def __init__(self, idx):
        super().__init__(f"goal occupied or out of bounds: {tuple(idx)}")
        self.index = idx


class NoPathError(PlanningError):
    def __init__(self, start, goal, stats: SearchStats | None = None):
        super().__init__(f"no feasible path from {tuple(start)} to {tuple(goal)}")
        self.stats = stats


def heuristic_euclidean(a, b, grid: OccupancyGrid) -> float:
    dx = (a[0] - b[0]) * grid.cell_size_xy
    dy = (a[1] - b[1]) * grid.cell_size_xy
    dz = (a[2] - b[2]) * grid.cell_size_z
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def heuristic_manhattan(a, b, grid: OccupancyGrid) -> float:
    return (
        abs(a[0] - b[0]) * grid.cell_size_xy
        + abs(a[1] - b[1]) * grid.cell_size_xy
        + abs(a[2] - b[2]) * grid.cell_size_z
    )


def _step_cost(dx, dy, dz, sxy, sz) -> float:
    return math.sqrt((dx * sxy) ** 2 + (dy * sxy) ** 2 + (dz * sz) ** 2)


def route_length(waypoints, grid: OccupancyGrid) -> float:
    sxy, sz = grid.cell_size_xy, grid.cell_size_z
    total = 0.0
    for a, b in zip(waypoints, waypoints[1:]):
        total += _step_cost(b[0] - a[0], b[1] - a[1], b[2] - a[2], sxy, sz)
    return total


@lru_cache(maxsize=64)
def _moves(shape, sxy: float, sz: float, planar: bool):
    """(flat offset, cost, corner-check offsets) for each legal step direction."""
    nx, ny, nz = shape
    X, Y = nx + 2, ny + 2

    def flat(dx, dy, dz):
        return dx + X * (dy + Y * dz)

    dzs = (0,) if planar else (-1, 0, 1)
    moves = []
    for dz in dzs:
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                step = (dx, dy, dz)
                if step == (0, 0, 0):
                    continue
                nonzero = [i for i in range(3) if step[i]]
                corners = ()
                if len(nonzero) > 1:
                    corners = tuple(
                        flat(*(0 if j == i else step[j] for j in range(3))) for i in nonzero
                    )
                moves.append((flat(dx, dy, dz), _step_cost(dx, dy, dz, sxy, sz), corners))
    return tuple(moves)


def _check_endpoints(grid: OccupancyGrid, start, goal):
    if not grid.is_free(start):
        raise StartOccupiedError(start)
    if not grid.is_free(goal):
        raise GoalOccupiedError(goal)


def _search(grid: OccupancyGrid, start, goal, heuristic: str, planar: bool):
    """A* core on the padded flat grid; returns (waypoints or None, g-cost, stats)."""
    t0 = time.perf_counter()
    nx, ny, nz = grid.shape
    X, Y = nx + 2, ny + 2
    XY = X * Y
    sxy, sz = grid.cell_size_xy, grid.cell_size_z
    free = grid.padded_free
    moves = _moves(grid.shape, sxy, sz, planar)

    gx, gy, gz = goal[0] + 1, goal[1] + 1, goal[2] + 1
    s = (start[0] + 1) + X * ((start[1] + 1) + Y * (start[2] + 1))
    t = gx + X * (gy + Y * gz)

    sqrt = math.sqrt
    if heuristic == "euclidean":
        def h(n):
            z, r = divmod(n, XY)
            y, x = divmod(r, X)
            dx = (x - gx) * sxy
            dy = (y - gy) * sxy
            dz = (z - gz) * sz
            return sqrt(dx * dx + dy * dy + dz * dz)
    elif heuristic == "manhattan":
        def h(n):
            z, r = divmod(n, XY)
            y, x = divmod(r, X)
            return abs(x - gx) * sxy + abs(y - gy) * sxy + abs(z - gz) * sz
    else:
        raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")

    closed = bytearray(len(free))
    g = {s: 0.0}
    parent = {s: -1}
    hs = h(s)
    open_list = [(hs, hs, 0, s)]
    counter = itertools.count(1)
    push, pop = heapq.heappush, heapq.heappop
    expanded = 0
    peak = 1
    found = False

    while open_list:
        _, _, _, cur = pop(open_list)
        if closed[cur]:
            continue  # superseded entry
        closed[cur] = 1
        expanded += 1
        if cur == t:
            found = True
            break
        gc = g[cur]
        for off, cost, corners in moves:
            n = cur + off
            if not free[n] or closed[n]:
                continue
            if corners:
                ok = True
                for c in corners:
                    if not free[cur + c]:
                        ok = False
                        break
                if not ok:
                    continue
            ng = gc + cost
            old = g.get(n)
            if old is None or ng < old:
                g[n] = ng
                parent[n] = cur
                hn = h(n)
                push(open_list, (ng + hn, hn, next(counter), n))
        if len(open_list) > peak:
            peak = len(open_list)

    path = None
    if found:
        path = []
        n = t
        while n != -1:
            z, r = divmod(n, XY)
            y, x = divmod(r, X)
            path.append(GridIndex(x - 1, y - 1, z - 1))
            n = parent[n]
        path.reverse()
    stats = SearchStats(expanded, time.perf_counter() - t0, peak)
    return path, (g[t] if found else math.inf), stats


def astar_3d(grid: OccupancyGrid, start, goal, heuristic: str = "euclidean"):
    """26-connected A*; returns ``(Route, SearchStats)``."""
    start, goal = GridIndex(*start), GridIndex(*goal)
    _check_endpoints(grid, start, goal)
    path, cost, stats = _search(grid, start, goal, heuristic, planar=False)
    if path is None:
        raise NoPathError(start, goal, stats)
    return Route(tuple(path), cost, "3d", heuristic), stats


def _column_free(grid: OccupancyGrid, x, y, z0, z1) -> bool:
    lo, hi = min(z0, z1), max(z0, z1)
    return not grid.occupied[x, y, lo : hi + 1].any()


def _vertical(x, y, z0, z1):
    step = 1 if z1 >= z0 else -1
    return [GridIndex(x, y, z) for z in range(z0, z1 + step, step)]


def astar_layered_2d(grid: OccupancyGrid, start, goal, heuristic: str = "euclidean"):
    """Per-level 8-connected A* joined by vertical legs; the shortest candidate wins.

    A level is a candidate only when the vertical columns above (or below)
    start and goal are free between their own level and the candidate one.
    The returned stats sum all per-level searches.
    """
    t0 = time.perf_counter()
    start, goal = GridIndex(*start), GridIndex(*goal)
    _check_endpoints(grid, start, goal)
    sz = grid.cell_size_z
    total = SearchStats()
    best = None
    for z in range(grid.nz):
        if not (
            _column_free(grid, start.x, start.y, start.z, z)
            and _column_free(grid, goal.x, goal.y, goal.z, z)
        ):
            continue
        a = GridIndex(start.x, start.y, z)
        b = GridIndex(goal.x, goal.y, z)
        path, cost, stats = _search(grid, a, b, heuristic, planar=True)
        total.merge(stats)
        if path is None:
            continue
        length = abs(z - start.z) * sz + cost + abs(z - goal.z) * sz
        if best is None or length < best[0]:
            waypoints = _vertical(start.x, start.y, start.z, z)[:-1] + path + _vertical(goal.x, goal.y, z, goal.z)[1:]
            best = (length, waypoints)
    total.wall_time = time.perf_counter() - t0
    if best is None:
        raise NoPathError(start, goal, total)
    return Route(tuple(best[1]), best[0], "layered2d", heuristic), total


def plan(grid: OccupancyGrid, start, goal, planner: str = "3d", heuristic: str = "euclidean"):
    if planner == "3d":
        return astar_3d(grid, start, goal, heuristic)
    if planner == "layered2d":
        return astar_layered_2d(grid, start, goal, heuristic)
    raise ValueError(f"unknown planner {planner!r}; expected one of {PLANNERS}")


def dijkstra_oracle(grid: OccupancyGrid, start, goal) -> Route:
    """Uniform-cost search over 26-connected free cells with Euclidean edge weights."""
    start, goal = GridIndex(*start), GridIndex(*goal)
    _check_endpoints(grid, start, goal)
    occ = grid.occupied
    nx, ny, nz = grid.shape
    sxy, sz = grid.cell_size_xy, grid.cell_size_z

    def free(x, y, z):
        return 0 <= x < nx and 0 <= y < ny and 0 <= z < nz and not occ[x, y, z]

    steps = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        if d != (0, 0, 0):
            steps.append((d, math.sqrt((d[0] * sxy) ** 2 + (d[1] * sxy) ** 2 + (d[2] * sz) ** 2)))

    dist = {start: 0.0}
    prev = {start: None}
    done = set()
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            break
        for step, w in steps:
            v = GridIndex(u.x + step[0], u.y + step[1], u.z + step[2])
            if not free(*v):
                continue
            # corner rule: zero out each non-zero component in turn
            if sum(1 for c in step if c) > 1 and not all(
                free(*(u[j] + (0 if j == i else step[j]) for j in range(3)))
                for i in range(3)
                if step[i]
            ):
                continue
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if goal not in done:
        raise NoPathError(start, goal)
    path = []
    n = goal
    while n is not None:
        path.append(n)
        n = prev[n]
    path.reverse()
    return Route(tuple(path), dist[goal], "dijkstra", "none")


def route_to_waypoints_m(route: Route, grid: OccupancyGrid) -> list[tuple[float, float, float]]:
    sxy, sz = grid.cell_size_xy, grid.cell_size_z
    return [((w.x + 0.5) * sxy, (w.y + 0.5) * sxy, w.z * sz) for w in route.waypoints]


def validate_route(route: Route, grid: OccupancyGrid, start=None, goal=None) -> None:
    """Raise AssertionError if ``route`` breaks any structural invariant."""
    wps = route.waypoints
    assert wps, "empty route"
    if start is not None:
        assert tuple(wps[0]) == tuple(start), f"route starts at {wps[0]}, expected {start}"
    if goal is not None:
        assert tuple(wps[-1]) == tuple(goal), f"route ends at {wps[-1]}, expected {goal}"
    for w in wps:
        assert grid.is_free(w), f"waypoint {w} is not a free cell"
    for a, b in zip(wps, wps[1:]):
        step = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
        assert max(abs(c) for c in step) == 1, f"illegal step {a} -> {b}"
        if route.planner == "layered2d":
            assert step[2] == 0 or step[:2] == (0, 0), f"mixed vertical/horizontal step {a} -> {b}"
        nonzero = [i for i in range(3) if step[i]]
        if len(nonzero) > 1:
            for i in nonzero:
                corner = tuple(a[j] + (0 if j == i else step[j]) for j in range(3))
                assert grid.is_free(corner), f"step {a} -> {b} cuts corner {corner}"
    expected = route_length(wps, grid)
    assert math.isclose(route.length_m, expected, rel_tol=1e-9, abs_tol=1e-12), (
        f"length {route.length_m} != segment sum {expected}"
    )


def route_to_dict(route: Route, grid: OccupancyGrid, stats: SearchStats | None = None) -> dict:
    doc = {
        "planner": route.planner,
        "heuristic": route.heuristic,
        "length_m": route.length_m,
        "waypoints_grid": [list(w) for w in route.waypoints],
        "waypoints_m": [list(p) for p in route_to_waypoints_m(route, grid)],
    }
    if stats is not None:
        doc["stats"] = {
            "expanded_nodes": stats.expanded_nodes,
            "open_list_peak": stats.open_list_peak,
            "wall_time_s": stats.wall_time,
        }
    return doc

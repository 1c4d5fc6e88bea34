import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_free_cell, random_grid
from uasplan.grid import OccupancyGrid
from uasplan.planner import (
    GoalOccupiedError,
    GridIndex,
    NoPathError,
    StartOccupiedError,
    astar_3d,
    astar_layered_2d,
    dijkstra_oracle,
    heuristic_euclidean,
    heuristic_manhattan,
    plan,
    route_length,
    route_to_dict,
    route_to_waypoints_m,
    validate_route,
)


def empty(shape, sxy=1.0, sz=1.0):
    return OccupancyGrid(np.zeros(shape, dtype=bool), sxy, sz)


def test_heuristic_examples():
    g1 = empty((10, 10, 1))
    g2 = empty((3, 3, 3), 5.0, 10.0)
    assert heuristic_euclidean((2, 2, 0), (2, 2, 0), g1) == 0
    assert heuristic_manhattan((2, 2, 0), (2, 2, 0), g1) == 0
    assert heuristic_euclidean((0, 0, 0), (3, 4, 0), g1) == 5.0
    assert heuristic_euclidean((0, 0, 0), (1, 1, 1), g2) == pytest.approx(math.sqrt(150))
    assert heuristic_euclidean((0, 0, 0), (1, 1, 1), g2) == pytest.approx(12.2474487)
    assert heuristic_manhattan((0, 0, 0), (1, 1, 1), g2) == 20.0


def test_manhattan_dominates_euclidean():
    rng = np.random.default_rng(7)
    g = empty((50, 50, 10), 5.0, 10.0)
    for _ in range(1000):
        a, b = rng.integers(0, 10, 3), rng.integers(0, 10, 3)
        dx, dy, dz = (a - b) * [5.0, 5.0, 10.0]
        direct = math.sqrt(dx * dx + dy * dy + dz * dz)
        assert heuristic_euclidean(a, b, g) == pytest.approx(direct)
        assert heuristic_manhattan(a, b, g) >= heuristic_euclidean(a, b, g)


@pytest.mark.parametrize("planner", ["3d", "layered2d"])
@pytest.mark.parametrize("heuristic", ["euclidean", "manhattan"])
def test_start_equals_goal(planner, heuristic):
    route, stats = plan(empty((4, 4, 2)), (1, 2, 1), (1, 2, 1), planner, heuristic)
    assert route.waypoints == (GridIndex(1, 2, 1),)
    assert route.length_m == 0
    assert stats.expanded_nodes >= 1


@pytest.mark.parametrize("planner", ["3d", "layered2d"])
def test_unobstructed_diagonal(planner):
    route, stats = plan(empty((5, 5, 1), 5.0), (0, 0, 0), (4, 4, 0), planner)
    assert route.length_m == pytest.approx(4 * 5 * math.sqrt(2))
    assert route.length_m == pytest.approx(28.2843, abs=1e-4)
    assert stats.expanded_nodes >= len(route.waypoints)


def test_straight_corridor():
    occ = np.ones((7, 3, 1), dtype=bool)
    occ[:, 1, 0] = False
    grid = OccupancyGrid(occ, 2.5)
    assert dijkstra_oracle(grid, (0, 1, 0), (6, 1, 0)).length_m == 6 * 2.5
    assert dijkstra_oracle(grid, (3, 1, 0), (3, 1, 0)).length_m == 0
    assert astar_3d(grid, (0, 1, 0), (6, 1, 0))[0].length_m == 15.0


def test_endpoint_errors():
    occ = np.zeros((3, 3, 1), dtype=bool)
    occ[2, 2, 0] = True
    grid = OccupancyGrid(occ)
    for fn in (astar_3d, astar_layered_2d, dijkstra_oracle):
        with pytest.raises(StartOccupiedError):
            fn(grid, (2, 2, 0), (0, 0, 0))
        with pytest.raises(GoalOccupiedError):
            fn(grid, (0, 0, 0), (2, 2, 0))
        with pytest.raises(StartOccupiedError):
            fn(grid, (5, 0, 0), (0, 0, 0))


def test_no_path():
    occ = np.zeros((5, 5, 2), dtype=bool)
    occ[2, :, :] = True
    grid = OccupancyGrid(occ)
    for fn in (astar_3d, astar_layered_2d, dijkstra_oracle):
        with pytest.raises(NoPathError):
            fn(grid, (0, 0, 0), (4, 4, 1))


def test_no_corner_cutting():
    occ = np.zeros((2, 2, 1), dtype=bool)
    occ[1, 0, 0] = True
    grid = OccupancyGrid(occ)
    # the only diagonal would graze (1, 0)
    route, _ = astar_3d(grid, (0, 0, 0), (1, 1, 0))
    assert route.waypoints == ((0, 0, 0), (0, 1, 0), (1, 1, 0))
    assert route.length_m == 2.0
    occ = np.zeros((2, 2, 2), dtype=bool)
    occ[1, 1, 0] = True  # blocks the zero-z corner of the space diagonal
    grid = OccupancyGrid(occ)
    route, _ = astar_3d(grid, (0, 0, 0), (1, 1, 1))
    assert len(route.waypoints) == 3
    assert dijkstra_oracle(grid, (0, 0, 0), (1, 1, 1)).length_m == pytest.approx(route.length_m)


def test_astar_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(200):
        grid = random_grid(rng, cell_xy=float(rng.choice([1.0, 5.0])), cell_z=float(rng.choice([1.0, 10.0])))
        s, g = random_free_cell(rng, grid), random_free_cell(rng, grid)
        if s is None:
            continue
        try:
            expected = dijkstra_oracle(grid, s, g).length_m
        except NoPathError:
            with pytest.raises(NoPathError):
                astar_3d(grid, s, g)
            continue
        route, stats = astar_3d(grid, s, g, "euclidean")
        validate_route(route, grid, s, g)
        assert route.length_m == pytest.approx(expected, rel=1e-9, abs=1e-12)
        checked += 1
    assert checked > 100


def test_dominance_properties_on_random_grids():
    rng = np.random.default_rng(99)
    for _ in range(150):
        grid = random_grid(rng, max_xy=12, max_z=5, occupancy=0.25, cell_z=float(rng.choice([1.0, 3.0])))
        s, g = random_free_cell(rng, grid), random_free_cell(rng, grid)
        if s is None:
            continue
        try:
            best = astar_3d(grid, s, g, "euclidean")[0].length_m
        except NoPathError:
            for planner in ("3d", "layered2d"):
                with pytest.raises(NoPathError):
                    plan(grid, s, g, planner, "manhattan")
            continue
        man = astar_3d(grid, s, g, "manhattan")[0]
        validate_route(man, grid, s, g)
        assert man.length_m >= best - 1e-9
        try:
            lay_e = astar_layered_2d(grid, s, g, "euclidean")[0]
        except NoPathError:
            continue
        lay_m = astar_layered_2d(grid, s, g, "manhattan")[0]
        for r in (lay_e, lay_m):
            validate_route(r, grid, s, g)
            assert r.length_m >= best - 1e-9
        assert lay_m.length_m >= lay_e.length_m - 1e-9


def test_layered_route_shape():
    occ = np.zeros((6, 6, 3), dtype=bool)
    occ[2:4, :, 0] = True  # wall on the ground level only
    grid = OccupancyGrid(occ, 1.0, 2.0)
    route, stats = astar_layered_2d(grid, (0, 0, 0), (5, 0, 0))
    validate_route(route, grid, (0, 0, 0), (5, 0, 0))
    assert route.length_m == pytest.approx(2 + 5 + 2)
    assert {w.z for w in route.waypoints} == {0, 1}
    assert stats.expanded_nodes >= len(route.waypoints)


def test_layered_skips_blocked_corridors():
    occ = np.zeros((4, 1, 3), dtype=bool)
    occ[1:3, 0, 0] = True
    occ[1:3, 0, 1] = True
    occ[0, 0, 2] = True  # start column capped at level 2
    grid = OccupancyGrid(occ)
    with pytest.raises(NoPathError):
        astar_layered_2d(grid, (0, 0, 0), (3, 0, 0))
    # the climb to level 2 would clip the capped start column
    with pytest.raises(NoPathError):
        astar_3d(grid, (0, 0, 0), (3, 0, 0))
    # from one cell over the route exists and both planners find it
    occ[0, 0, 2] = False
    grid = OccupancyGrid(occ)
    assert astar_layered_2d(grid, (0, 0, 0), (3, 0, 0))[0].length_m == pytest.approx(2 + 3 + 2)


def test_waypoints_m():
    grid = empty((3, 3, 3), 5.0, 10.0)
    route, _ = astar_3d(grid, (0, 0, 0), (1, 1, 1))
    pts = route_to_waypoints_m(route, grid)
    assert pts[0] == (2.5, 2.5, 0.0)
    assert pts[-1] == (7.5, 7.5, 10.0)
    assert len(pts) == len(route.waypoints)


def test_route_dict_fields():
    grid = empty((3, 3, 1))
    route, stats = astar_3d(grid, (0, 0, 0), (2, 1, 0))
    doc = route_to_dict(route, grid, stats)
    assert set(doc) == {"planner", "heuristic", "length_m", "waypoints_grid", "waypoints_m", "stats"}
    assert doc["length_m"] == pytest.approx(route_length(route.waypoints, grid))


def test_deterministic_expansions():
    rng = np.random.default_rng(3)
    grid = random_grid(rng, max_xy=15, max_z=6, occupancy=0.2)
    s, g = random_free_cell(rng, grid), random_free_cell(rng, grid)
    runs = []
    for _ in range(3):
        try:
            route, stats = astar_3d(grid, s, g, "manhattan")
            runs.append((route.waypoints, stats.expanded_nodes, stats.open_list_peak))
        except NoPathError as exc:
            runs.append(("nopath", exc.stats.expanded_nodes))
    assert runs[0] == runs[1] == runs[2]


@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2), st.integers(0, 4), st.integers(0, 4), st.integers(0, 2))
def test_empty_grid_3d_optimal_is_closed_form(x0, y0, z0, x1, y1, z1):
    # on an empty grid the optimal 26-connected route length has a closed form
    grid = empty((5, 5, 3), 1.0, 1.0)
    d = sorted((abs(x1 - x0), abs(y1 - y0), abs(z1 - z0)))
    expected = d[0] * math.sqrt(3) + (d[1] - d[0]) * math.sqrt(2) + (d[2] - d[1])
    assert astar_3d(grid, (x0, y0, z0), (x1, y1, z1))[0].length_m == pytest.approx(expected)

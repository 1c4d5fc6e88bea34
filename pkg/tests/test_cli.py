import csv
import json

import numpy as np
import pytest

from uasplan import raster
from uasplan.cli import main
from uasplan.grid import grid_from_json


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    assert main(["worldgen", "--seed", "3", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def coarse_grid(world_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("grid") / "grid.json"
    assert main(["grid", "--layers", str(world_dir), "--margin", "brazil_0_400ft", "--coarsen", "5",
                 "--out", str(out)]) == 0
    return out


def test_worldgen_is_byte_identical(world_dir, tmp_path):
    assert main(["worldgen", "--seed", "3", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in world_dir.iterdir())
    assert names == sorted(p.name for p in tmp_path.iterdir())
    assert "world.json" in names and raster.SIDECAR_NAME in names
    for name in names:
        assert (world_dir / name).read_bytes() == (tmp_path / name).read_bytes()


def test_worldgen_defaults(world_dir):
    layers = raster.read_layer_set(world_dir)
    assert len(layers) == 8
    assert (layers[0].width, layers[0].height) == (200, 200)
    doc = json.loads((world_dir / "world.json").read_text())
    assert doc["seed"] == 3 and len(doc["buildings"]) == 20


def test_worldgen_rejects_inverted_heights(tmp_path, capsys):
    code = main(["worldgen", "--height-min", "120", "--height-max", "10", "--out", str(tmp_path / "w")])
    assert code == 2
    assert "height" in capsys.readouterr().err


def test_worldgen_default_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("UASPLAN_OUT", str(tmp_path))
    assert main(["worldgen", "--seed", "1"]) == 0
    assert (tmp_path / "world" / "world.json").exists()


def test_grid_records_preset(coarse_grid):
    grid = grid_from_json(coarse_grid.read_text())
    assert grid.shape == (40, 40, 8)
    assert grid.cell_size_xy == 5.0
    prov = grid.provenance
    assert prov["margin_m"] == 30.0 and prov["margin_preset"] == "brazil_0_400ft"
    assert prov["coarsen_factor"] == 5
    assert [s["file"] for s in prov["source_layers"]][0] == "layer_000.pgm"


def test_grid_explicit_margin(world_dir, tmp_path):
    out = tmp_path / "g.json"
    assert main(["grid", "--layers", str(world_dir / "layers.json"), "--margin", "12.5", "--out", str(out)]) == 0
    grid = grid_from_json(out.read_text())
    assert grid.shape == (200, 200, 8) and grid.provenance["margin_m"] == 12.5


@pytest.mark.parametrize("args", [["--coarsen", "3"], ["--margin", "nowhere"], ["--coarsen", "0"]])
def test_grid_usage_errors(world_dir, tmp_path, args):
    assert main(["grid", "--layers", str(world_dir), "--out", str(tmp_path / "g.json"), *args]) == 2


def test_grid_missing_layers(tmp_path):
    assert main(["grid", "--layers", str(tmp_path / "nope"), "--out", str(tmp_path / "g.json")]) == 2


def _free_cells(path):
    grid = grid_from_json(path.read_text())
    free = np.argwhere(~grid.occupied)
    return grid, free


def test_plan_start_equals_goal(coarse_grid, tmp_path):
    grid, free = _free_cells(coarse_grid)
    cell = ",".join(str(v) for v in free[0])
    assert main(["plan", "--grid", str(coarse_grid), "--start", cell, "--goal", cell, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "route.json").read_text())
    assert doc["length_m"] == 0 and len(doc["waypoints_grid"]) == 1
    rows = list(csv.reader(open(tmp_path / "route.csv")))
    assert rows[0] == ["x_m", "y_m", "z_m"] and len(rows) == 2


def test_plan_goal_occupied(coarse_grid, tmp_path, capsys):
    grid, free = _free_cells(coarse_grid)
    occ = np.argwhere(grid.occupied)[0]
    code = main(["plan", "--grid", str(coarse_grid), "--start", ",".join(map(str, free[0])),
                 "--goal", ",".join(map(str, occ)), "--out", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "goal occupied"
    assert not (tmp_path / "route.json").exists()


def test_plan_out_of_bounds(coarse_grid, tmp_path):
    assert main(["plan", "--grid", str(coarse_grid), "--start", "0,0,0", "--goal", "40,0,0",
                 "--out", str(tmp_path)]) == 2
    assert main(["plan", "--grid", str(coarse_grid), "--start", "0,0", "--goal", "1,0,0"]) == 2


def test_plan_dijkstra_agrees_with_astar(coarse_grid, tmp_path):
    grid, free = _free_cells(coarse_grid)
    s, g = ",".join(map(str, free[0])), ",".join(map(str, free[-1]))
    lengths = {}
    for name, extra in (("astar", []), ("dijkstra", ["--dijkstra"])):
        out = tmp_path / name
        assert main(["plan", "--grid", str(coarse_grid), "--start", s, "--goal", g, "--out", str(out), *extra]) == 0
        lengths[name] = json.loads((out / "route.json").read_text())["length_m"]
    assert lengths["astar"] == pytest.approx(lengths["dijkstra"], rel=1e-9)


def test_bench_fixtures(tmp_path, capsys):
    from uasplan.bench import reference_dir

    assert main(["bench", "--fixtures", str(reference_dir()), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    p = {c["name"]: round(c["time_test"]["p"], 6) for c in summary["comparisons"]}
    assert p == {
        "2d_euclidean_vs_manhattan": 0.000488,
        "3d_euclidean_vs_manhattan": 0.000977,
        "3d_vs_2d_euclidean": 0.000977,
        "3d_vs_2d_manhattan": 0.000977,
        "original_vs_reduced_2d": 0.000488,
    }
    assert "original_vs_reduced_2d" in capsys.readouterr().out


def test_bench_empty_case_file(coarse_grid, tmp_path):
    cases = tmp_path / "cases.csv"
    cases.write_text("start,goal,planner,heuristic,variant\n")
    with pytest.warns(UserWarning, match="empty"):
        code = main(["bench", "--grid-fine", str(coarse_grid), "--grid-coarse", str(coarse_grid),
                     "--cases", str(cases), "--out", str(tmp_path / "b")])
    assert code == 0
    rows = (tmp_path / "b" / "bench.csv").read_text().splitlines()
    assert len(rows) == 1 and rows[0].startswith("start,goal,")


def test_bench_case_file(coarse_grid, tmp_path):
    grid, free = _free_cells(coarse_grid)
    s, g = "(" + ",".join(map(str, free[0])) + ")", "(" + ",".join(map(str, free[-1])) + ")"
    cases = tmp_path / "cases.csv"
    cases.write_text(f'start,goal,planner,heuristic\n"{s}","{g}",3d,euclidean\n"{s}","{g}",3d,manhattan\n')
    code = main(["bench", "--grid-fine", str(coarse_grid), "--grid-coarse", str(coarse_grid),
                 "--cases", str(cases), "--repetitions", "2", "--out", str(tmp_path / "b")])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "b" / "bench.csv")))
    assert [r["heuristic"] for r in rows] == ["euclidean", "manhattan"]
    summary = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert [c["name"] for c in summary["comparisons"]] == ["3d_euclidean_vs_manhattan"]


def test_wilcoxon_subcommand(tmp_path, capsys):
    f = tmp_path / "pairs.csv"
    f.write_text("a,b\n2,1\n4,2\n7,4\n")
    assert main(["wilcoxon", str(f)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == {"w": 0.0, "n": 3, "p": 0.25, "method": "exact"}


def test_wilcoxon_all_zero(tmp_path):
    f = tmp_path / "pairs.csv"
    f.write_text("1,1\n2,2\n")
    assert main(["wilcoxon", str(f)]) == 1


def test_unknown_subcommand():
    assert main(["fly"]) == 2
    assert main([]) == 2

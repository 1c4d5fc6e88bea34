"""Command-line pipeline: ``worldgen -> grid -> plan | bench``.

Exit codes: 0 success, 1 domain failure (no path, occupied endpoint),
2 usage or I/O error. ``UASPLAN_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

from . import bench, grid as gridmod, planner, raster, stats, worldgen
from .pipeline import build_grids

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
OUT_ENV = "UASPLAN_OUT"


class UsageError(Exception):
    pass


def _default_out(sub: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "out")) / sub


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _index(text: str) -> planner.GridIndex:
    try:
        return bench.parse_index(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_worldgen(args) -> int:
    try:
        spec = worldgen.WorldSpec(
            seed=args.seed,
            court_grid=args.courts,
            height_range=(args.height_min, args.height_max),
            street_width=args.street_width,
            border_width=args.border_width,
            world_extent=(args.extent, args.extent),
        )
        world = worldgen.generate_world(spec)
        layers = worldgen.rasterize(world, args.altitudes, args.resolution)
    except ValueError as exc:
        raise UsageError(f"invalid world spec: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "world.json").write_text(worldgen.world_to_json(world))
    raster.write_layer_set(out, layers)
    print(f"wrote {len(world.buildings)} buildings, {len(layers)} layers to {out}")
    return EXIT_OK


def cmd_grid(args) -> int:
    sidecar = Path(args.layers)
    try:
        layers = raster.read_layer_set(sidecar)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read layer set {sidecar}: {exc}") from None
    doc = json.loads((sidecar / raster.SIDECAR_NAME if sidecar.is_dir() else sidecar).read_text())
    sources = [{"file": e["file"], "altitude_m": e["altitude_m"]} for e in doc["layers"]]
    try:
        fine, coarse = build_grids(layers, args.margin, args.coarsen, sources)
    except ValueError as exc:
        raise UsageError(f"{sidecar}: {exc}") from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(gridmod.grid_to_json(coarse))
    print(f"wrote {coarse.nx}x{coarse.ny}x{coarse.nz} grid to {out}")
    return EXIT_OK


def _load_grid(path) -> gridmod.OccupancyGrid:
    try:
        return gridmod.grid_from_json(Path(path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read grid {path}: {exc}") from None


def cmd_plan(args) -> int:
    grid = _load_grid(args.grid)
    for name, idx in (("start", args.start), ("goal", args.goal)):
        if not grid.in_bounds(idx):
            raise UsageError(f"{name} {tuple(idx)} outside grid {grid.shape}")
    try:
        if args.dijkstra:
            route, st = planner.dijkstra_oracle(grid, args.start, args.goal), None
        else:
            route, st = planner.plan(grid, args.start, args.goal, args.planner, args.heuristic)
    except planner.PlanningError as exc:
        reason = {
            planner.StartOccupiedError: "start occupied",
            planner.GoalOccupiedError: "goal occupied",
            planner.NoPathError: "no path",
        }[type(exc)]
        print(json.dumps({"error": reason, "detail": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    doc = planner.route_to_dict(route, grid, st)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "route.json", doc)
    with open(out / "route.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "y_m", "z_m"])
        w.writerows(doc["waypoints_m"])
    print(f"route length {route.length_m:.2f} m, {len(route.waypoints)} waypoints -> {out}")
    return EXIT_OK


def _read_cases(path) -> list[bench.BenchCase]:
    cases = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(ln for ln in fh if not ln.startswith("#")):
            cases.append(bench.BenchCase(
                bench.parse_index(row["start"]), bench.parse_index(row["goal"]),
                row.get("planner") or "3d", row.get("heuristic") or "euclidean",
                row.get("variant") or "coarse",
            ))
    return cases


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.fixtures:
        records = bench.load_reference_records(args.fixtures)
        report = bench.summarize(records)
        _write_json(out / "summary.json", report.to_dict())
        for c in report.comparisons:
            p = c.time_test["p"] if isinstance(c.time_test, dict) else c.time_test
            print(f"{c.name}: time ratio {c.mean_time_ratio:.2f}, length ratio {c.mean_length_ratio:.4f}, p = {p}")
        return EXIT_OK

    if args.grid_fine and args.grid_coarse:
        fine, coarse = _load_grid(args.grid_fine), _load_grid(args.grid_coarse)
        factor = fine.nx // coarse.nx
    else:
        from .pipeline import PipelineConfig, build_pipeline

        cfg = PipelineConfig(world=worldgen.WorldSpec(seed=args.seed), margin=args.margin,
                             coarsen_factor=args.coarsen)
        pipe = build_pipeline(cfg)
        fine, coarse, factor = pipe.fine, pipe.coarse, cfg.coarsen_factor

    if args.cases:
        cases = _read_cases(args.cases)
        if not cases:
            warnings.warn(f"case file {args.cases} is empty")
            print(f"warning: case file {args.cases} is empty", file=sys.stderr)
    else:
        cases = bench.default_matrix(coarse, factor)
    records = bench.run_matrix(fine, coarse, cases, args.repetitions)
    bench.write_records_csv(records, out / "bench.csv")
    report = bench.summarize(records, fine_factor=factor)
    _write_json(out / "summary.json", report.to_dict())
    print(f"{len(records)} cases, {sum(not r.ok for r in records)} failed -> {out}")
    if records and all(not r.ok for r in records):
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_wilcoxon(args) -> int:
    try:
        pairs = stats.read_pairs_csv(args.csv)
        result = stats.wilcoxon_signed_rank(pairs)
    except stats.AllZeroDifferencesError as exc:
        print(json.dumps({"error": "no difference", "detail": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"cannot read pairs from {args.csv}: {exc}") from None
    print(json.dumps(result.to_dict(), sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uasplan", description="Grid-based UAS route planning pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("worldgen", help="generate a seeded urban world and its altitude layers")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--courts", type=int, default=3, help="courts per side (default: 3)")
    w.add_argument("--height-min", type=float, default=10.0)
    w.add_argument("--height-max", type=float, default=120.0)
    w.add_argument("--street-width", type=float, default=10.0)
    w.add_argument("--border-width", type=float, default=35.0)
    w.add_argument("--extent", type=float, default=200.0, help="world side length in meters (default: 200)")
    w.add_argument("--altitudes", type=_floats, default=worldgen.DEFAULT_ALTITUDES,
                   help="comma-separated layer altitudes in meters")
    w.add_argument("--resolution", type=float, default=1.0, help="meters per pixel (default: 1)")
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_worldgen, sub="world")

    g = sub.add_parser("grid", help="threshold, inflate and coarsen layers into a node grid")
    g.add_argument("--layers", required=True, help="layer sidecar JSON or the directory holding it")
    g.add_argument("--margin", default="brazil_0_400ft",
                   help=f"safety margin in meters or a preset ({', '.join(sorted(gridmod.MARGIN_PRESETS))})")
    g.add_argument("--coarsen", type=int, default=1, help="horizontal reduction factor (default: 1)")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_grid, sub="grid.json")

    pl = sub.add_parser("plan", help="plan a route on a node grid")
    pl.add_argument("--grid", required=True)
    pl.add_argument("--start", type=_index, required=True, help="x,y,z cell index")
    pl.add_argument("--goal", type=_index, required=True, help="x,y,z cell index")
    pl.add_argument("--planner", choices=planner.PLANNERS, default="3d")
    pl.add_argument("--heuristic", choices=planner.HEURISTICS, default="euclidean")
    pl.add_argument("--dijkstra", action="store_true", help="use the Dijkstra oracle instead of A*")
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plan, sub="route")

    b = sub.add_parser("bench", help="run the benchmark matrix or summarize reference tables")
    b.add_argument("--fixtures", help="directory of reference tables; summarize them without planning")
    b.add_argument("--grid-fine")
    b.add_argument("--grid-coarse")
    b.add_argument("--seed", type=int, default=0, help="world seed when no grids are given")
    b.add_argument("--margin", default="brazil_0_400ft")
    b.add_argument("--coarsen", type=int, default=5)
    b.add_argument("--cases", help="CSV with start,goal[,planner,heuristic,variant] columns")
    b.add_argument("--repetitions", type=int, default=5)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench, sub="bench")

    s = sub.add_parser("wilcoxon", help="signed-rank test on a two-column CSV of paired values")
    s.add_argument("csv")
    s.set_defaults(func=cmd_wilcoxon, sub=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "out", "unset") is None:
        args.out = str(_default_out(args.sub))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

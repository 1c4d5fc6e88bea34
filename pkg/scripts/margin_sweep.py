"""Free-space fraction and a corner-to-corner route for each regulatory margin preset."""

import argparse

from uasplan.bench import default_endpoints
from uasplan.grid import MARGIN_PRESETS, coarsen, inflate, threshold_layers
from uasplan.planner import NoPathError, astar_3d
from uasplan.worldgen import DEFAULT_ALTITUDES, WorldSpec, generate_world, rasterize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--coarsen", type=int, default=5)
    args = ap.parse_args()

    base = threshold_layers(rasterize(generate_world(WorldSpec(seed=args.seed)), DEFAULT_ALTITUDES))
    for margin in sorted({p.margin_m for p in MARGIN_PRESETS.values()}):
        grid = coarsen(inflate(base, margin), args.coarsen)
        free = 1.0 - grid.occupied.mean()
        try:
            start, goal = default_endpoints(grid)[-1]
            route, stats = astar_3d(grid, start, goal)
            result = f"{route.length_m:8.1f} m, {stats.expanded_nodes} expanded"
        except (NoPathError, ValueError) as exc:
            result = type(exc).__name__
        names = ", ".join(n for n, p in MARGIN_PRESETS.items() if p.margin_m == margin)
        print(f"{margin:5.0f} m  free {free:5.1%}  {result}  [{names}]")


if __name__ == "__main__":
    main()

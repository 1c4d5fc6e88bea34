"""End-to-end world -> layers -> node grid construction shared by the CLI and scripts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .grid import OccupancyGrid, coarsen, inflate, resolve_margin, threshold_layers
from .worldgen import DEFAULT_ALTITUDES, WorldGeometry, WorldSpec, generate_world, rasterize

__all__ = ["PipelineConfig", "Pipeline", "build_pipeline", "build_grids"]


@dataclass(frozen=True)
class PipelineConfig:
    world: WorldSpec = field(default_factory=WorldSpec)
    altitudes: tuple[float, ...] = DEFAULT_ALTITUDES
    resolution: float = 1.0
    margin: float | str = "brazil_0_400ft"
    coarsen_factor: int = 5
    planner: str = "3d"
    heuristic: str = "euclidean"

    def __post_init__(self):
        if not self.altitudes:
            raise ValueError("altitudes must be non-empty")
        if self.coarsen_factor < 1:
            raise ValueError("coarsen_factor must be >= 1")
        resolve_margin(self.margin)


@dataclass(frozen=True)
class Pipeline:
    config: PipelineConfig
    world: WorldGeometry
    layers: list
    fine: OccupancyGrid
    coarse: OccupancyGrid


def build_grids(layers, margin, factor: int, sources=None) -> tuple[OccupancyGrid, OccupancyGrid]:
    """Threshold + inflate (fine grid), then coarsen (coarse grid)."""
    margin_m, preset = resolve_margin(margin)
    fine = inflate(threshold_layers(layers, sources), margin_m, preset)
    return fine, coarsen(fine, factor)


def build_pipeline(config: PipelineConfig | None = None) -> Pipeline:
    config = config or PipelineConfig()
    world = generate_world(config.world)
    layers = rasterize(world, config.altitudes, config.resolution)
    fine, coarse = build_grids(layers, config.margin, config.coarsen_factor)
    return Pipeline(config, world, layers, fine, coarse)

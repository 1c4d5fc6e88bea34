"""Grid-based UAS route planning: urban world generation, layered occupancy
maps, safety-margin node grids, 2D-layered and 3D A*, benchmarks and paired
statistics."""

from .grid import MARGIN_PRESETS, OccupancyGrid, coarsen, inflate, threshold_layers
from .planner import GridIndex, Route, SearchStats, astar_3d, astar_layered_2d, dijkstra_oracle, plan
from .raster import GrayscaleLayer, parse_pgm, serialize_pgm
from .stats import WilcoxonResult, wilcoxon_signed_rank
from .worldgen import WorldSpec, generate_world, rasterize

__version__ = "0.1.0"

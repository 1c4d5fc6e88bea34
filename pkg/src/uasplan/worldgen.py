"""Deterministic procedural urban world and its per-altitude rasterization.

The world is a regular ``n x n`` arrangement of courts (city blocks) separated
by streets, surrounded by an open border. Buildings are packed on a regular
lattice inside each court. The central court uses the smaller central
footprint and keeps its landing pads clear of buildings.

All randomness comes from :class:`random.Random` (MT19937) seeded with
``WorldSpec.seed``; ``random()`` output is stable across Python versions, which
keeps worlds reproducible across platforms.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field

import numpy as np

from .raster import GrayscaleLayer

__all__ = [
    "RNG_ALGORITHM",
    "WorldSpec",
    "Building",
    "WorldGeometry",
    "PackingError",
    "generate_world",
    "rasterize",
    "world_to_json",
    "world_from_json",
    "DEFAULT_ALTITUDES",
]

RNG_ALGORITHM = "python-random-mt19937"
FREE = 255
OCCUPIED = 0

# flight levels (m); the top two lie above the tallest possible default building
DEFAULT_ALTITUDES = (10.0, 30.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0)


class PackingError(ValueError):
    """The requested buildings do not fit into the world extent."""


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    court_grid: int = 3
    central_building_footprint: tuple[float, float] = (15.0, 15.0)
    outer_building_footprint: tuple[float, float] = (20.0, 15.0)
    height_range: tuple[float, float] = (10.0, 120.0)
    street_width: float = 10.0
    # open ring between the world edge and the outermost courts
    border_width: float = 35.0
    # minimum spacing between buildings inside one court
    lot_gap: float = 5.0
    # ground positions (m); None puts a single pad at the central court's center
    landing_pads: tuple[tuple[float, float], ...] | None = None
    pad_clearance: float = 2.0
    world_extent: tuple[float, float] = (200.0, 200.0)

    def __post_init__(self):
        lo, hi = self.height_range
        if not (lo > 0 and hi > 0):
            raise ValueError(f"height_range bounds must be > 0, got {self.height_range}")
        if lo > hi:
            raise ValueError(f"height_range min {lo} exceeds max {hi}")
        for name in ("central_building_footprint", "outer_building_footprint", "world_extent"):
            w, d = getattr(self, name)
            if not (w > 0 and d > 0):
                raise ValueError(f"{name} must be positive, got {(w, d)}")
        if not self.street_width > 0:
            raise ValueError("street_width must be > 0")
        if self.border_width < 0 or self.lot_gap < 0 or self.pad_clearance < 0:
            raise ValueError("border_width, lot_gap and pad_clearance must be >= 0")
        if self.court_grid < 1:
            raise ValueError("court_grid must be >= 1")

    @property
    def central_court(self) -> tuple[int, int]:
        c = self.court_grid // 2
        return (c, c)


@dataclass(frozen=True)
class Building:
    x0: float
    y0: float
    x1: float
    y1: float
    height: float

    def overlaps(self, other: "Building") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1


@dataclass(frozen=True)
class WorldGeometry:
    extent: tuple[float, float]
    buildings: tuple[Building, ...]
    landing_pads: tuple[tuple[float, float], ...]
    spec: WorldSpec | None = field(default=None, compare=False)


def _court_rects(spec: WorldSpec):
    n = spec.court_grid
    ex, ey = spec.world_extent
    cw = (ex - 2 * spec.border_width - (n - 1) * spec.street_width) / n
    ch = (ey - 2 * spec.border_width - (n - 1) * spec.street_width) / n
    if cw <= 0 or ch <= 0:
        raise PackingError(
            f"no room for {n}x{n} courts in extent {spec.world_extent} "
            f"with border {spec.border_width} m and streets {spec.street_width} m"
        )
    for j in range(n):
        for i in range(n):
            x0 = spec.border_width + i * (cw + spec.street_width)
            y0 = spec.border_width + j * (ch + spec.street_width)
            yield (i, j), (x0, y0, x0 + cw, y0 + ch)


def _lots(rect, footprint, gap):
    x0, y0, x1, y1 = rect
    fw, fd = footprint
    cols = int(math.floor((x1 - x0 + gap) / (fw + gap) + 1e-9))
    rows = int(math.floor((y1 - y0 + gap) / (fd + gap) + 1e-9))
    if cols < 1 or rows < 1:
        raise PackingError(f"footprint {footprint} does not fit court of size {(x1 - x0, y1 - y0)}")
    # center the lattice inside the court
    ox = x0 + ((x1 - x0) - (cols * fw + (cols - 1) * gap)) / 2
    oy = y0 + ((y1 - y0) - (rows * fd + (rows - 1) * gap)) / 2
    for r in range(rows):
        for c in range(cols):
            bx = ox + c * (fw + gap)
            by = oy + r * (fd + gap)
            yield (bx, by, bx + fw, by + fd)


def generate_world(spec: WorldSpec) -> WorldGeometry:
    rng = random.Random(spec.seed)
    lo, hi = spec.height_range
    central = spec.central_court
    courts = dict(_court_rects(spec))

    cx0, cy0, cx1, cy1 = courts[central]
    if spec.landing_pads is None:
        pads = (((cx0 + cx1) / 2, (cy0 + cy1) / 2),)
    else:
        pads = tuple((float(x), float(y)) for x, y in spec.landing_pads)
        for px, py in pads:
            if not (cx0 <= px <= cx1 and cy0 <= py <= cy1):
                raise ValueError(f"landing pad {(px, py)} lies outside the central court")

    buildings = []
    for key, rect in courts.items():
        is_central = key == central
        footprint = spec.central_building_footprint if is_central else spec.outer_building_footprint
        for bx0, by0, bx1, by1 in _lots(rect, footprint, spec.lot_gap):
            if is_central and any(
                bx0 - spec.pad_clearance < px < bx1 + spec.pad_clearance
                and by0 - spec.pad_clearance < py < by1 + spec.pad_clearance
                for px, py in pads
            ):
                continue
            height = lo + (hi - lo) * rng.random()
            buildings.append(Building(bx0, by0, bx1, by1, height))
    return WorldGeometry(
        extent=tuple(spec.world_extent), buildings=tuple(buildings), landing_pads=pads, spec=spec
    )


def _pixel_span(a0: float, a1: float, resolution: float, n: int) -> tuple[int, int]:
    # pixels [k*r, (k+1)*r] with positive-area overlap of [a0, a1]
    lo = int(math.floor(a0 / resolution))
    hi = int(math.ceil(a1 / resolution))
    return max(lo, 0), min(hi, n)


def rasterize(world: WorldGeometry, altitudes, resolution: float = 1.0) -> list[GrayscaleLayer]:
    """Render one layer per altitude: a pixel is 0 iff it overlaps a building taller than the altitude."""
    altitudes = [float(a) for a in altitudes]
    if not altitudes:
        raise ValueError("altitude list is empty")
    if any(a < 0 for a in altitudes):
        raise ValueError("altitudes must be non-negative")
    if any(b <= a for a, b in zip(altitudes, altitudes[1:])):
        raise ValueError("altitudes must be strictly increasing")
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    ex, ey = world.extent
    width = int(round(ex / resolution))
    height = int(round(ey / resolution))

    # tallest building covering each pixel
    tallest = np.zeros((height, width))
    for b in world.buildings:
        i0, i1 = _pixel_span(b.x0, b.x1, resolution, width)
        j0, j1 = _pixel_span(b.y0, b.y1, resolution, height)
        if i0 < i1 and j0 < j1:
            view = tallest[j0:j1, i0:i1]
            np.maximum(view, b.height, out=view)

    layers = []
    for alt in altitudes:
        px = np.where(tallest > alt, OCCUPIED, FREE).astype(np.uint8)
        layers.append(GrayscaleLayer(px, resolution=resolution, altitude=alt))
    return layers


def world_to_json(world: WorldGeometry) -> str:
    doc = {
        "rng": RNG_ALGORITHM,
        "seed": world.spec.seed if world.spec else None,
        "spec": asdict(world.spec) if world.spec else None,
        "extent": list(world.extent),
        "landing_pads": [list(p) for p in world.landing_pads],
        "buildings": [asdict(b) for b in world.buildings],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def world_from_json(text: str) -> WorldGeometry:
    doc = json.loads(text)
    spec = None
    if doc.get("spec"):
        s = dict(doc["spec"])
        for key in ("central_building_footprint", "outer_building_footprint", "height_range", "world_extent"):
            s[key] = tuple(s[key])
        if s.get("landing_pads") is not None:
            s["landing_pads"] = tuple(tuple(p) for p in s["landing_pads"])
        spec = WorldSpec(**s)
    return WorldGeometry(
        extent=tuple(doc["extent"]),
        buildings=tuple(Building(**b) for b in doc["buildings"]),
        landing_pads=tuple(tuple(p) for p in doc["landing_pads"]),
        spec=spec,
    )

"""3D occupancy node grid: thresholding, safety-margin inflation, coarsening.

``occupied`` is a boolean array indexed ``[x, y, z]`` (z = layer index,
lowest altitude first). ``True`` is an occupied/restricted node, ``False`` a
free one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.ndimage import maximum_filter1d

from .raster import GrayscaleLayer

__all__ = [
    "FREE_THRESHOLD",
    "OccupancyGrid",
    "MarginPreset",
    "MARGIN_PRESETS",
    "resolve_margin",
    "LayerMismatchError",
    "threshold_layers",
    "inflate",
    "coarsen",
    "grid_to_json",
    "grid_from_json",
    "rle_encode",
    "rle_decode",
]

# pixels at or above this gray value are free
FREE_THRESHOLD = 254


class LayerMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    occupied: np.ndarray
    cell_size_xy: float = 1.0
    cell_size_z: float = 1.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.ndim != 3:
            raise ValueError(f"occupied must be 3D [x, y, z], got shape {occ.shape}")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        if not (self.cell_size_xy > 0 and self.cell_size_z > 0):
            raise ValueError("cell sizes must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.occupied.shape

    @property
    def nx(self) -> int:
        return self.occupied.shape[0]

    @property
    def ny(self) -> int:
        return self.occupied.shape[1]

    @property
    def nz(self) -> int:
        return self.occupied.shape[2]

    def in_bounds(self, idx) -> bool:
        x, y, z = idx
        return 0 <= x < self.nx and 0 <= y < self.ny and 0 <= z < self.nz

    def is_free(self, idx) -> bool:
        return self.in_bounds(idx) and not self.occupied[tuple(idx)]

    @cached_property
    def padded_free(self) -> bytearray:
        """Free mask with a one-cell occupied border, flattened x-fastest.

        Flat index of padded cell (x, y, z) is ``x + X*(y + Y*z)`` with
        ``X = nx + 2``, ``Y = ny + 2``; interior cell (x, y, z) sits at (x+1, y+1, z+1).
        """
        padded = np.zeros((self.nx + 2, self.ny + 2, self.nz + 2), dtype=np.uint8)
        padded[1:-1, 1:-1, 1:-1] = ~self.occupied
        return bytearray(padded.ravel(order="F").tobytes())

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.cell_size_xy == other.cell_size_xy
            and self.cell_size_z == other.cell_size_z
            and self.shape == other.shape
            and bool(np.array_equal(self.occupied, other.occupied))
        )

    __hash__ = None


@dataclass(frozen=True)
class MarginPreset:
    name: str
    margin_m: float
    source: str


MARGIN_PRESETS = {
    p.name: p
    for p in (
        MarginPreset("brazil_0_400ft", 30.0, "Brazil ICA 100-40: people, buildings, properties, 0-400 ft"),
        MarginPreset("australia_person", 30.0, "Australia: person not associated with the operation"),
        MarginPreset("japan_people", 30.0, "Japan: people and properties"),
        MarginPreset("croatia_people_structures", 30.0, "Croatia: people and structures"),
        MarginPreset("belgium_buildings", 50.0, "Belgium: buildings, people, animals"),
        MarginPreset("italy_people_properties", 50.0, "Italy: people and properties"),
        MarginPreset("sweden_people_properties", 50.0, "Sweden: people, animals and properties"),
        MarginPreset("uk_person_object", 50.0, "UK: person, object, vehicle"),
        MarginPreset("czech_person", 100.0, "Czech Republic: person not associated with the operation"),
        MarginPreset("uae_crowds_properties", 150.0, "UAE: crowds, public and private properties"),
        MarginPreset("ireland_structures", 150.0, "Ireland: people, vessel, vehicle and structures"),
    )
}


def resolve_margin(margin) -> tuple[float, str | None]:
    """Accept a preset name or a number of meters; returns ``(meters, preset_name)``."""
    if isinstance(margin, str):
        if margin in MARGIN_PRESETS:
            return MARGIN_PRESETS[margin].margin_m, margin
        try:
            margin = float(margin)
        except ValueError:
            known = ", ".join(sorted(MARGIN_PRESETS))
            raise ValueError(f"unknown margin preset {margin!r}; known presets: {known}") from None
    margin = float(margin)
    if not margin >= 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    return margin, None


def threshold_layers(layers: list[GrayscaleLayer], sources=None) -> OccupancyGrid:
    """Stack layers into a grid; a cell is free iff its pixel is >= 254."""
    if not layers:
        raise LayerMismatchError("no layers given")
    first = layers[0]
    for k, layer in enumerate(layers[1:], start=1):
        if (layer.width, layer.height) != (first.width, first.height):
            raise LayerMismatchError(
                f"layer {k} is {layer.width}x{layer.height}, expected {first.width}x{first.height}"
            )
        if layer.resolution != first.resolution:
            raise LayerMismatchError(f"layer {k} resolution {layer.resolution} != {first.resolution}")
    alts = [layer.altitude for layer in layers]
    steps = [b - a for a, b in zip(alts, alts[1:])]
    if any(s <= 0 for s in steps):
        raise LayerMismatchError(f"altitudes must be strictly increasing, got {alts}")
    if steps and not all(math.isclose(s, steps[0], rel_tol=1e-9) for s in steps):
        raise LayerMismatchError(f"altitude spacing must be uniform, got steps {steps}")
    cell_z = steps[0] if steps else 1.0

    # pixels are [row=y, col=x]
    stack = np.stack([layer.pixels.T for layer in layers], axis=-1)
    if sources is None:
        sources = [{"altitude_m": a} for a in alts]
    provenance = {
        "threshold": FREE_THRESHOLD,
        "margin_m": 0.0,
        "coarsen_factor": 1,
        "source_layers": list(sources),
    }
    return OccupancyGrid(stack < FREE_THRESHOLD, first.resolution, cell_z, provenance)


def _within(dx: float, dy: float, margin: float) -> bool:
    return dx * dx + dy * dy <= margin * margin


def inflate(grid: OccupancyGrid, margin_m: float, preset: str | None = None) -> OccupancyGrid:
    """Mark every cell whose center lies within ``margin_m`` (horizontal, same layer) of an occupied cell center."""
    if not margin_m >= 0:
        raise ValueError(f"margin must be >= 0, got {margin_m}")
    s = grid.cell_size_xy
    occ = grid.occupied
    out = occ.copy()
    reach = int(math.floor(margin_m / s)) + 1
    reach = min(reach, max(grid.nx, grid.ny))
    src = occ.astype(np.uint8)
    # disc = union over row offsets b of a horizontal run of half-width w(b)
    for b in range(-reach, reach + 1):
        w = -1
        for a in range(0, reach + 1):
            if _within(a * s, b * s, margin_m):
                w = a
        if w < 0:
            continue
        run = maximum_filter1d(src, size=2 * w + 1, axis=0, mode="constant", cval=0)
        if b > 0:
            out[:, b:, :] |= run[:, :-b, :].astype(bool)
        elif b < 0:
            out[:, :b, :] |= run[:, -b:, :].astype(bool)
        else:
            out |= run.astype(bool)
    prov = dict(grid.provenance)
    prov["margin_m"] = float(margin_m)
    if preset is not None:
        prov["margin_preset"] = preset
    return replace(grid, occupied=out, provenance=prov)


def coarsen(grid: OccupancyGrid, factor: int) -> OccupancyGrid:
    """Group ``factor x factor`` horizontal blocks; a block is occupied if any member is."""
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"coarsen factor must be >= 1, got {factor}")
    nx, ny, nz = grid.shape
    if nx % factor or ny % factor:
        raise ValueError(f"coarsen factor {factor} does not divide grid size {nx}x{ny}")
    blocks = grid.occupied.reshape(nx // factor, factor, ny // factor, factor, nz)
    prov = dict(grid.provenance)
    prov["coarsen_factor"] = int(prov.get("coarsen_factor", 1)) * factor
    return replace(
        grid,
        occupied=blocks.any(axis=(1, 3)),
        cell_size_xy=grid.cell_size_xy * factor,
        provenance=prov,
    )


def rle_encode(flat) -> list[list[int]]:
    flat = np.asarray(flat, dtype=np.uint8)
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    return [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs) -> np.ndarray:
    if not runs:
        return np.zeros(0, dtype=bool)
    values = np.array([v for v, _ in runs], dtype=bool)
    counts = np.array([c for _, c in runs], dtype=np.int64)
    return np.repeat(values, counts)


def grid_to_json(grid: OccupancyGrid) -> str:
    doc = {
        "nx": grid.nx,
        "ny": grid.ny,
        "nz": grid.nz,
        "cell_size_xy": grid.cell_size_xy,
        "cell_size_z": grid.cell_size_z,
        "provenance": grid.provenance,
        "order": "x-fastest",
        "occupancy_rle": rle_encode(grid.occupied.ravel(order="F")),
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def grid_from_json(text: str) -> OccupancyGrid:
    doc = json.loads(text)
    nx, ny, nz = doc["nx"], doc["ny"], doc["nz"]
    flat = rle_decode(doc["occupancy_rle"])
    if flat.size != nx * ny * nz:
        raise ValueError(f"run lengths cover {flat.size} cells, expected {nx * ny * nz}")
    return OccupancyGrid(
        flat.reshape((nx, ny, nz), order="F"),
        float(doc["cell_size_xy"]),
        float(doc["cell_size_z"]),
        doc.get("provenance", {}),
    )

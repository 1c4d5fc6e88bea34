"""Per-altitude grayscale occupancy layers and their PGM (netpbm graymap) I/O.

A layer is a 2D raster where each pixel covers ``resolution`` x ``resolution``
meters of ground at a fixed ``altitude``. PGM carries neither value, so layer
sets are described by a JSON sidecar listing ``{file, altitude_m, resolution_m}``.

Pixel arrays are indexed ``[row, col]``; row ``j`` maps to the world y axis and
column ``i`` to the x axis (no vertical flip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GrayscaleLayer",
    "PgmError",
    "BadMagicError",
    "HeaderError",
    "MaxvalError",
    "ZeroDimensionError",
    "TruncatedDataError",
    "parse_pgm",
    "serialize_pgm",
    "read_pgm",
    "write_pgm",
    "write_layer_set",
    "read_layer_set",
    "SIDECAR_NAME",
]

SIDECAR_NAME = "layers.json"
_WHITESPACE = b" \t\r\n\x0b\x0c"


class PgmError(ValueError):
    """Base class for PGM parse errors; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.reason = message
        self.offset = offset


class BadMagicError(PgmError):
    pass


class HeaderError(PgmError):
    pass


class MaxvalError(PgmError):
    pass


class ZeroDimensionError(PgmError):
    pass


class TruncatedDataError(PgmError):
    pass


@dataclass(frozen=True, eq=False)
class GrayscaleLayer:
    pixels: np.ndarray
    resolution: float = 1.0
    altitude: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"pixels must be 2D, got shape {px.shape}")
        if px.size and (px.min() < 0 or px.max() > 255):
            raise ValueError("pixel values must lie in 0..255")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if not self.resolution > 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if not self.altitude >= 0:
            raise ValueError(f"altitude must be >= 0, got {self.altitude}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayscaleLayer):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.altitude == other.altitude
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    __hash__ = None


class _HeaderReader:
    """Whitespace/comment aware tokenizer over the PGM header."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.token_start = 0

    def _skip(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos : self.pos + 1]
            if c in _WHITESPACE and c:
                self.pos += 1
            elif c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                break

    def integer(self, what: str) -> int:
        self._skip()
        start = self.token_start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            if start >= len(data):
                raise TruncatedDataError(f"unexpected end of data while reading {what}", start)
            raise HeaderError(f"expected integer for {what}", start)
        return int(data[start : self.pos])


def parse_pgm(data: bytes, altitude: float = 0.0, resolution: float = 1.0) -> GrayscaleLayer:
    """Parse a P5 (binary) or P2 (ASCII) graymap with maxval <= 255.

    Bytes after the declared ``width * height`` payload are ignored.
    """
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise BadMagicError(f"bad magic {magic!r}, expected b'P5' or b'P2'", 0)
    reader = _HeaderReader(data)
    reader.pos = 2
    if len(data) > 2 and data[2:3] not in _WHITESPACE and data[2:3] != b"#":
        raise BadMagicError("magic number must be followed by whitespace", 2)

    width = reader.integer("width")
    width_at = reader.token_start
    height = reader.integer("height")
    if width == 0 or height == 0:
        at = width_at if width == 0 else reader.token_start
        raise ZeroDimensionError(f"zero dimension {width}x{height}", at)
    maxval = reader.integer("maxval")
    maxval_at = reader.token_start
    if maxval > 255:
        raise MaxvalError(f"maxval {maxval} > 255 is not supported", maxval_at)
    if maxval == 0:
        raise MaxvalError("maxval must be positive", maxval_at)

    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates maxval from the raster
        if reader.pos >= len(data):
            raise TruncatedDataError("missing raster after header", reader.pos)
        if data[reader.pos : reader.pos + 1] not in _WHITESPACE:
            raise HeaderError("maxval must be followed by a single whitespace byte", reader.pos)
        start = reader.pos + 1
        payload = data[start : start + n]
        if len(payload) < n:
            raise TruncatedDataError(
                f"expected {n} pixel bytes, found {len(payload)}", start + len(payload)
            )
        values = np.frombuffer(payload, dtype=np.uint8)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise HeaderError(f"pixel value exceeds maxval {maxval}", start + int(bad[0]))
    else:
        values = np.empty(n, dtype=np.uint8)
        for k in range(n):
            v = reader.integer("pixel value")
            if v > maxval:
                raise HeaderError(f"pixel value {v} exceeds maxval {maxval}", reader.token_start)
            values[k] = v
    return GrayscaleLayer(values.reshape(height, width), resolution=resolution, altitude=altitude)


def serialize_pgm(layer: GrayscaleLayer) -> bytes:
    header = f"P5\n{layer.width} {layer.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(layer.pixels, dtype=np.uint8).tobytes()


def read_pgm(path, altitude: float = 0.0, resolution: float = 1.0) -> GrayscaleLayer:
    return parse_pgm(Path(path).read_bytes(), altitude=altitude, resolution=resolution)


def write_pgm(path, layer: GrayscaleLayer) -> None:
    Path(path).write_bytes(serialize_pgm(layer))


def write_layer_set(directory, layers, stem: str = "layer") -> Path:
    """Write each layer as ``<stem>_<k>.pgm`` plus the JSON sidecar; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, layer in enumerate(layers):
        name = f"{stem}_{k:03d}.pgm"
        write_pgm(directory / name, layer)
        entries.append(
            {"file": name, "altitude_m": layer.altitude, "resolution_m": layer.resolution}
        )
    sidecar = directory / SIDECAR_NAME
    sidecar.write_text(json.dumps({"layers": entries}, indent=2, sort_keys=True) + "\n")
    return sidecar


def read_layer_set(sidecar) -> list[GrayscaleLayer]:
    """Load the layers listed in a sidecar; file names resolve relative to the sidecar."""
    sidecar = Path(sidecar)
    if sidecar.is_dir():
        sidecar = sidecar / SIDECAR_NAME
    doc = json.loads(sidecar.read_text())
    layers = []
    for entry in doc["layers"]:
        path = sidecar.parent / entry["file"]
        try:
            layers.append(
                read_pgm(path, altitude=float(entry["altitude_m"]), resolution=float(entry["resolution_m"]))
            )
        except PgmError as exc:
            raise type(exc)(f"{path}: {exc.reason}", exc.offset) from None
    return layers

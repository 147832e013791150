import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from shapely.geometry import LinearRing, Polygon

from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BinaryShape:
    """A rasterized subset of the plane.

    ``bits`` is stored in raster order (row 0 is the TOP row, as in image
    files); ``origin`` is the physical lower-left corner of the grid.
    """
    bits: np.ndarray
    spacing: float = 1.0
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise InvalidArgumentError(f"Shape bits must be a non-empty 2-D grid, got shape {bits.shape}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise InvalidArgumentError(f"Shape spacing must be positive, got {self.spacing}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)
        object.__setattr__(self, 'spacing', float(self.spacing))
        object.__setattr__(self, 'origin', (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def pixel_count(self) -> int:
        return int(self.bits.sum())

    @property
    def area(self) -> float:
        return self.pixel_count * self.spacing * self.spacing

    def is_empty(self) -> bool:
        return not self.bits.any()

    def bottom_up(self) -> np.ndarray:
        """Bits indexed [j, i] with j counted from the bottom row"""
        return self.bits[::-1]

    def with_bits(self, bits: np.ndarray) -> 'BinaryShape':
        return BinaryShape(bits, self.spacing, self.origin)

    def __eq__(self, other):
        if not isinstance(other, BinaryShape):
            return NotImplemented
        return (self.spacing == other.spacing and self.origin == other.origin
                and np.array_equal(self.bits, other.bits))

    __hash__ = None

    def __repr__(self):
        return f"BinaryShape({self.width}x{self.height}, spacing={self.spacing}, pixels={self.pixel_count})"


@dataclass(frozen=True)
class PolygonShape:
    """Simple counterclockwise polygon, closed implicitly"""
    vertices: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        vertices = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(vertices) < 3:
            raise InvalidArgumentError(f"A polygon needs at least 3 vertices, got {len(vertices)}")
        ring = LinearRing(vertices)
        if not ring.is_simple:
            raise InvalidArgumentError("Polygon is self-intersecting")
        if Polygon(vertices).area <= 0 or not ring.is_ccw:
            raise InvalidArgumentError("Polygon must have positive counterclockwise area")
        object.__setattr__(self, 'vertices', vertices)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> 'PolygonShape':
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @property
    def area(self) -> float:
        return Polygon(self.vertices).area

    def bounds(self) -> Tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Crossing-number test with half-open edges.

        An edge counts when the point's y lies in [min(y1, y2), max(y1, y2))
        and the point is strictly left of the crossing, so points on bottom
        and left edges are inside and points on top and right edges are not.
        """
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        vertices = self.vertices
        for (x1, y1), (x2, y2) in zip(vertices, vertices[1:] + vertices[:1]):
            if y1 == y2:
                continue
            crosses = (y1 <= y) != (y2 <= y)
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < x_cross)
        return inside


@dataclass(frozen=True)
class DiskShape:
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgumentError(f"Disk radius must be positive, got {self.radius}")
        object.__setattr__(self, 'center', (float(self.center[0]), float(self.center[1])))

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def bounds(self) -> Tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 < self.radius ** 2


"""Axis-aligned rectangles and the uniform grids fields live on."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, GeometryError

# relative slack used when snapping real coordinates to node indices
_SNAP = 1e-9


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 >= self.x0 and self.y1 >= self.y0):
            raise GeometryError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def expand(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def contains(self, other: "Rect", tol: float = 1e-9) -> bool:
        return (other.x0 >= self.x0 - tol and other.y0 >= self.y0 - tol
                and other.x1 <= self.x1 + tol and other.y1 <= self.y1 + tol)

    def contains_point(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return self.x0 - tol <= x <= self.x1 + tol and self.y0 - tol <= y <= self.y1 + tol

    @classmethod
    def parse(cls, text: str) -> "Rect":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise GeometryError(f"expected X0,Y0,X1,Y1, got {text!r}")
        return cls(*parts)

    @classmethod
    def square(cls, half_width: float, cx: float = 0.0, cy: float = 0.0) -> "Rect":
        return cls(cx - half_width, cy - half_width, cx + half_width, cy + half_width)


def _as_int(value: float, what: str) -> int:
    n = round(value)
    if abs(value - n) > _SNAP * max(1.0, abs(value)) * 1e3:
        raise ConfigurationError(f"{what} = {value!r} is not an integer")
    return int(n)


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid of pitch ``pitch`` covering ``extent`` (both ends included).

    ``padding`` is the extra margin synthesized around the extent and cropped away
    afterwards. Row index runs along y, column index along x.
    """

    pitch: float
    extent: Rect
    padding: float = 0.0

    def __post_init__(self):
        if not self.pitch > 0:
            raise ConfigurationError("pitch must be positive")
        if self.padding < 0:
            raise ConfigurationError("padding must be nonnegative")
        _as_int(self.extent.width / self.pitch, "extent width / pitch")
        _as_int(self.extent.height / self.pitch, "extent height / pitch")

    @property
    def cols(self) -> int:
        return round(self.extent.width / self.pitch) + 1

    @property
    def rows(self) -> int:
        return round(self.extent.height / self.pitch) + 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def xs(self):
        import numpy as np
        return self.extent.x0 + self.pitch * np.arange(self.cols)

    def ys(self):
        import numpy as np
        return self.extent.y0 + self.pitch * np.arange(self.rows)

    def node_xy(self, row: int, col: int) -> tuple[float, float]:
        return self.extent.x0 + col * self.pitch, self.extent.y0 + row * self.pitch

    def snap(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the node whose cell contains the point."""
        if not self.extent.contains_point(x, y, tol=0.5 * self.pitch):
            raise GeometryError(f"point ({x}, {y}) outside grid extent {self.extent}")
        col = int(math.floor((x - self.extent.x0) / self.pitch + 0.5))
        row = int(math.floor((y - self.extent.y0) / self.pitch + 0.5))
        return min(max(row, 0), self.rows - 1), min(max(col, 0), self.cols - 1)

    def index_range(self, rect: Rect) -> tuple[slice, slice]:
        """Row and column slices of the nodes lying inside ``rect``."""
        if not self.extent.contains(rect, tol=_SNAP * max(1.0, self.pitch)):
            raise GeometryError(f"{rect} not inside grid extent {self.extent}")
        h = self.pitch
        c0 = math.ceil((rect.x0 - self.extent.x0) / h - 1e-6)
        c1 = math.floor((rect.x1 - self.extent.x0) / h + 1e-6)
        r0 = math.ceil((rect.y0 - self.extent.y0) / h - 1e-6)
        r1 = math.floor((rect.y1 - self.extent.y0) / h + 1e-6)
        if c1 < c0 or r1 < r0:
            raise GeometryError(f"{rect} contains no grid node")
        return slice(r0, r1 + 1), slice(c0, c1 + 1)

    def subgrid(self, rect: Rect) -> tuple["GridSpec", tuple[slice, slice]]:
        rs, cs = self.index_range(rect)
        x0, y0 = self.node_xy(rs.start, cs.start)
        x1, y1 = self.node_xy(rs.stop - 1, cs.stop - 1)
        return GridSpec(self.pitch, Rect(x0, y0, x1, y1)), (rs, cs)

    def is_origin_aligned(self) -> bool:
        """True when the point (0, 0) would be a node of the (infinite) lattice."""
        for v in (self.extent.x0 / self.pitch, self.extent.y0 / self.pitch):
            if abs(v - round(v)) > 1e-6:
                return False
        return True

    @classmethod
    def aligned(cls, rect: Rect, pitch: float, padding: float = 0.0) -> "GridSpec":
        """Smallest origin-aligned grid whose extent covers ``rect``."""
        x0 = math.floor(rect.x0 / pitch + 1e-9) * pitch
        y0 = math.floor(rect.y0 / pitch + 1e-9) * pitch
        nx = math.ceil(rect.x1 / pitch - 1e-9) - math.floor(rect.x0 / pitch + 1e-9)
        ny = math.ceil(rect.y1 / pitch - 1e-9) - math.floor(rect.y0 / pitch + 1e-9)
        return cls(pitch, Rect(x0, y0, x0 + nx * pitch, y0 + ny * pitch), padding)

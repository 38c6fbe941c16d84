"""The thin rectangle around (0, 0) and (x, 0), its structure events, and the
open-square path shortening used to bound the length of the middle path piece."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .chem_dist import PathResult
from .errors import ConfigurationError, GeometryError, GridMismatchError, NotConnected
from .excursion import EIGHT, ComponentLabeling, Direction, crosses, excursion_mask, label_components
from .field_synth import FieldSample, center_indices, epsilon_steps
from .geometry import Rect

SUBEVENTS = ("H", "H1", "H2", "H3", "H4", "H1'", "H2'", "H3'", "H4'")


@dataclass(frozen=True)
class StructureGeometry:
    x: float
    delta: float
    l: float
    L: float
    H: Rect
    subrects: dict = field(hash=False)

    @property
    def origin_box(self) -> Rect:
        return Rect.square(self.l / 2)

    @property
    def target_box(self) -> Rect:
        return Rect.square(self.l / 2, cx=self.x)

    def direction(self, name: str) -> Direction:
        """Long-axis crossing direction of each rectangle."""
        if name == "H" or name[:2] in ("H3", "H4"):
            return Direction.LEFT_RIGHT
        return Direction.BOTTOM_TOP


def thin_width(x: float, delta: float) -> float:
    """l(x) = (ln x)^(1 + delta)."""
    return math.log(x) ** (1.0 + delta)


def build_geometry(x: float, delta: float) -> StructureGeometry:
    if not x > 3:
        raise ConfigurationError("x must exceed 3")
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    l = thin_width(x, delta)
    L = x + l
    H = Rect(-l / 2, -l / 2, -l / 2 + L, l / 2)
    base = {
        "H1": Rect(-l / 2, -l / 2, -l / 6, l / 2),
        "H2": Rect(l / 6, -l / 2, l / 2, l / 2),
        "H3": Rect(-l / 2, -l / 2, l / 2, -l / 6),
        "H4": Rect(-l / 2, l / 6, l / 2, l / 2),
    }
    subrects = {"H": H}
    subrects.update(base)
    subrects.update({k + "'": r.translate(x, 0.0) for k, r in base.items()})
    return StructureGeometry(x, delta, l, L, H, subrects)


@dataclass
class StructureEventReport:
    g1: bool = False
    per_subevent: dict = field(default_factory=dict)
    g2: Optional[bool] = None
    sup_diff: Optional[float] = None


def detect_g1(field_eps: FieldSample, geom: StructureGeometry, level: float) -> StructureEventReport:
    """Nine lengthwise crossings by E_level(f^eps); pass the harder level level/2 here."""
    if field_eps.level_meta is None or not field_eps.level_meta.is_discretized:
        raise ConfigurationError("detect_g1 expects a discretized field")
    grid = field_eps.grid
    if not grid.extent.contains(geom.H):
        raise GeometryError("thin rectangle H exceeds the field extent")
    bits = field_eps.values >= -level
    per = {}
    for name in SUBEVENTS:
        rs, cs = grid.index_range(geom.subrects[name])
        per[name] = crosses(bits[rs, cs], geom.direction(name))
    return StructureEventReport(all(per.values()), per)


def detect_g2(field: FieldSample, field_eps: FieldSample, geom: StructureGeometry,
              level: float) -> tuple[bool, float]:
    """Is ||f - f^eps|| over H below level / 2?"""
    if field.grid != field_eps.grid:
        raise GridMismatchError("f and f^eps live on different grids")
    rs, cs = field.grid.index_range(geom.H)
    sup = float(np.max(np.abs(field.values[rs, cs] - field_eps.values[rs, cs])))
    return sup < level / 2, sup


def detect_structure(field: FieldSample, field_eps: FieldSample, geom: StructureGeometry,
                     level: float) -> StructureEventReport:
    report = detect_g1(field_eps, geom, level / 2)
    report.g2, report.sup_diff = detect_g2(field, field_eps, geom, level)
    return report


# ----------------------------------------------------------- eps-squares


@dataclass
class CoarseSquares:
    """Open/closed state of the eps-squares whose centres lie in a rectangle."""

    open: np.ndarray
    xs: np.ndarray      # centre x per column
    ys: np.ndarray      # centre y per row
    epsilon: float

    def locate(self, x: float, y: float) -> tuple[int, int]:
        # half-open cells [c - eps/2, c + eps/2)
        j = int(math.floor((x - self.xs[0]) / self.epsilon + 0.5 + 1e-12))
        i = int(math.floor((y - self.ys[0]) / self.epsilon + 0.5 + 1e-12))
        if not (0 <= i < self.open.shape[0] and 0 <= j < self.open.shape[1]):
            raise GeometryError(f"point ({x}, {y}) not in an eps-square of the region")
        return i, j


def coarse_squares(mask_bits: np.ndarray, field: FieldSample, rect: Rect, epsilon: float) -> CoarseSquares:
    grid = field.grid
    m = epsilon_steps(grid.pitch, epsilon)
    fx = round(grid.extent.x0 / grid.pitch)
    fy = round(grid.extent.y0 / grid.pitch)
    rs, cs = grid.index_range(rect)
    cols = np.unique(center_indices(fx + cs.start, cs.stop - cs.start, m))
    rows = np.unique(center_indices(fy + rs.start, rs.stop - rs.start, m))
    cols = cols[(cols - fx >= 0) & (cols - fx < grid.cols)]
    rows = rows[(rows - fy >= 0) & (rows - fy < grid.rows)]
    state = mask_bits[np.ix_(rows - fy, cols - fx)]
    return CoarseSquares(state, cols * grid.pitch, rows * grid.pitch, epsilon)


def shorten_path(labeling_eps: ComponentLabeling, geom: StructureGeometry, y1, y2,
                 epsilon: float) -> PathResult:
    """Path through open eps-squares of H, each used once, joined centre to centre.

    Breadth-first search over 8-adjacent open squares; the polyline runs
    y1 -> centre of each square on the route -> y2. The returned ``cells`` are
    the (row, col) square indices along the route.
    """
    mask = labeling_eps.mask
    if mask.source is None:
        raise ValueError("labeling has no source field")
    sq = coarse_squares(mask.bits, mask.source, geom.H, epsilon)
    start = sq.locate(*y1)
    goal = sq.locate(*y2)
    if not (sq.open[start] and sq.open[goal]):
        raise NotConnected("an endpoint lies in a closed eps-square")
    prev = {start: None}
    queue = deque([start])
    nr, nc = sq.open.shape
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        i, j = cur
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                nxt = (i + di, j + dj)
                if (di or dj) and 0 <= nxt[0] < nr and 0 <= nxt[1] < nc \
                        and sq.open[nxt] and nxt not in prev:
                    prev[nxt] = cur
                    queue.append(nxt)
    if goal not in prev:
        raise NotConnected("endpoints are not connected through open eps-squares of H")
    route = []
    node = goal
    while node is not None:
        route.append(node)
        node = prev[node]
    route.reverse()
    pts = [tuple(y1)] + [(sq.xs[j], sq.ys[i]) for i, j in route] + [tuple(y2)]
    pts = np.asarray(pts, dtype=float)
    seg = np.diff(pts, axis=0)
    length = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    return PathResult(True, length, route)


def area_bound(geom: StructureGeometry, epsilon: float) -> float:
    """2 sqrt(2) Area(H) / eps."""
    return 2.0 * math.sqrt(2.0) * geom.H.area / epsilon


# ------------------------------------------------- tiling of a long crossing


def tiling(origin, L_len: float, l_len: float):
    """Horizontal 2l x l rectangles overlapping by one l x l square, plus those
    overlap squares (to be crossed bottom to top)."""
    x0, y0 = origin
    n = math.ceil(L_len / l_len - 1e-12)
    if n <= 2:
        return [Rect(x0, y0, x0 + L_len, y0 + l_len)], []
    horiz = []
    for i in range(n - 1):
        right = min(x0 + (i + 2) * l_len, x0 + L_len)
        horiz.append(Rect(x0 + i * l_len, y0, right, y0 + l_len))
    vert = [Rect(x0 + j * l_len, y0, x0 + (j + 1) * l_len, y0 + l_len) for j in range(1, n - 1)]
    return horiz, vert


def assemble_long_crossing(field_eps: FieldSample, level: float, L_len: float, l_len: float,
                           origin=None) -> bool:
    """Conjunction of the tile crossings; implies the L x l left-right crossing."""
    grid = field_eps.grid
    if origin is None:
        origin = (grid.extent.x0, grid.extent.y0)
    target = Rect(origin[0], origin[1], origin[0] + L_len, origin[1] + l_len)
    if not grid.extent.contains(target):
        raise GeometryError("tiling does not fit in the field extent")
    bits = field_eps.values >= -level
    horiz, vert = tiling(origin, L_len, l_len)
    for rect in horiz:
        rs, cs = grid.index_range(rect)
        if not crosses(bits[rs, cs], Direction.LEFT_RIGHT):
            return False
    for rect in vert:
        rs, cs = grid.index_range(rect)
        if not crosses(bits[rs, cs], Direction.BOTTOM_TOP):
            return False
    return True


# ------------------------------------------------ constructive path check


def lemma_path_exists(field: FieldSample, field_eps: FieldSample, geom: StructureGeometry,
                      level: float) -> bool:
    """Are (0,0) and (x,0) joined inside H by gamma1 ∪ gamma2 ∪ gamma3?

    gamma1, gamma3 may use E_level(f) within the l-boxes around the endpoints;
    gamma2 may use E_{level/2}(f^eps) anywhere in H.
    """
    grid = field.grid
    rs, cs = grid.index_range(geom.H)
    sub_grid, _ = grid.subgrid(geom.H)
    allowed = field_eps.values[rs, cs] >= -level / 2
    open_f = field.values[rs, cs] >= -level
    X = sub_grid.xs()[None, :]
    Y = sub_grid.ys()[:, None]
    half = geom.l / 2 + 1e-9
    near0 = (np.abs(X) <= half) & (np.abs(Y) <= half)
    nearx = (np.abs(X - geom.x) <= half) & (np.abs(Y) <= half)
    allowed = allowed | (open_f & (near0 | nearx))
    labels, _ = ndimage.label(allowed, structure=EIGHT)
    a = sub_grid.snap(0.0, 0.0)
    b = sub_grid.snap(geom.x, 0.0)
    return bool(labels[a] != 0 and labels[a] == labels[b])

"""Level-set boundaries by marching squares, cluster boundary decomposition and
the deterministic diameter bounds.

Contours are traced on the node grid of a box. The box is surrounded by a ring
of virtual closed nodes; crossings onto that ring are pinned to the open box
node, so clipped curves close along the box edge exactly. Segments are directed
with the open side on their left: outer contours come out counter-clockwise and
holes clockwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import pdist

from .chem_dist import DEFAULT_CAP, DiameterMode, DiameterReport, component_diameter
from .errors import CapExceeded, ClassificationFailure, GeometryError, SelfIntersectingPolygon
from .excursion import ComponentLabeling, excursion_mask, label_components
from .field_synth import FieldSample
from .geometry import Rect

# node values exactly on the level are nudged up by this much
DEGENERACY_NUDGE = 1e-12

# directed (start_edge, end_edge) per case; edges 0 bottom, 1 right, 2 top, 3 left
_SEGMENTS = {
    1: ((0, 3),), 2: ((1, 0),), 3: ((1, 3),), 4: ((2, 1),), 6: ((2, 0),),
    7: ((2, 3),), 8: ((3, 2),), 9: ((0, 2),), 11: ((1, 2),), 12: ((3, 1),),
    13: ((0, 1),), 14: ((3, 0),),
}
_SADDLE_SPLIT = {5: ((0, 3), (2, 1)), 10: ((1, 0), (3, 2))}
_SADDLE_JOIN = {5: ((0, 1), (2, 3)), 10: ((3, 0), (1, 2))}


@dataclass
class ContourSet:
    curves: list            # each an (k, 2) array of vertices, cyclic, no repeat
    clipped_flags: list     # True if the curve runs along the box edge
    lengths: list           # full polyline length per curve
    level_lengths: list     # length of the part lying on {f = -level}
    signed_areas: list

    @property
    def total_length(self) -> float:
        return float(sum(self.lengths))

    @property
    def level_length(self) -> float:
        return float(sum(self.level_lengths))

    def __len__(self):
        return len(self.curves)


@dataclass
class JordanDecomposition:
    contour: np.ndarray
    holes: list
    contour_length: float
    holes_length_sum: float
    clipped: bool = False


@dataclass
class BoundCheck:
    holds: bool
    ratio: float


# ------------------------------------------------------------ marching squares


class _Segments:
    """Crossing points and directed segments of one marching-squares pass."""

    def __init__(self, values, level, x0, y0, h, saddle="center"):
        v = np.array(values, dtype=float)
        v[v == -level] += DEGENERACY_NUDGE
        ny, nx = v.shape
        iso = -level
        P = np.full((ny + 2, nx + 2), -np.inf)
        P[1:-1, 1:-1] = v
        opened = P >= iso
        ring = np.ones_like(opened)
        ring[1:-1, 1:-1] = False
        nyp, nxp = P.shape
        self.nxp = nxp
        self.n_h = nyp * nxp

        pts = np.full((2 * self.n_h, 2), np.nan)
        X = x0 + h * (np.arange(nxp) - 1)
        Y = y0 + h * (np.arange(nyp) - 1)
        # horizontal edges (i, j)-(i, j+1)
        a, b = P[:, :-1], P[:, 1:]
        cross = opened[:, :-1] != opened[:, 1:]
        ii, jj = np.nonzero(cross)
        va, vb = a[ii, jj], b[ii, jj]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (iso - va) / (vb - va)
        t = np.where(np.isneginf(va), 1.0, np.where(np.isneginf(vb), 0.0, t))
        # (1 - t) a + t b hits node coordinates exactly at t = 0 and t = 1
        pts[ii * nxp + jj, 0] = (1 - t) * X[jj] + t * X[jj + 1]
        pts[ii * nxp + jj, 1] = Y[ii]
        # vertical edges (i, j)-(i+1, j)
        a, b = P[:-1, :], P[1:, :]
        cross = opened[:-1, :] != opened[1:, :]
        ii, jj = np.nonzero(cross)
        va, vb = a[ii, jj], b[ii, jj]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (iso - va) / (vb - va)
        t = np.where(np.isneginf(va), 1.0, np.where(np.isneginf(vb), 0.0, t))
        pts[self.n_h + ii * nxp + jj, 0] = X[jj]
        pts[self.n_h + ii * nxp + jj, 1] = (1 - t) * Y[ii] + t * Y[ii + 1]
        self.points = pts

        o = opened.astype(np.int8)
        case = o[:-1, :-1] | (o[:-1, 1:] << 1) | (o[1:, 1:] << 2) | (o[1:, :-1] << 3)
        ring_cell = ring[:-1, :-1] | ring[:-1, 1:] | ring[1:, 1:] | ring[1:, :-1]
        with np.errstate(invalid="ignore"):
            centre = 0.25 * (P[:-1, :-1] + P[:-1, 1:] + P[1:, 1:] + P[1:, :-1])
        centre_open = centre >= iso

        starts, ends, on_ring = [], [], []
        for cidx in range(1, 15):
            ci, cj = np.nonzero(case == cidx)
            if ci.size == 0:
                continue
            edge_ids = (
                ci * nxp + cj,                      # bottom
                self.n_h + ci * nxp + cj + 1,       # right
                (ci + 1) * nxp + cj,                # top
                self.n_h + ci * nxp + cj,           # left
            )
            if cidx in _SEGMENTS:
                groups = [(np.ones(ci.size, bool), _SEGMENTS[cidx])]
            else:
                if saddle == "center":
                    join = centre_open[ci, cj]
                elif saddle == "open":
                    join = np.ones(ci.size, bool)
                else:
                    raise ValueError(f"unknown saddle rule {saddle!r}")
                groups = [(join, _SADDLE_JOIN[cidx]), (~join, _SADDLE_SPLIT[cidx])]
            for sel, segs in groups:
                if not np.any(sel):
                    continue
                for s, e in segs:
                    starts.append(edge_ids[s][sel])
                    ends.append(edge_ids[e][sel])
                    on_ring.append(ring_cell[ci[sel], cj[sel]])
        if starts:
            self.starts = np.concatenate(starts)
            self.ends = np.concatenate(ends)
            self.on_ring = np.concatenate(on_ring)
        else:
            self.starts = self.ends = np.zeros(0, np.int64)
            self.on_ring = np.zeros(0, bool)

    def seg_lengths(self):
        d = self.points[self.ends] - self.points[self.starts]
        return np.hypot(d[:, 0], d[:, 1])

    def link(self) -> ContourSet:
        nxt = {}
        for k, s in enumerate(self.starts.tolist()):
            nxt[s] = k
        seg_len = self.seg_lengths()
        used = np.zeros(self.starts.size, bool)
        curves, flags, lengths, level_lengths, areas = [], [], [], [], []
        for k0 in range(self.starts.size):
            if used[k0]:
                continue
            ids, k = [], k0
            clipped = False
            total = lvl = 0.0
            while not used[k]:
                used[k] = True
                ids.append(self.starts[k])
                clipped |= bool(self.on_ring[k])
                total += seg_len[k]
                if not self.on_ring[k]:
                    lvl += seg_len[k]
                k = nxt[self.ends[k]]
            verts = self.points[np.asarray(ids)]
            keep = np.any(verts != np.roll(verts, 1, axis=0), axis=1)
            verts = verts[keep] if np.any(keep) else verts[:1]
            curves.append(verts)
            flags.append(clipped)
            lengths.append(total)
            level_lengths.append(lvl)
            areas.append(signed_area(verts))
        return ContourSet(curves, flags, lengths, level_lengths, areas)


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polyline_length(poly, closed: bool = True) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 2:
        return 0.0
    q = np.roll(p, -1, axis=0) if closed else p[1:]
    d = (q - p) if closed else (q - p[:-1])
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd ray casting; points exactly on an edge may go either way."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(poly, dtype=float)
    x1, y1 = p[:, 0], p[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    px, py = pts[:, 0:1], pts[:, 1:2]
    straddle = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (px < xcross)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


# ----------------------------------------------------------------- operations


def extract_contours(field: FieldSample, level: float, box: Optional[Rect] = None,
                     saddle: str = "center") -> ContourSet:
    """Marching-squares curves of {f = -level} inside ``box``, closed along the box edge."""
    sub = field if box is None else field.crop(box)
    g = sub.grid
    segs = _Segments(sub.values, level, g.extent.x0, g.extent.y0, g.pitch, saddle)
    return segs.link()


def level_set_length(field: FieldSample, level: float, box: Optional[Rect] = None) -> float:
    """Length of {f = -level} inside ``box`` (box-edge runs excluded)."""
    sub = field if box is None else field.crop(box)
    g = sub.grid
    segs = _Segments(sub.values, level, g.extent.x0, g.extent.y0, g.pitch)
    return float(np.sum(segs.seg_lengths()[~segs.on_ring]))


def component_contours(labeling: ComponentLabeling, label: int) -> ContourSet:
    """Boundary curves of one cluster.

    Open nodes of other clusters are forced closed and saddle cells join their
    open diagonal, which keeps the curves consistent with 8-connectivity.
    """
    mask = labeling.mask
    if mask.source is None:
        raise ValueError("labeling has no source field to contour")
    sl = ndimage.find_objects(labeling.labels, max_label=label)[label - 1]
    if sl is None:
        raise KeyError(f"label {label} not present")
    rows, cols = labeling.labels.shape
    rs = slice(max(sl[0].start - 1, 0), min(sl[0].stop + 1, rows))
    cs = slice(max(sl[1].start - 1, 0), min(sl[1].stop + 1, cols))
    vals = np.array(mask.source.values[rs, cs], dtype=float)
    inside = labeling.labels[rs, cs] == label
    # open nodes of other clusters never share a cell with this one; closing them
    # leaves this cluster's crossings untouched
    other = mask.bits[rs, cs] & ~inside
    vals = np.where(other, -mask.level - 1.0, vals)
    g = mask.grid
    x0, y0 = g.node_xy(rs.start, cs.start)
    segs = _Segments(vals, mask.level, x0, y0, g.pitch, saddle="open")
    return segs.link()


def jordan_decompose(labeling: ComponentLabeling, label: int,
                     contours: Optional[ContourSet] = None) -> JordanDecomposition:
    """Split a cluster boundary into its unique outer contour and its holes."""
    if contours is None:
        contours = component_contours(labeling, label)
    outer = [k for k, a in enumerate(contours.signed_areas) if a > 0]
    if len(outer) != 1:
        raise ClassificationFailure(
            f"expected one enclosing contour for label {label}, found {len(outer)}")
    k = outer[0]
    contour = contours.curves[k]
    # every cell of the cluster must sit in the closed interior of the contour
    grid = labeling.mask.grid
    cells = labeling.component_cells[label]
    r, c = np.divmod(cells[: min(cells.size, 64)], grid.cols)
    probe = np.column_stack([grid.extent.x0 + c * grid.pitch, grid.extent.y0 + r * grid.pitch])
    inside = points_in_polygon(probe, contour)
    on_edge = _near_polyline(probe, contour, 1e-9 * max(1.0, grid.pitch))
    if not np.all(inside | on_edge):
        raise ClassificationFailure(f"contour of label {label} does not enclose the cluster")
    holes = [contours.curves[j] for j in range(len(contours)) if j != k]
    holes_len = float(sum(contours.lengths[j] for j in range(len(contours)) if j != k))
    return JordanDecomposition(contour, holes, float(contours.lengths[k]), holes_len,
                               bool(contours.clipped_flags[k]))


def _near_polyline(points, poly, tol) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    a = p
    b = np.roll(p, -1, axis=0)
    out = np.zeros(len(points), bool)
    for i, q in enumerate(np.asarray(points, dtype=float)):
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.clip(np.einsum("ij,ij->i", q - a, ab) / denom, 0.0, 1.0)
        t = np.where(denom > 0, t, 0.0)
        d = np.hypot(*(a + t[:, None] * ab - q).T)
        out[i] = bool(np.min(d) <= tol)
    return out


def boundary_length(decomp: JordanDecomposition) -> float:
    return decomp.contour_length + decomp.holes_length_sum


def verify_diameter_bound(labeling: ComponentLabeling, label: int, decomp: JordanDecomposition,
                          diam: DiameterReport, tol: float = 0.10) -> BoundCheck:
    """Check diam_chem(C) <= 2 (1 + tol) length(boundary of C)."""
    if diam.mode is not DiameterMode.EXACT:
        raise ValueError("the diameter bound needs an exact diameter")
    if diam.component_label != label:
        raise ValueError("diameter report belongs to another label")
    length = boundary_length(decomp)
    ratio = diam.diameter / length if length > 0 else math.inf
    return BoundCheck(ratio <= 2.0 * (1.0 + tol), ratio)


def _segments_intersect(p, q):
    """Boolean matrix: closed segments p[i] and q[j] intersect."""
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    def on_seg(a, b, c):
        return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
                & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))

    a, b = p[:, None, 0, :], p[:, None, 1, :]
    c, d = q[None, :, 0, :], q[None, :, 1, :]
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    proper = (o1 != o2) & (o3 != o4) & (o1 != 0) & (o2 != 0) & (o3 != 0) & (o4 != 0)
    touch = (((o1 == 0) & on_seg(a, b, c)) | ((o2 == 0) & on_seg(a, b, d))
             | ((o3 == 0) & on_seg(c, d, a)) | ((o4 == 0) & on_seg(c, d, b)))
    return proper | touch


def is_simple_polygon(poly) -> bool:
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n < 3:
        return False
    if len(np.unique(p, axis=0)) != n:
        return False
    segs = np.stack([p, np.roll(p, -1, axis=0)], axis=1)
    hit = _segments_intersect(segs, segs)
    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (np.abs(idx[:, None] - idx[None, :]) == n - 1)
    if n == 3:
        return abs(signed_area(p)) > 0
    return not np.any(hit & ~adjacent)


def polygon_diameter(poly) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 2:
        return 0.0
    return float(np.max(pdist(p)))


def interior_diameter_bound(polygon) -> BoundCheck:
    """Euclidean diameter of a simple closed polygon is at most half its perimeter."""
    if not is_simple_polygon(polygon):
        raise SelfIntersectingPolygon("polygon is not simple")
    diam = polygon_diameter(polygon)
    per = polyline_length(polygon)
    return BoundCheck(diam <= 0.5 * per, diam / per)


# ------------------------------------------------------ per-component sweep


@dataclass
class ComponentReport:
    label: int
    n_cells: int
    n_holes: int
    boundary_length: float
    diameter: float
    ratio: float
    holds: bool
    clipped: bool


def analyze_components(field: FieldSample, level: float, box: Optional[Rect] = None,
                       cap: int = DEFAULT_CAP, tol: float = 0.10):
    """Diameter-versus-boundary check for every cluster of E ∩ box small enough for an exact diameter.

    Returns ``(reports, n_skipped)``.
    """
    sub = field if box is None else field.crop(box)
    labeling = label_components(excursion_mask(sub, level))
    reports, skipped = [], 0
    sizes = labeling.sizes()
    for lab, sl in enumerate(ndimage.find_objects(labeling.labels), start=1):
        if sl is None:
            continue
        if sizes[lab] > cap:
            skipped += 1
            continue
        bits = labeling.labels[sl] == lab
        d, (u, v), n = component_diameter(bits, sub.grid.pitch, DiameterMode.EXACT, cap)
        decomp = jordan_decompose(labeling, lab)
        report = DiameterReport(lab, d, DiameterMode.EXACT, (u, v), n)
        check = verify_diameter_bound(labeling, lab, decomp, report, tol)
        reports.append(ComponentReport(lab, n, len(decomp.holes), boundary_length(decomp),
                                       d, check.ratio, check.holds, decomp.clipped))
    return reports, skipped

"""Chemical distance and chemical diameter on excursion masks (octile metric).

Paths run through open nodes with axis steps of length h and diagonal steps of
length h*sqrt(2), matching the 8-connectivity of the labeling.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import CapExceeded, GeometryError
from .excursion import ComponentLabeling, label_array
from .geometry import Rect

DEFAULT_CAP = 20_000
ENDPOINT_CLOSED = "EndpointClosed"
# sources handled per Dijkstra call in the exact diameter
_BATCH = 16

Cell = tuple[int, int]


class DiameterMode(enum.Enum):
    EXACT = "exact"
    DOUBLE_SWEEP = "sweep"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        if value in ("doublesweep", "double_sweep", "double-sweep"):
            return cls.DOUBLE_SWEEP
        return cls(value)


@dataclass
class PathResult:
    reachable: bool
    length: float = math.inf
    cells: Optional[list[Cell]] = None
    error: Optional[str] = None


@dataclass
class DiameterReport:
    component_label: int
    diameter: float
    mode: DiameterMode
    witness_pair: tuple[Cell, Cell]
    n_cells: int = 0


class OctileGraph:
    """Sparse graph on the True nodes of a boolean array."""

    def __init__(self, bits: np.ndarray, pitch: float):
        bits = np.asarray(bits, dtype=bool)
        self.shape = bits.shape
        self.pitch = pitch
        self.ids = np.full(bits.shape, -1, dtype=np.int64)
        self.rows, self.cols = np.nonzero(bits)
        self.n = self.rows.size
        self.ids[self.rows, self.cols] = np.arange(self.n)
        src, dst, w = [], [], []
        diag = pitch * math.sqrt(2.0)
        nr, nc = bits.shape
        for dr, dc, weight in ((0, 1, pitch), (1, 0, pitch), (1, 1, diag), (1, -1, diag)):
            r0, r1 = 0, nr - dr
            c0, c1 = max(0, -dc), nc - max(0, dc)
            a = self.ids[r0:r1, c0:c1]
            b = self.ids[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
            ok = (a >= 0) & (b >= 0)
            src.append(a[ok])
            dst.append(b[ok])
            w.append(np.full(int(ok.sum()), weight))
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        w = np.concatenate(w)
        self.matrix = coo_matrix((w, (src, dst)), shape=(self.n, self.n)).tocsr()

    def distances(self, sources, predecessors=False):
        return dijkstra(self.matrix, directed=False, indices=sources,
                        return_predecessors=predecessors)

    def cell(self, node: int) -> Cell:
        return int(self.rows[node]), int(self.cols[node])


def _component_graph(labeling: ComponentLabeling, label: int):
    sl = ndimage.find_objects(labeling.labels, max_label=label)
    if len(sl) < label or sl[label - 1] is None:
        raise KeyError(f"label {label} not present")
    rs, cs = sl[label - 1]
    bits = labeling.labels[rs, cs] == label
    return OctileGraph(bits, labeling.mask.grid.pitch), (rs.start, cs.start)


def chemical_distance(labeling: ComponentLabeling, a, b, return_path: bool = False) -> PathResult:
    """Octile shortest-path length between the cells containing points ``a`` and ``b``."""
    grid = labeling.mask.grid
    ca = grid.snap(*a)
    cb = grid.snap(*b)
    la = int(labeling.labels[ca])
    lb = int(labeling.labels[cb])
    if la == 0 or lb == 0:
        return PathResult(False, math.inf, None, ENDPOINT_CLOSED)
    if la != lb:
        return PathResult(False, math.inf)
    if ca == cb:
        return PathResult(True, 0.0, [ca] if return_path else None)
    graph, (r0, c0) = _component_graph(labeling, la)
    ia = graph.ids[ca[0] - r0, ca[1] - c0]
    ib = graph.ids[cb[0] - r0, cb[1] - c0]
    if return_path:
        dist, pred = graph.distances(int(ia), predecessors=True)
        path = []
        node = int(ib)
        while node >= 0:
            r, c = graph.cell(node)
            path.append((r + r0, c + c0))
            node = int(pred[node])
        path.reverse()
        return PathResult(True, float(dist[ib]), path)
    dist = graph.distances(int(ia))
    return PathResult(True, float(dist[ib]))


def _double_sweep(graph: OctileGraph):
    d0 = graph.distances(0)
    a = int(np.argmax(d0))
    da = graph.distances(a)
    b = int(np.argmax(da))
    return a, b, da


def _exact(graph: OctileGraph):
    """Exact diameter by bounding eccentricities.

    Each Dijkstra from ``v`` gives ecc(w) <= ecc(v) + d(v, w) for every node w.
    Nodes whose upper bound cannot beat the best eccentricity found are dropped;
    the remaining node with the largest bound is expanded next.
    """
    n = graph.n
    ecc_upper = np.full(n, np.inf)
    done = np.zeros(n, bool)
    best, pair = -1.0, (0, 0)

    def absorb(sources, dist):
        nonlocal best, pair
        for s, row in zip(sources, dist):
            far = int(np.argmax(row))
            if row[far] > best:
                best, pair = float(row[far]), (int(s), far)
            np.minimum(ecc_upper, row[far] + row, out=ecc_upper)
            done[s] = True

    a, b, da = _double_sweep(graph)
    absorb([a], da[None, :])
    db = graph.distances(b)
    absorb([b], db[None, :])
    c = int(np.argmin(np.maximum(da, db)))
    if not done[c]:
        absorb([c], graph.distances(c)[None, :])
    while True:
        cand = np.flatnonzero(~done & (ecc_upper > best * (1 + 1e-12)))
        if cand.size == 0:
            return best, pair
        pick = cand[np.argsort(-ecc_upper[cand], kind="stable")[:_BATCH]]
        absorb(pick, np.atleast_2d(graph.distances(pick)))


def all_pairs_diameter(bits: np.ndarray, pitch: float) -> tuple[float, tuple[Cell, Cell]]:
    """Unpruned maximum over all sources; reference for the pruned search."""
    graph = OctileGraph(bits, pitch)
    if graph.n <= 1:
        c = graph.cell(0) if graph.n else (0, 0)
        return 0.0, (c, c)
    dist = graph.distances(np.arange(graph.n))
    u, v = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return float(dist[u, v]), (graph.cell(u), graph.cell(v))


def component_diameter(bits: np.ndarray, pitch: float, mode=DiameterMode.EXACT,
                       cap: int = DEFAULT_CAP):
    """Diameter of a single 8-connected component given as a boolean array.

    Returns ``(diameter, (cell_u, cell_v), n_cells)`` in array coordinates.
    """
    mode = DiameterMode.parse(mode)
    n_cells = int(np.count_nonzero(bits))
    if mode is DiameterMode.EXACT and n_cells > cap:
        raise CapExceeded(n_cells, cap)
    graph = OctileGraph(bits, pitch)
    if graph.n == 1:
        c = graph.cell(0)
        return 0.0, (c, c), 1
    if mode is DiameterMode.EXACT:
        d, (u, v) = _exact(graph)
    else:
        u, v, du = _double_sweep(graph)
        d = float(du[v])
    return d, (graph.cell(u), graph.cell(v)), n_cells


def chemical_diameter(labeling: ComponentLabeling, label: int, mode=DiameterMode.EXACT,
                      cap: int = DEFAULT_CAP) -> DiameterReport:
    mode = DiameterMode.parse(mode)
    if not 1 <= label <= labeling.n_components:
        raise KeyError(f"label {label} not present")
    sl = ndimage.find_objects(labeling.labels, max_label=label)[label - 1]
    rs, cs = sl
    bits = labeling.labels[rs, cs] == label
    d, (u, v), n = component_diameter(bits, labeling.mask.grid.pitch, mode, cap)
    shift = (rs.start, cs.start)
    witness = ((u[0] + shift[0], u[1] + shift[1]), (v[0] + shift[0], v[1] + shift[1]))
    return DiameterReport(label, d, mode, witness, n)


def diameters_in_bits(bits: np.ndarray, pitch: float, mode=DiameterMode.EXACT,
                      cap: int = DEFAULT_CAP) -> list[float]:
    labels, n = label_array(bits)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        d, _, _ = component_diameter(labels[sl] == lab, pitch, mode, cap)
        out.append(d)
    return out


def s_statistic(labeling: ComponentLabeling, box: Rect, mode=DiameterMode.EXACT,
                cap: int = DEFAULT_CAP) -> float:
    """Sum of chemical diameters of the clusters of E ∩ box (relabelled inside the box)."""
    grid = labeling.mask.grid
    if not grid.extent.contains(box):
        raise GeometryError(f"box {box} outside grid extent {grid.extent}")
    rs, cs = grid.index_range(box)
    return float(sum(diameters_in_bits(labeling.mask.bits[rs, cs], grid.pitch, mode, cap)))

"""Excursion masks {f >= -level}, 8-connected cluster labels and crossing events."""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .field_synth import FieldSample
from .geometry import GridSpec, Rect

EIGHT = np.ones((3, 3), dtype=bool)


class Direction(enum.Enum):
    LEFT_RIGHT = "lr"
    BOTTOM_TOP = "bt"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        return cls(str(text).lower())


@dataclass(frozen=True, eq=False)
class ExcursionMask:
    grid: GridSpec
    level: float
    bits: np.ndarray
    source: Optional[FieldSample] = None

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def crop(self, rect: Rect) -> "ExcursionMask":
        sub, (rs, cs) = self.grid.subgrid(rect)
        src = self.source.crop(rect) if self.source is not None else None
        return ExcursionMask(sub, self.level, self.bits[rs, cs], src)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Labels 1..n_components in first-touched row-major order; 0 marks closed nodes."""

    mask: ExcursionMask
    labels: np.ndarray
    n_components: int
    connectivity: str = "eight"

    @functools.cached_property
    def component_cells(self) -> dict[int, np.ndarray]:
        """label -> flat node indices (row-major), ascending."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_components + 1)
        bounds = np.cumsum(counts)
        return {lab: order[bounds[lab - 1]:bounds[lab]] for lab in range(1, self.n_components + 1)}

    def sizes(self) -> np.ndarray:
        """Cell count per label, index 0 unused."""
        return np.bincount(self.labels.ravel(), minlength=self.n_components + 1)

    def label_at(self, x: float, y: float) -> int:
        r, c = self.mask.grid.snap(x, y)
        return int(self.labels[r, c])

    def crop(self, rect: Rect) -> "ComponentLabeling":
        return label_components(self.mask.crop(rect))


def excursion_mask(field: FieldSample, level: float) -> ExcursionMask:
    return ExcursionMask(field.grid, float(level), field.values >= -level, field)


def label_array(bits: np.ndarray) -> tuple[np.ndarray, int]:
    labels, n = ndimage.label(bits, structure=EIGHT)
    return labels.astype(np.int64, copy=False), int(n)


def label_components(mask: ExcursionMask) -> ComponentLabeling:
    labels, n = label_array(mask.bits)
    labels.flags.writeable = False
    return ComponentLabeling(mask, labels, n)


def crosses(bits: np.ndarray, direction: Direction) -> bool:
    """Does one 8-connected cluster of ``bits`` touch both opposite sides?"""
    if bits.size == 0:
        return False
    labels, n = label_array(bits)
    if n == 0:
        return False
    if direction is Direction.LEFT_RIGHT:
        a, b = labels[:, 0], labels[:, -1]
    else:
        a, b = labels[0, :], labels[-1, :]
    common = np.intersect1d(a[a > 0], b[b > 0])
    return common.size > 0


def detect_crossing(labeling: ComponentLabeling, rect: Rect, direction) -> bool:
    """Crossing of ``rect`` by the excursion set, using clusters of E ∩ rect only."""
    direction = Direction.parse(direction)
    rs, cs = labeling.mask.grid.index_range(rect)
    return crosses(labeling.mask.bits[rs, cs], direction)

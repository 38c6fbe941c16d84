"""Excursion sets of smooth planar Gaussian fields: synthesis, clusters,
chemical distances, boundary geometry and Monte Carlo campaigns."""

__version__ = "0.1.0"

from .errors import ExcursionLabError
from .field_synth import FieldSample, KernelSpec, discretize, sample_field
from .geometry import GridSpec, Rect

__all__ = ["ExcursionLabError", "FieldSample", "GridSpec", "KernelSpec", "Rect",
           "discretize", "sample_field"]

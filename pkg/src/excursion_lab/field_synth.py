"""Radial kernels, Gaussian field synthesis and the piecewise-constant discretization.

The field is realized as ``f = q * W``: i.i.d. N(0, h^2) node noise on a padded
grid, convolved with the truncated kernel ``q`` sampled on the same grid, then
cropped to the requested extent. Covariance is ``kappa = q * q``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import fft, integrate
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, DifferentiationError, QuadratureError
from .geometry import GridSpec, Rect

BF_AMPLITUDE = math.sqrt(2.0 / math.pi)
DEFAULT_TRUNCATION = 5.0
# tail of int q^2 beyond the truncation radius, relative to the total
MAX_TAIL_MASS = 1e-12


class KernelKind(enum.Enum):
    BARGMANN_FOCK = "bargmann-fock"
    CUSTOM_RADIAL = "custom-radial"


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic nonnegative convolution kernel ``q`` plus regularity metadata.

    For ``CUSTOM_RADIAL`` the profile is tabulated as ``(radii, values)`` with
    ``radii[0] == 0``; it is interpolated by a cubic spline with zero slope at the
    origin and taken as 0 beyond the last radius.
    """

    kind: KernelKind = KernelKind.BARGMANN_FOCK
    regularity_m: int = 3
    decay_beta: float = 3.0
    truncation_radius: float = DEFAULT_TRUNCATION
    radii: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if int(self.regularity_m) != self.regularity_m or self.regularity_m < 3:
            raise ConfigurationError("regularity_m must be an integer >= 3")
        if not self.decay_beta > 0:
            raise ConfigurationError("decay_beta must be positive")
        if not self.truncation_radius > 0:
            raise ConfigurationError("truncation_radius must be positive")
        if self.kind is KernelKind.CUSTOM_RADIAL:
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 4:
                raise ConfigurationError("custom profile needs >= 4 matching radii/values")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise ConfigurationError("profile radii must start at 0 and increase")
            if np.any(v < 0) or not np.any(v > 0):
                raise ConfigurationError("profile must be nonnegative and not identically 0")
        if self.tail_mass_fraction() >= MAX_TAIL_MASS:
            raise ConfigurationError(
                f"truncation radius {self.truncation_radius} drops "
                f"{self.tail_mass_fraction():.2e} of the kernel's L2 mass")

    @classmethod
    def bargmann_fock(cls, truncation_radius: float = DEFAULT_TRUNCATION,
                      regularity_m: int = 3, decay_beta: float = 3.0) -> "KernelSpec":
        return cls(KernelKind.BARGMANN_FOCK, regularity_m, decay_beta, truncation_radius)

    @classmethod
    def custom(cls, radii, values, truncation_radius: Optional[float] = None,
               regularity_m: int = 3, decay_beta: float = 3.0) -> "KernelSpec":
        radii = tuple(float(r) for r in radii)
        values = tuple(float(v) for v in values)
        if truncation_radius is None:
            truncation_radius = radii[-1]
        return cls(KernelKind.CUSTOM_RADIAL, regularity_m, decay_beta,
                   truncation_radius, radii, values)

    @functools.cached_property
    def _spline(self):
        return CubicSpline(np.asarray(self.radii), np.asarray(self.values),
                           bc_type=((1, 0.0), "not-a-knot"))

    def profile(self, r):
        """Vectorized q(r) without truncation."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind is KernelKind.BARGMANN_FOCK:
            return BF_AMPLITUDE * np.exp(-r * r)
        out = np.where(r <= self.radii[-1], self._spline(np.minimum(r, self.radii[-1])), 0.0)
        return np.maximum(out, 0.0)

    def profile_derivative(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind is KernelKind.BARGMANN_FOCK:
            return -2.0 * r * BF_AMPLITUDE * np.exp(-r * r)
        return np.where(r <= self.radii[-1], self._spline(np.minimum(r, self.radii[-1]), 1), 0.0)

    def l2_mass(self, lo: float = 0.0, hi: float = math.inf) -> float:
        """int over the annulus lo <= |x| < hi of q(|x|)^2 dx."""
        if self.kind is KernelKind.BARGMANN_FOCK:
            # 2 pi int r (2/pi) e^{-2 r^2} dr = e^{-2 lo^2} - e^{-2 hi^2}
            return math.exp(-2 * lo * lo) - (0.0 if hi == math.inf else math.exp(-2 * hi * hi))
        hi = min(hi, self.radii[-1])
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(lambda s: 2 * math.pi * s * float(self.profile(s)) ** 2,
                                lo, hi, limit=200, points=self.radii[1:-1][:50] or None)
        return val

    def tail_mass_fraction(self) -> float:
        total = self.l2_mass()
        return self.l2_mass(self.truncation_radius) / total


def eval_q(kernel: KernelSpec, r: float) -> float:
    """Radial profile q(r); zero beyond the truncation radius."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r >= kernel.truncation_radius:
        return 0.0
    return float(kernel.profile(r))


def _custom_covariance(kernel: KernelSpec, r: float) -> float:
    R = kernel.truncation_radius

    def inner(rho):
        def g(theta):
            d = math.sqrt(max(rho * rho + r * r - 2 * rho * r * math.cos(theta), 0.0))
            return float(kernel.profile(d)) if d < R else 0.0
        # split where the shifted point crosses the truncation circle
        brk = None
        if rho > 0 and r > 0:
            cos_b = (rho * rho + r * r - R * R) / (2 * rho * r)
            if -1 < cos_b < 1:
                brk = [math.acos(cos_b)]
        v, err = integrate.quad(g, 0.0, math.pi, limit=200, points=brk)
        if not math.isfinite(v) or err > 1e-6 * max(1.0, abs(v)):
            raise QuadratureError(f"angular quadrature failed at rho={rho}, r={r}")
        return 2.0 * rho * float(kernel.profile(rho)) * v

    val, err = integrate.quad(inner, 0.0, R, limit=400)
    if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        raise QuadratureError(f"radial quadrature did not converge (err={err:.2e})")
    return val


def eval_kernel(kernel: KernelSpec, r: float) -> float:
    """Covariance kappa(r) = (q * q)(r); analytic for Bargmann-Fock."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if kernel.kind is KernelKind.BARGMANN_FOCK:
        return math.exp(-0.5 * r * r)
    return _custom_covariance(kernel, r)


def second_spectral_moment(kernel: KernelSpec) -> float:
    """lambda_2 = -d^2 kappa / dx_1^2 at 0 = pi * int_0^inf q'(rho)^2 rho d rho."""
    if kernel.kind is KernelKind.BARGMANN_FOCK:
        return 1.0
    dq = kernel.profile_derivative(np.asarray(kernel.radii))
    if not np.all(np.isfinite(dq)):
        raise DifferentiationError("profile derivative is not finite")
    val, err = integrate.quad(lambda s: math.pi * s * float(kernel.profile_derivative(s)) ** 2,
                              0.0, kernel.truncation_radius, limit=400)
    if not math.isfinite(val) or err > 1e-6 * max(1.0, val) or val <= 0:
        raise DifferentiationError(f"second spectral moment failed (val={val}, err={err})")
    return val


def kac_rice_expected_length(kernel: KernelSpec, level: float) -> float:
    """Expected length of {f = -level} per unit area.

    Kac-Rice with a gradient independent of the value: E|grad f| * density(-level)
    = sqrt(lambda_2) * sqrt(pi/2) * exp(-level^2 / 2 s^2) / (s sqrt(2 pi)),
    s^2 = kappa(0). Equals sqrt(lambda_2) exp(-level^2/2) / 2 for unit variance.
    """
    lam2 = second_spectral_moment(kernel)
    var = eval_kernel(kernel, 0.0)
    return math.sqrt(lam2) * math.exp(-0.5 * level * level / var) / (2.0 * math.sqrt(var))


@dataclass(frozen=True)
class LevelMeta:
    is_discretized: bool = False
    epsilon: float = 0.0


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realization on ``grid``; ``values[row, col]`` is read-only."""

    grid: GridSpec
    values: np.ndarray
    seed: int = 0
    level_meta: Optional[LevelMeta] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.shape != self.grid.shape:
            raise ConfigurationError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: GridSpec, func, seed: int = 0) -> "FieldSample":
        """Synthetic sample ``func(X, Y)`` evaluated on the grid nodes."""
        X, Y = np.meshgrid(grid.xs(), grid.ys())
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape), seed)

    def crop(self, rect: Rect) -> "FieldSample":
        sub, (rs, cs) = self.grid.subgrid(rect)
        return FieldSample(sub, self.values[rs, cs], self.seed, self.level_meta)

    def value_at(self, x: float, y: float) -> float:
        r, c = self.grid.snap(x, y)
        return float(self.values[r, c])


# ---------------------------------------------------------------- synthesis


@functools.lru_cache(maxsize=16)
def _stencil(kernel: KernelSpec, pitch: float) -> np.ndarray:
    k = int(math.floor(kernel.truncation_radius / pitch))
    offs = pitch * np.arange(-k, k + 1)
    rr = np.hypot(offs[None, :], offs[:, None])
    q = np.where(rr < kernel.truncation_radius, kernel.profile(rr), 0.0)
    return q


@functools.lru_cache(maxsize=16)
def _stencil_spectrum(kernel: KernelSpec, pitch: float, shape: tuple[int, int]) -> np.ndarray:
    q = _stencil(kernel, pitch)
    k = q.shape[0] // 2
    buf = np.zeros(shape)
    buf[:q.shape[0], :q.shape[1]] = q
    # centre the stencil on index (0, 0) so the convolution is not shifted
    buf = np.roll(buf, (-k, -k), axis=(0, 1))
    return fft.rfft2(buf)


def noise_normalization(kernel: KernelSpec, pitch: float) -> float:
    """Global factor making the discrete variance h^2 sum q^2 equal kappa(0)."""
    q = _stencil(kernel, pitch)
    discrete_var = pitch * pitch * float(np.sum(q * q))
    return math.sqrt(eval_kernel(kernel, 0.0) / discrete_var)


def numerical_autoconvolution(kernel: KernelSpec, pitch: float, r_max: float):
    """Riemann-sum evaluation of (q * q)(r) along an axis, r = 0, h, ..., r_max.

    Independent of ``eval_kernel``; used to check the identity kappa = q * q.
    """
    q = _stencil(kernel, pitch)
    k = q.shape[0] // 2
    n = int(math.floor(r_max / pitch + 1e-9))
    shape = (fft.next_fast_len(2 * q.shape[0]),) * 2
    spec = fft.rfft2(q, shape)
    auto = fft.irfft2(spec * spec, shape) * pitch * pitch
    # full linear autoconvolution has its centre at index 2k
    row = auto[2 * k, 2 * k: 2 * k + n + 1]
    return pitch * np.arange(n + 1), row


def rng_for_seed(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample_field(kernel: KernelSpec, grid: GridSpec, seed: int) -> FieldSample:
    """Stationary centered Gaussian sample with covariance ``kappa`` on ``grid``."""
    h = grid.pitch
    if grid.padding < kernel.truncation_radius:
        raise ConfigurationError(
            f"grid padding {grid.padding} < kernel truncation radius {kernel.truncation_radius}")
    if h > kernel.truncation_radius / 4:
        raise ConfigurationError("pitch too coarse for the kernel (need h <= truncation_radius/4)")
    margin = int(math.ceil(grid.padding / h - 1e-9))
    rows, cols = grid.rows + 2 * margin, grid.cols + 2 * margin
    shape = (fft.next_fast_len(rows, real=True), fft.next_fast_len(cols, real=True))

    noise = rng_for_seed(seed).standard_normal((rows, cols)) * h
    spec = fft.rfft2(noise, shape) * _stencil_spectrum(kernel, h, shape)
    full = fft.irfft2(spec, shape, workers=1)
    vals = full[margin:margin + grid.rows, margin:margin + grid.cols]
    vals = vals * noise_normalization(kernel, h)
    return FieldSample(grid, vals, int(seed), LevelMeta(False, 0.0))


# ----------------------------------------------------------- discretization


def epsilon_steps(pitch: float, epsilon: float) -> int:
    m = epsilon / pitch
    mi = round(m)
    if mi < 1 or abs(m - mi) > 1e-6 * max(1.0, m):
        raise ConfigurationError(f"epsilon {epsilon} is not a positive multiple of pitch {pitch}")
    return int(mi)


def center_indices(first: int, count: int, m: int) -> np.ndarray:
    """Lattice index of the eps-centre owning each node along one axis.

    ``first`` is the lattice index (coordinate / h) of node 0. Cells are the
    half-open intervals [c - m/2, c + m/2), so a node exactly half-way belongs
    to the upper centre.
    """
    k = first + np.arange(count)
    return m * np.floor_divide(2 * k + m, 2 * m)


def discretize(field: FieldSample, epsilon: float) -> FieldSample:
    """Piecewise-constant f^eps: each node takes the value at its eps-lattice centre.

    Centres falling outside the extent are clamped to the nearest in-extent centre
    on that axis, so only the outermost half-cell of the grid is affected.
    """
    grid = field.grid
    m = epsilon_steps(grid.pitch, epsilon)
    if not grid.is_origin_aligned():
        raise ConfigurationError("grid origin must be a multiple of the pitch for eps-centres to be nodes")
    fx = round(grid.extent.x0 / grid.pitch)
    fy = round(grid.extent.y0 / grid.pitch)
    idx = []
    for first, count in ((fy, grid.rows), (fx, grid.cols)):
        centres = center_indices(first, count, m)
        lo = m * math.ceil(first / m)
        hi = m * math.floor((first + count - 1) / m)
        if hi < lo:
            raise ConfigurationError("no eps-lattice centre inside the grid extent")
        centres = np.clip(centres, lo, hi)
        idx.append((centres - first).astype(np.intp))
    vals = field.values[np.ix_(idx[0], idx[1])]
    return FieldSample(grid, vals, field.seed, LevelMeta(True, float(epsilon)))


def in_cell_oscillation(field: FieldSample, epsilon: float) -> float:
    """sup over nodes of |f^eps - f| computed by an explicit double loop over cells."""
    grid = field.grid
    m = epsilon_steps(grid.pitch, epsilon)
    fx = round(grid.extent.x0 / grid.pitch)
    fy = round(grid.extent.y0 / grid.pitch)
    cy = center_indices(fy, grid.rows, m)
    cx = center_indices(fx, grid.cols, m)
    best = 0.0
    v = field.values
    for i in range(grid.rows):
        ri = cy[i] - fy
        if not 0 <= ri < grid.rows:
            continue
        for j in range(grid.cols):
            cj = cx[j] - fx
            if not 0 <= cj < grid.cols:
                continue
            best = max(best, abs(v[i, j] - v[ri, cj]))
    return best


def with_values(field: FieldSample, values) -> FieldSample:
    return replace(field, values=np.asarray(values, dtype=float))

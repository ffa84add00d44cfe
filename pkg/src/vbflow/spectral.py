"""Fourier representation of real fields on the doubly periodic square.

Normalization (fixed for the whole package): coefficients are unit-mean
normalized, ``coeff = fft2(values) / N**2`` and ``values = N**2 * ifft2(coeff)``.
With this choice a constant field ``c`` has ``coeff[0, 0] == c`` and Parseval
reads ``sum(values**2) / N**2 == sum(abs(coeff)**2)``.

Coefficient arrays use the standard FFT layout (index ``j`` holds wavenumber
``j`` for ``j < N/2`` and ``j - N`` otherwise).  Physical points are
``x_i = i * L / N``.  The first axis is ``x``, the second ``y``.

Nyquist modes (any ``|k_j| == N/2``) are zeroed by first derivatives and by the
Leray projector; they are never retained by truncation or dealiasing either.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "SpectralError",
    "transform_forward",
    "transform_inverse",
    "gradient",
    "divergence",
    "laplacian",
    "leray_project",
    "truncate",
    "truncate_vector",
    "dealias",
    "inner_product",
    "vector_inner_product",
    "norm",
    "h1_norm",
    "leray_coeffs",
]


class SpectralError(ValueError):
    """Invalid grid, field, or projection request."""


@dataclass(frozen=True)
class Grid:
    """Uniform ``N x N`` grid on the periodic box ``[0, L)^2``."""

    N: int
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise SpectralError(f"points_per_axis must be an even integer >= 8, got {self.N}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise SpectralError(f"box_length must be positive, got {self.L}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dimension(self) -> int:
        return 2

    @property
    def area(self) -> float:
        return self.L * self.L

    @property
    def scale(self) -> float:
        """Physical wavenumber per integer wavenumber, ``2*pi/L``."""
        return 2.0 * np.pi / self.L

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.N) * (self.L / self.N)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return X, Y

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer wave vector components on the coefficient layout."""
        k = np.rint(np.fft.fftfreq(self.N, d=1.0 / self.N)).astype(int)
        KX, KY = np.meshgrid(k, k, indexing="ij")
        return KX, KY

    @cached_property
    def _derivative_multipliers(self) -> tuple[np.ndarray, np.ndarray]:
        KX, KY = self.wavenumbers
        nyq = self.N // 2
        dx = 1j * self.scale * np.where(np.abs(KX) == nyq, 0, KX)
        dy = 1j * self.scale * np.where(np.abs(KY) == nyq, 0, KY)
        return dx, dy

    @cached_property
    def k_squared(self) -> np.ndarray:
        KX, KY = self.wavenumbers
        return (KX**2 + KY**2) * self.scale**2

    @cached_property
    def nyquist(self) -> np.ndarray:
        KX, KY = self.wavenumbers
        nyq = self.N // 2
        return (np.abs(KX) == nyq) | (np.abs(KY) == nyq)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        KX, KY = self.wavenumbers
        return (3 * np.abs(KX) <= self.N) & (3 * np.abs(KY) <= self.N)

    def ball(self, cutoff: int) -> np.ndarray:
        """Boolean mask of the square mode ball ``|k|_inf <= cutoff``."""
        return _ball(self, int(cutoff))

    def check_cutoff(self, cutoff: int) -> int:
        if int(cutoff) != cutoff or cutoff < 0:
            raise SpectralError(f"cutoff index must be a nonnegative integer, got {cutoff}")
        if cutoff > self.N // 2 - 1:
            raise SpectralError(
                f"cutoff index {cutoff} too large for N={self.N} (max {self.N // 2 - 1})"
            )
        return int(cutoff)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft2(values, norm="forward")

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(coeffs, norm="forward").real

    def quadrature(self, values: np.ndarray) -> float:
        """Trapezoidal (spectrally exact for band-limited data) integral over the box."""
        return float(np.sum(values)) * (self.L / self.N) ** 2


_BALLS: dict[tuple[int, float, int], np.ndarray] = {}


def _ball(grid: Grid, cutoff: int) -> np.ndarray:
    key = (grid.N, grid.L, cutoff)
    mask = _BALLS.get(key)
    if mask is None:
        KX, KY = grid.wavenumbers
        mask = (np.abs(KX) <= cutoff) & (np.abs(KY) <= cutoff)
        mask.setflags(write=False)
        _BALLS[key] = mask
    return mask


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A real scalar field held by its (Hermitian) Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.N, self.grid.N):
            raise SpectralError(f"coefficient array has shape {c.shape}, expected {(self.grid.N,) * 2}")
        if c is self.coeffs and not c.flags.writeable:
            return
        object.__setattr__(self, "coeffs", _frozen(c.copy()))

    @classmethod
    def from_physical(cls, values: np.ndarray, grid: Grid) -> "SpectralField":
        return transform_forward(values, grid)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.N, grid.N), dtype=complex))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "SpectralField":
        c = np.zeros((grid.N, grid.N), dtype=complex)
        c[0, 0] = value
        return cls(grid, c)

    @cached_property
    def values(self) -> np.ndarray:
        """Physical-space values on the grid (cached, read-only)."""
        return _frozen(self.grid.inverse(self.coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two-component vector field; both components share one grid."""

    components: tuple[SpectralField, SpectralField]

    def __post_init__(self):
        if len(self.components) != 2:
            raise SpectralError("a VectorField has exactly two components")
        _same_grid(*self.components)
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_coeffs(cls, grid: Grid, cx: np.ndarray, cy: np.ndarray) -> "VectorField":
        return cls((SpectralField(grid, cx), SpectralField(grid, cy)))

    @classmethod
    def from_physical(cls, vx: np.ndarray, vy: np.ndarray, grid: Grid) -> "VectorField":
        return cls((transform_forward(vx, grid), transform_forward(vy, grid)))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls((SpectralField.zeros(grid), SpectralField.zeros(grid)))

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @property
    def x(self) -> SpectralField:
        return self.components[0]

    @property
    def y(self) -> SpectralField:
        return self.components[1]

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField((self.x + other.x, self.y + other.y))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField((self.x - other.x, self.y - other.y))

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField((self.x * scalar, self.y * scalar))

    __rmul__ = __mul__

    def max_divergence(self) -> float:
        return float(np.max(np.abs(divergence(self).values)))

    def max_gradient(self) -> float:
        g = [gradient(c).components for c in self.components]
        return float(max(np.max(np.abs(d.values)) for pair in g for d in pair))

    def is_solenoidal(self, rtol: float = 1e-10) -> bool:
        return self.max_divergence() <= rtol * max(self.max_gradient(), np.finfo(float).tiny)


def _same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise SpectralError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def transform_forward(physical: np.ndarray, grid: Grid) -> SpectralField:
    """Forward transform of a real ``N x N`` array."""
    a = np.asarray(physical)
    if a.shape != (grid.N, grid.N):
        raise SpectralError(f"physical array has shape {a.shape}, expected {(grid.N,) * 2}")
    if np.iscomplexobj(a):
        raise SpectralError("physical values must be real")
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise SpectralError(f"non-finite physical value at index {tuple(int(i) for i in bad)}")
    return SpectralField(grid, grid.forward(a.astype(float)))


def transform_inverse(f: SpectralField) -> np.ndarray:
    return np.array(f.values)


def gradient(f: SpectralField) -> VectorField:
    dx, dy = f.grid._derivative_multipliers
    return VectorField.from_coeffs(f.grid, dx * f.coeffs, dy * f.coeffs)


def divergence(u: VectorField) -> SpectralField:
    dx, dy = u.grid._derivative_multipliers
    return SpectralField(u.grid, dx * u.x.coeffs + dy * u.y.coeffs)


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.k_squared * f.coeffs)


def leray_coeffs(grid: Grid, cx: np.ndarray, cy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leray projection on raw coefficient arrays."""
    KX, KY = grid.wavenumbers
    k2 = (KX**2 + KY**2).astype(float)
    k2[0, 0] = 1.0
    kdotu = (KX * cx + KY * cy) / k2
    px = np.where(grid.nyquist, 0.0, cx - KX * kdotu)
    py = np.where(grid.nyquist, 0.0, cy - KY * kdotu)
    return px, py


def leray_project(u: VectorField) -> VectorField:
    """L2-orthogonal projection onto divergence-free fields."""
    px, py = leray_coeffs(u.grid, u.x.coeffs, u.y.coeffs)
    return VectorField.from_coeffs(u.grid, px, py)


def truncate(f: SpectralField, cutoff_index: int) -> SpectralField:
    """Zero every mode outside ``|k|_inf <= cutoff_index``."""
    m = f.grid.check_cutoff(cutoff_index)
    return SpectralField(f.grid, np.where(f.grid.ball(m), f.coeffs, 0.0))


def truncate_vector(u: VectorField, cutoff_index: int) -> VectorField:
    return VectorField((truncate(u.x, cutoff_index), truncate(u.y, cutoff_index)))


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: zero modes with any ``|k_j| > N/3``."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """``integral f*g dx`` over the box, evaluated by Parseval."""
    grid = _same_grid(f, g)
    return grid.area * float(np.sum((f.coeffs * np.conj(g.coeffs)).real))


def vector_inner_product(u: VectorField, w: VectorField) -> float:
    return inner_product(u.x, w.x) + inner_product(u.y, w.y)


def norm(f: SpectralField | VectorField) -> float:
    """L2 norm over the box."""
    if isinstance(f, VectorField):
        return float(np.sqrt(vector_inner_product(f, f)))
    return float(np.sqrt(inner_product(f, f)))


def h1_norm(f: SpectralField) -> float:
    """``(||f||_2^2 + ||grad f||_2^2)^(1/2)``."""
    return float(np.sqrt(f.grid.area * np.sum(np.abs(f.coeffs) ** 2 * (1.0 + f.grid.k_squared))))

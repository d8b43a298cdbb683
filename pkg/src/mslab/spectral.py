"""Periodic torus grids and Fourier-multiplier operators.

Fields live on a uniform periodic grid with ``n`` points per axis.  Transforms
use the real FFT over the trailing ``dim`` axes with the ``1/n**dim`` factor on
the forward transform, so a coefficient is (up to the half-spectrum storage) the
Fourier-series coefficient of the sampled function.  Every array routine accepts
leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on ``[0, length)**dim``."""

    dim: int
    length: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not _is_power_of_two(int(self.n)) or self.n < 8:
            raise GridError(f"n must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise GridError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumber table ``2*pi*j/L`` in FFT order, j in [-n/2, n/2)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def k_min(self) -> float:
        return 2.0 * np.pi / self.length

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    # --- half-spectrum (rfft) layout -------------------------------------

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @cached_property
    def k_components(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber components in rfft layout."""
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        if self.dim == 1:
            return (kr,)
        kf = self.wavenumbers
        return (kf[:, None], kr[None, :])

    @cached_property
    def k_abs(self) -> np.ndarray:
        k2 = sum(np.broadcast_to(kc, self.spectral_shape) ** 2 for kc in self.k_components)
        return np.sqrt(k2)

    @cached_property
    def k_squared(self) -> np.ndarray:
        return self.k_abs**2

    @cached_property
    def nyquist_masks(self) -> tuple[np.ndarray, ...]:
        """Per-axis boolean masks of the unpaired Nyquist coefficients."""
        shape = self.spectral_shape
        masks = []
        for axis in range(self.dim):
            m = np.zeros(shape, dtype=bool)
            idx = [slice(None)] * self.dim
            idx[axis] = self.n // 2
            m[tuple(idx)] = True
            masks.append(m)
        return tuple(masks)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule box truncation: keep integer modes with |j| <= n/3 on every axis."""
        cutoff = self.n // 3
        keep = np.ones(self.spectral_shape, dtype=bool)
        for kc in self.k_components:
            j = np.rint(np.abs(kc) / self.k_min)
            keep &= np.broadcast_to(j <= cutoff, self.spectral_shape)
        return keep

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each stored rfft coefficient in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        if self.n % 2 == 0:
            w[..., -1] = 1.0
        return w

    # --- array transforms ------------------------------------------------

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values, axes=self.axes, norm="forward")

    def inverse(self, coefficients: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coefficients, s=self.shape, axes=self.axes, norm="forward")

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Rectangle-rule integral over the torus (spectrally accurate)."""
        return np.sum(values, axis=self.axes) * self.cell_volume

    def refined(self, factor: int = 2) -> "TorusGrid":
        return TorusGrid(self.dim, self.length, self.n * factor)

    def scaled(self, lam: float) -> "TorusGrid":
        return TorusGrid(self.dim, self.length * lam, self.n)


def make_grid(dim: int, L: float, n: int) -> TorusGrid:
    return TorusGrid(dim, L, n)


class SpectralField:
    """Real samples on a torus grid together with their Fourier coefficients.

    Either representation may be supplied; the other is computed on first use.
    Instances are treated as immutable.
    """

    __slots__ = ("grid", "_values", "_coefficients")

    def __init__(self, grid: TorusGrid, values=None, coefficients=None):
        if values is None and coefficients is None:
            raise ValueError("need values or coefficients")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=float)
        self._coefficients = None if coefficients is None else np.asarray(coefficients, dtype=complex)
        if self._values is not None and self._values.shape[-grid.dim:] != grid.shape:
            raise GridError(f"values shape {self._values.shape} does not match grid {grid.shape}")

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "SpectralField":
        return cls(grid, values=func(*grid.coordinates))

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "SpectralField":
        return cls(grid, values=np.zeros(grid.shape))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.grid.inverse(self._coefficients)
        return self._values

    @property
    def coefficients(self) -> np.ndarray:
        if self._coefficients is None:
            self._coefficients = self.grid.forward(self._values)
        return self._coefficients

    def full_coefficients(self) -> np.ndarray:
        """Complete (two-sided) coefficient array, for symmetry/Parseval checks."""
        return np.fft.fftn(self.values, axes=self.grid.axes, norm="forward")

    def with_coefficients(self, coefficients) -> "SpectralField":
        return SpectralField(self.grid, coefficients=coefficients)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, values=self.values + other.values)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, values=self.values - other.values)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, values=self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, values=-self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self) -> str:
        return f"SpectralField(dim={self.grid.dim}, n={self.grid.n}, L={self.grid.length:g})"


# ---------------------------------------------------------------------------
# multiplier operators on raw coefficient arrays


def multiplier_symbol(grid: TorusGrid, alpha: float) -> np.ndarray:
    """|k|**alpha in rfft layout, with the zero mode set to 1 for alpha == 0 and 0 otherwise."""
    if alpha < -1:
        raise ValueError(f"alpha must be >= -1, got {alpha}")
    k = grid.k_abs
    symbol = np.zeros_like(k)
    nz = k > 0
    symbol[nz] = k[nz] ** alpha
    if alpha == 0:
        symbol[~nz] = 1.0
    return symbol


def derivative_symbols(grid: TorusGrid) -> tuple[np.ndarray, ...]:
    """i*k_j per axis with the unpaired Nyquist coefficient zeroed."""
    out = []
    for kc, mask in zip(grid.k_components, grid.nyquist_masks):
        s = 1j * np.broadcast_to(kc, grid.spectral_shape).copy()
        s[mask] = 0.0
        out.append(s)
    return tuple(out)


def dealias(grid: TorusGrid, coefficients: np.ndarray) -> np.ndarray:
    return coefficients * grid.dealias_mask


# ---------------------------------------------------------------------------
# field-level operations


def apply_multiplier(field: SpectralField, alpha: float) -> SpectralField:
    """Apply the Fourier multiplier |k|**alpha (|nabla|**alpha)."""
    return field.with_coefficients(field.coefficients * multiplier_symbol(field.grid, alpha))


def gradient(field: SpectralField) -> tuple[SpectralField, ...]:
    c = field.coefficients
    return tuple(field.with_coefficients(c * s) for s in derivative_symbols(field.grid))


def divergence(components) -> SpectralField:
    grid = components[0].grid
    acc = sum(comp.coefficients * s for comp, s in zip(components, derivative_symbols(grid)))
    return SpectralField(grid, coefficients=acc)


def laplacian(field: SpectralField) -> SpectralField:
    return field.with_coefficients(-field.grid.k_squared * field.coefficients)


def poisson_extend(boundary: SpectralField, z: float) -> SpectralField:
    """Bounded harmonic extension to height ``z`` above the plane: multiply by exp(-|k| z).

    The zero mode is unchanged, i.e. the discrete Poisson kernel has unit mass at every height.
    """
    if z < 0:
        raise ValueError(f"extension height must be non-negative, got {z}")
    return boundary.with_coefficients(boundary.coefficients * np.exp(-boundary.grid.k_abs * z))


def l2_inner(a: SpectralField, b: SpectralField) -> float:
    return float(a.grid.integrate(a.values * b.values))


def parseval_sums(field: SpectralField) -> tuple[float, float]:
    """(sum |values|^2 dx^d, L^d * sum |full coefficients|^2); equal by Parseval."""
    g = field.grid
    lhs = float(np.sum(field.values**2) * g.cell_volume)
    rhs = float(g.volume * np.sum(g.half_weights * np.abs(field.coefficients) ** 2))
    return lhs, rhs


def band_limited_random(grid: TorusGrid, rng: np.random.Generator, kmax_index: int = 4,
                        zero_mean: bool = True) -> SpectralField:
    """Random real field with integer wavenumbers |j| <= kmax_index on every axis."""
    c = np.zeros(grid.spectral_shape, dtype=complex)
    keep = np.ones(grid.spectral_shape, dtype=bool)
    for kc in grid.k_components:
        keep &= np.broadcast_to(np.rint(np.abs(kc) / grid.k_min) <= kmax_index, grid.spectral_shape)
    c[keep] = rng.standard_normal(keep.sum()) + 1j * rng.standard_normal(keep.sum())
    values = grid.inverse(c)
    if zero_mean:
        values = values - values.mean()
    return SpectralField(grid, values=values)

"""Linearized Mullins-Sekerka dynamics about the flat interface.

The linear evolution ``h_t = 2 |nabla| Delta h`` is diagonal in Fourier space
with symbol ``exp(-2 |k|^3 t)``; it is integrated exactly.  The same symbol run
backwards from terminal data gives the adjoint evolution.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralField, TorusGrid, derivative_symbols, make_grid, poisson_extend


def linear_rate(grid: TorusGrid) -> np.ndarray:
    """Decay rate 2|k|^3 per coefficient (rfft layout)."""
    return 2.0 * grid.k_abs**3


@dataclass(frozen=True)
class LinearPropagator:
    grid: TorusGrid
    t: float
    symbol: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def build(cls, grid: TorusGrid, t: float) -> "LinearPropagator":
        if t < 0:
            raise ValueError(f"propagation time must be non-negative, got {t}")
        return cls(grid, float(t), np.exp(-linear_rate(grid) * t))

    def __call__(self, field: SpectralField) -> SpectralField:
        return field.with_coefficients(field.coefficients * self.symbol)

    def compose(self, other: "LinearPropagator") -> "LinearPropagator":
        return LinearPropagator(self.grid, self.t + other.t, self.symbol * other.symbol)


def evolve_linear(h0: SpectralField, t: float) -> SpectralField:
    """Exact solution of the linearized flow at time ``t``."""
    if t < 0:
        raise ValueError("evolve_linear needs t >= 0; use adjoint_evolve for backward problems")
    return LinearPropagator.build(h0.grid, t)(h0)


def adjoint_evolve(psi: SpectralField, T: float, t: float) -> SpectralField:
    """Solution u(t) of the dual problem u_t + 2|nabla| Delta u = 0, u(T) = psi."""
    if t > T:
        raise ValueError(f"adjoint time t={t} exceeds terminal time T={T}")
    if t < 0:
        raise ValueError("adjoint time must be non-negative")
    return LinearPropagator.build(psi.grid, T - t)(psi)


def evolve_series(h0: SpectralField, times) -> list[SpectralField]:
    return [evolve_linear(h0, float(t)) for t in times]


# ---------------------------------------------------------------------------
# self-similar kernel profile


@dataclass
class KernelProfile:
    dim: int
    radii: np.ndarray
    values: np.ndarray
    period: float
    mass: float
    tail_change: float
    converged: bool

    def at_origin(self) -> float:
        return float(self.values[0]) if self.radii[0] == 0 else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# dim={self.dim} period={self.period:g} mass={self.mass:.15g} "
                  f"tail_change={self.tail_change:.3e} converged={self.converged}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "G"])
        for r, g in zip(self.radii, self.values):
            w.writerow([f"{r:.10g}", f"{g:.17g}"])
        return buf.getvalue()


_K_CUT = 6.0  # exp(-2 * 6**3) underflows relative to 1


def _profile_on_period(dim: int, radii: np.ndarray, period: float) -> np.ndarray:
    """Periodized profile sum_k exp(-2|k|^3) cos(k r) / P^d along a coordinate axis."""
    dk = 2.0 * np.pi / period
    jmax = int(np.ceil(_K_CUT / dk))
    k = dk * np.arange(-jmax, jmax + 1)
    if dim == 1:
        weights = np.exp(-2.0 * np.abs(k) ** 3)
    else:
        kk = np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
        weights = np.exp(-2.0 * kk**3).sum(axis=0)
    return (np.cos(np.outer(radii, k)) @ weights) / period**dim


def _profile_mass(dim: int, period: float = 64.0, spacing: float = 0.25) -> float:
    """Quadrature of the periodized profile over one period, sampled in physical space."""
    grid = make_grid(dim, period, int(round(period / spacing)))
    values = grid.inverse(np.exp(-2.0 * grid.k_abs**3)) / grid.volume
    return float(grid.integrate(values))


def kernel_profile(d: int, r_max: float = 20.0, n_samples: int = 401,
                   period: float | None = None, tol: float = 1e-4) -> KernelProfile:
    """Tabulate the similarity profile of the linear kernel at t = 1.

    The profile is the inverse transform of exp(-2|k|^3), evaluated as a
    discrete inverse Fourier sum on a large torus of side ``period``.  The
    computation is repeated on a torus of twice the side; the relative change of
    the tail (r >= r_max/4) is reported and must stay below ``tol``.
    """
    if d not in (1, 2):
        raise ValueError("kernel profile implemented for d = 1, 2")
    radii = np.linspace(0.0, r_max, n_samples)
    period = float(period or max(64.0 * r_max, 512.0))
    vals = _profile_on_period(d, radii, period)
    vals2 = _profile_on_period(d, radii, 2.0 * period)
    mass = _profile_mass(d)
    tail = radii >= r_max / 4
    scale = np.max(np.abs(vals2[tail]))
    change = float(np.max(np.abs(vals2[tail] - vals[tail])) / scale) if scale > 0 else 0.0
    return KernelProfile(d, radii, vals2, 2.0 * period, mass, change, change <= tol)


def profile_origin_value(d: int) -> float:
    """G(0) via the radial integral: (1/pi) int_0^inf exp(-2k^3) dk in d = 1,
    (1/2pi) int_0^inf k exp(-2k^3) dk in d = 2."""
    from scipy import integrate

    if d == 1:
        return integrate.quad(lambda k: np.exp(-2 * k**3), 0, np.inf, epsabs=1e-14, epsrel=1e-13)[0] / np.pi
    return integrate.quad(lambda k: k * np.exp(-2 * k**3), 0, np.inf, epsabs=1e-14, epsrel=1e-13)[0] / (2 * np.pi)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    return float(np.polyfit(lx, ly, 1)[0])


def tail_slope(profile: KernelProfile, r_lo: float = 5.0, r_hi: float = 20.0) -> float:
    """Least-squares slope of log|G| against log r on [r_lo, r_hi]."""
    m = (profile.radii >= r_lo) & (profile.radii <= r_hi) & (profile.values != 0)
    return loglog_slope(profile.radii[m], profile.values[m])


# ---------------------------------------------------------------------------
# dual-problem bounds


def _grad_sup(field: SpectralField) -> float:
    c = field.coefficients
    comps = [field.grid.inverse(c * s) for s in derivative_symbols(field.grid)]
    return float(np.max(np.sqrt(sum(g**2 for g in comps))))


def dual_quantities(psi: SpectralField, T: float, t: float = 0.0) -> dict[str, float]:
    """Sup norms of u, grad u, v = -|nabla| u, grad v and d_z grad v at time t."""
    g = psi.grid
    u = adjoint_evolve(psi, T, t)
    v = u.with_coefficients(-g.k_abs * u.coefficients)
    dzv = v.with_coefficients(-g.k_abs * v.coefficients)
    return {
        "u": u.sup(),
        "grad_u": _grad_sup(u),
        "v": v.sup(),
        "grad_v": _grad_sup(v),
        "dz_grad_v": _grad_sup(dzv),
    }


# bound name -> power of (T - t) multiplying the sup norm
BOUND_WEIGHTS = {"u": 0.0, "grad_u": 1 / 3, "v": 1 / 3, "grad_v": 2 / 3, "dz_grad_v": 1.0}


def extension_tail_constant(psi: SpectralField, T: float, radius: float, n_heights: int = 4) -> float:
    """sup |u_bar(x, z)| |(x, z)|^d over points at distance >= radius from the domain centre.

    u_bar is the harmonic extension of u(0); heights z in [0, radius] are sampled.
    """
    g = psi.grid
    u = adjoint_evolve(psi, T, 0.0)
    centre = g.length / 2
    r2 = sum((x - centre) ** 2 for x in g.coordinates)
    best = 0.0
    for z in np.linspace(0.0, radius, n_heights):
        ubar = poisson_extend(u, z).values
        dist = np.sqrt(r2 + z**2)
        mask = dist >= radius
        if mask.any():
            best = max(best, float(np.max(np.abs(ubar[mask]) * dist[mask] ** g.dim)))
    return best


@dataclass
class LinearBoundsReport:
    T_grid: list[float]
    constants: dict[str, list[float]]
    variation: dict[str, float]
    bounded: dict[str, bool]

    def rows(self):
        for name, vals in self.constants.items():
            yield name, vals, self.variation[name], self.bounded[name]


def verify_linear_bounds(psis, T_grid, tail_radius: float | None = None,
                         max_variation: float = 2.0) -> LinearBoundsReport:
    """Empirical constants of the dual-problem sup-norm bounds over a family of terminal data.

    For each T the constant of a bound is ``sup_psi (T)^w ||.||_inf / ||psi||_inf``
    evaluated at t = 0.  A bound counts as bounded when its constants are finite
    and vary by at most ``max_variation`` across the T grid.
    """
    names = list(BOUND_WEIGHTS) + (["tail"] if tail_radius is not None else [])
    consts: dict[str, list[float]] = {n: [] for n in names}
    for T in T_grid:
        best = dict.fromkeys(names, 0.0)
        for psi in psis:
            norm = psi.sup()
            if norm == 0:
                continue
            q = dual_quantities(psi, T)
            for name, w in BOUND_WEIGHTS.items():
                best[name] = max(best[name], T**w * q[name] / norm)
            if tail_radius is not None:
                best["tail"] = max(best["tail"], extension_tail_constant(psi, T, tail_radius) / norm)
        for name in names:
            consts[name].append(best[name])
    variation, bounded = {}, {}
    for name, vals in consts.items():
        arr = np.asarray(vals)
        if np.all(arr == 0):
            variation[name] = 1.0
        elif np.any(arr == 0):
            variation[name] = float("inf")
        else:
            variation[name] = float(arr.max() / arr.min())
        bounded[name] = bool(np.all(np.isfinite(arr)) and variation[name] <= max_variation)
    return LinearBoundsReport(list(map(float, T_grid)), consts, variation, bounded)


# ---------------------------------------------------------------------------
# decay experiments


def gap_guard_limit(grid: TorusGrid, threshold: float = 0.04) -> float:
    """Largest t with 2 k_min^3 t <= threshold."""
    return threshold / (2.0 * grid.k_min**3)


def gaussian_bump(grid: TorusGrid, amplitude: float = 1.0, width: float = 1.0, centre=None) -> SpectralField:
    c = grid.length / 2 if centre is None else centre
    r2 = sum((x - c) ** 2 for x in grid.coordinates)
    return SpectralField(grid, values=amplitude * np.exp(-r2 / (2 * width**2)))


def linear_decay_series(h0: SpectralField, times) -> dict[str, np.ndarray]:
    """sup |h| and sup |grad h| along the exact linear evolution."""
    sup_h, sup_grad = [], []
    for t in times:
        h = evolve_linear(h0, float(t))
        sup_h.append(h.sup())
        sup_grad.append(_grad_sup(h))
    return {"t": np.asarray(times, float), "h_inf": np.asarray(sup_h), "grad_inf": np.asarray(sup_grad)}


def default_linear_grid(dim: int) -> TorusGrid:
    return make_grid(1, 200.0, 4096) if dim == 1 else make_grid(2, 100.0, 512)

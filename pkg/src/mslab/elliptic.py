"""Two-phase harmonic extension of the curvature for a periodic graph in d = 1.

Each phase is flattened by z' = z - h(x) (|z'| <= Z), which turns the Laplace
equation into ``div(A grad F) = 0`` with ``A = [[1, -h'], [-h', 1 + h'^2]]``
(the map has unit Jacobian).  The vertical coordinate is further stretched,
z' = phi(s) with s in [0, 1], so levels cluster at the interface.  Second-order
finite differences are used laterally (periodic) and in s; F = H on the
interface and dF/ds = 0 on the cap |z'| = Z.

The lower phase is the mirror problem: with w = -z', its equation is the upper
one for -h, so a single half-strip solver serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import check_lipschitz, curvature
from .spectral import SpectralField, TorusGrid


class EllipticSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class VerticalGrid:
    """Exponentially stretched levels z = Z (exp(beta s) - 1) / (exp(beta) - 1)."""

    height: float
    levels: int
    beta: float

    @property
    def ds(self) -> float:
        return 1.0 / self.levels

    def s(self, offset: float = 0.0) -> np.ndarray:
        return (np.arange(self.levels + 1) + offset) * self.ds

    def z(self) -> np.ndarray:
        s = self.s()
        if self.beta == 0:
            return self.height * s
        return self.height * np.expm1(self.beta * s) / np.expm1(self.beta)

    def dz_ds(self, s: np.ndarray) -> np.ndarray:
        if self.beta == 0:
            return np.full_like(s, self.height)
        return self.height * self.beta * np.exp(self.beta * s) / np.expm1(self.beta)

    @property
    def first_spacing(self) -> float:
        return float(self.z()[1])


def default_vertical(grid: TorusGrid, height_factor: float = 4.0, levels: int | None = None,
                     beta: float | None = None) -> VerticalGrid:
    """Strip of height ``height_factor * L`` with the first level near half a lateral spacing."""
    if height_factor < 2.0:
        raise ValueError(f"strip height must be at least 2L, got {height_factor:g} L")
    Z = height_factor * grid.length
    M = levels or max(16, grid.n // 2)
    if beta is None:
        beta = stretch_for_spacing(Z, M, 0.5 * grid.dx)
    return VerticalGrid(Z, M, beta)


def stretch_for_spacing(Z: float, M: int, first: float) -> float:
    """Stretching parameter giving a first spacing of roughly ``first``."""
    from scipy.optimize import brentq

    target = first * M / Z
    if target >= 1.0:
        return 0.0
    return float(brentq(lambda b: b / np.expm1(b) - target, 1e-8, 200.0))


@dataclass
class TwoPhaseField:
    """Potential on both flattened half-strips; row 0 is the interface."""

    grid: TorusGrid
    vertical: VerticalGrid
    f_plus: np.ndarray = field(repr=False)
    f_minus: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def height(self) -> float:
        return self.vertical.height


@dataclass
class VelocityField:
    V: SpectralField
    source: str
    mean: float = 0.0


def _half_strip_matrix(n: int, dx: float, vg: VerticalGrid, hx: np.ndarray, hxx: np.ndarray):
    """Sparse operator on unknowns F[j, i], j = 1..M (row-major), plus interface coupling.

    Returns (A, B) such that A @ F_interior = -B @ F_interface.
    """
    M, ds = vg.levels, vg.ds
    s = vg.s()
    a = vg.dz_ds(s)                      # phi' at nodes
    a_half = vg.dz_ds(s[:-1] + 0.5 * ds)  # phi' at j + 1/2, j = 0..M-1
    q = 1.0 + hx**2

    rows, cols, vals = [], [], []
    brows, bcols, bvals = [], [], []
    i = np.arange(n)
    ip, im = (i + 1) % n, (i - 1) % n

    def idx(j, ii):
        return (j - 1) * n + ii

    def add(j, jj, ii_target, coeff):
        # coefficient multiplying F[jj, ii_target] in the equation at (j, i)
        r = idx(j, i)
        if jj == 0:
            brows.append(r); bcols.append(ii_target); bvals.append(coeff)
            return
        rows.append(r); cols.append(idx(jj, ii_target)); vals.append(coeff)

    for j in range(1, M + 1):
        cxx = np.full(n, a[j] / dx**2)
        up = 1.0 / a_half[j] if j < M else 1.0 / a_half[M - 1]
        dn = 1.0 / a_half[j - 1]
        cup = q * up / ds**2
        cdn = q * dn / ds**2
        c1 = -hxx / (2 * ds)
        cx = -2.0 * hx / (4 * dx * ds)
        add(j, j, i, -2 * cxx - cup - cdn)
        add(j, j, ip, cxx)
        add(j, j, im, cxx)
        if j < M:
            add(j, j + 1, i, cup + c1)
            add(j, j - 1, i, cdn - c1)
            add(j, j + 1, ip, cx)
            add(j, j - 1, ip, -cx)
            add(j, j + 1, im, -cx)
            add(j, j - 1, im, cx)
        else:
            # mirror: F_{M+1} = F_{M-1}; first-derivative terms vanish
            add(j, j - 1, i, cup + cdn)

    N = n * M
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    B = sp.csc_matrix((np.concatenate(bvals), (np.concatenate(brows), np.concatenate(bcols))), shape=(N, n))
    return A, B


def solve_half_strip(grid: TorusGrid, vg: VerticalGrid, hx: np.ndarray, hxx: np.ndarray,
                     boundary: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve one flattened phase; returns F with shape (M + 1, n) and the max residual."""
    n = grid.n
    A, B = _half_strip_matrix(n, grid.dx, vg, hx, hxx)
    rhs = -(B @ boundary)
    try:
        lu = spla.splu(A)
        x = lu.solve(rhs)
    except RuntimeError as exc:  # singular factor
        raise EllipticSolveError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise EllipticSolveError("non-finite solution of the flattened Laplace problem")
    res = float(np.max(np.abs(A @ x - rhs))) if rhs.size else 0.0
    F = np.empty((vg.levels + 1, n))
    F[0] = boundary
    F[1:] = x.reshape(vg.levels, n)
    return F, res


def _normal_derivative(F: np.ndarray, vg: VerticalGrid) -> np.ndarray:
    """dF/dz' at the interface by the second-order one-sided formula in s."""
    ds = vg.ds
    Fs = (-3 * F[0] + 4 * F[1] - F[2]) / (2 * ds)
    return Fs / vg.dz_ds(np.zeros(1))[0]


def _dirichlet_energy(F: np.ndarray, vg: VerticalGrid, dx: float, hx: np.ndarray) -> float:
    """Jacobian-weighted integral of |grad f|^2 over one half-strip."""
    s = vg.s()
    a = vg.dz_ds(s)[:, None]
    Fx = (np.roll(F, -1, axis=1) - np.roll(F, 1, axis=1)) / (2 * dx)
    Fs = np.gradient(F, vg.ds, axis=0, edge_order=2)
    Fz = Fs / a
    dens = ((Fx - hx[None, :] * Fz) ** 2 + Fz**2) * a
    return float(np.trapezoid(dens.sum(axis=1) * dx, dx=vg.ds))


def elliptic_velocity(h: SpectralField, boundary: SpectralField | None = None,
                      vertical: VerticalGrid | None = None, height_factor: float = 4.0,
                      check: bool = True):
    """Normal velocity from the two-phase harmonic extension of the curvature (d = 1).

    Returns ``(field, velocity, D)`` where D is the Dirichlet energy of the
    potential over both strips.  ``boundary`` overrides the interface data
    (default: the curvature of h).
    """
    grid = h.grid
    if grid.dim != 1:
        raise ValueError("the flattened elliptic solve is implemented for d = 1 only")
    vg = vertical or default_vertical(grid, height_factor)
    if vg.height < 2 * grid.length:
        raise ValueError(f"strip height {vg.height:g} below 2L = {2 * grid.length:g}")
    c = h.coefficients
    kx = grid.k_components[0]
    ikx = 1j * kx.copy()
    ikx[-1] = 0.0
    hx = grid.inverse(c * ikx)
    hxx = grid.inverse(-(kx**2) * c)
    if check:
        check_lipschitz(float(np.max(np.abs(hx))))
    H = curvature(h, check=False).values if boundary is None else boundary.values

    Fp, rp = solve_half_strip(grid, vg, hx, hxx, H)
    Fm, rm = solve_half_strip(grid, vg, -hx, -hxx, H)
    jump = _normal_derivative(Fp, vg) + _normal_derivative(Fm, vg)
    V = -np.sqrt(1.0 + hx**2) * jump
    D = _dirichlet_energy(Fp, vg, grid.dx, hx) + _dirichlet_energy(Fm, vg, grid.dx, -hx)
    Vf = SpectralField(grid, values=V)
    # mass balance diagnostic: int sqrt(1+h'^2) V dx vanishes for the exact problem
    mean = float(grid.integrate(np.sqrt(1.0 + hx**2) * V) / grid.volume)
    two = TwoPhaseField(grid, vg, Fp, Fm, residual=max(rp, rm))
    return two, VelocityField(Vf, "elliptic", mean), D

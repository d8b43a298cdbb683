"""Randomized checks of interpolation inequalities on periodic grids.

For each inequality ``LHS <= C * RHS`` the lab samples admissible fields,
evaluates the ratio LHS/RHS and reports its maximum over the ensemble together
with the change of that ratio when the maximizing sample is re-evaluated on a
grid of twice the resolution.  Constants are never asserted; acceptance is
finiteness plus refinement stability.

Sample i of an ensemble with root seed s draws from
``np.random.default_rng(np.random.SeedSequence([s, i]))``, so reports do not
depend on how the ensemble is partitioned.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .graph import curvature_coefficients
from .spectral import SpectralField, TorusGrid, derivative_symbols, make_grid, multiplier_symbol

REPORT_COLUMNS = ("inequality_id", "n_samples", "max_ratio", "argmax_seed", "doubling_drift")


class InequalityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SampleSpec:
    grid: TorusGrid
    gamma: float | None = None  # None: drawn per sample from [gamma_lo, gamma_hi]
    seed: int = 0
    lip_target: float = 1.0
    zero_mean: bool = True
    gamma_lo: float = 0.5
    gamma_hi: float = 3.0

    @property
    def dim(self) -> int:
        return self.grid.dim


def sample_rng(root: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root), int(index)]))


def _envelope(grid: TorusGrid, gamma: float) -> np.ndarray:
    return multiplier_symbol(grid, -1.0) ** gamma * grid.dealias_mask


def _grad_components(grid: TorusGrid, coeffs: np.ndarray) -> list[np.ndarray]:
    return [grid.inverse(coeffs * s) for s in derivative_symbols(grid)]


def _lip(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    g2 = sum(q**2 for q in _grad_components(grid, coeffs))
    return np.sqrt(np.max(g2, axis=grid.axes))


def sample_batch(spec: SampleSpec, indices) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (batch, spectral shape) and gammas for the given sample indices."""
    g = spec.grid
    idx = list(indices)
    coeffs = np.empty((len(idx),) + g.spectral_shape, dtype=complex)
    gammas = np.empty(len(idx))
    for j, i in enumerate(idx):
        rng = sample_rng(spec.seed, i)
        gamma = spec.gamma if spec.gamma is not None else rng.uniform(spec.gamma_lo, spec.gamma_hi)
        noise = rng.standard_normal(g.spectral_shape) + 1j * rng.standard_normal(g.spectral_shape)
        c = noise * _envelope(g, gamma)
        if spec.zero_mean:
            c.flat[0] = 0.0
        coeffs[j] = c
        gammas[j] = gamma
    # real-field projection of the half spectrum
    coeffs = g.forward(g.inverse(coeffs))
    lip = _lip(g, coeffs)
    scale = np.where(lip > 0, spec.lip_target / np.where(lip > 0, lip, 1.0), 0.0)
    return coeffs * scale.reshape((-1,) + (1,) * g.dim), gammas


def sample_field(spec: SampleSpec, index: int = 0) -> SpectralField:
    """One random field: Gaussian coefficients with envelope |k|^-gamma, band-limited, rescaled to the Lipschitz target."""
    c, _ = sample_batch(spec, [index])
    return SpectralField(spec.grid, coefficients=c[0])


def refine(grid: TorusGrid, coeffs: np.ndarray, factor: int = 2) -> tuple[TorusGrid, np.ndarray]:
    """Exact spectral interpolation of coefficient arrays onto a grid with ``factor`` times the points."""
    fine = grid.refined(factor)
    n, m = grid.n, fine.n
    out = np.zeros(coeffs.shape[:-grid.dim] + fine.spectral_shape, dtype=complex)
    half = n // 2
    if grid.dim == 1:
        out[..., :half] = coeffs[..., :half]
    else:
        out[..., :half, :half] = coeffs[..., :half, :half]
        out[..., m - half + 1:, :half] = coeffs[..., half + 1:, :half]
    # unpaired Nyquist entries are dropped (zero for dealiased samples)
    return fine, out


# ---------------------------------------------------------------------------
# batched norms (leading axis = sample)


def _integ(grid: TorusGrid, vals: np.ndarray) -> np.ndarray:
    return np.sum(vals, axis=grid.axes) * grid.cell_volume


def lp_norm(grid: TorusGrid, vals: np.ndarray, p: float) -> np.ndarray:
    if math.isinf(p):
        return np.max(np.abs(vals), axis=grid.axes)
    return _integ(grid, np.abs(vals) ** p) ** (1.0 / p)


def grad_norm(grid: TorusGrid, coeffs: np.ndarray, p: float) -> np.ndarray:
    mag = np.sqrt(sum(q**2 for q in _grad_components(grid, coeffs)))
    return lp_norm(grid, mag, p)


def hessian_norm(grid: TorusGrid, coeffs: np.ndarray, p: float) -> np.ndarray:
    syms = derivative_symbols(grid)
    tot = 0.0
    for i, a in enumerate(syms):
        for j, b in enumerate(syms):
            tot = tot + grid.inverse(coeffs * a * b) ** 2
    return lp_norm(grid, np.sqrt(tot), p)


def half_norm_sq(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    w = grid.half_weights * grid.k_abs
    return grid.volume * np.sum(w * np.abs(coeffs) ** 2, axis=grid.axes)


def square_coefficients(grid: TorusGrid, coeffs: np.ndarray) -> tuple[TorusGrid, np.ndarray]:
    """Coefficients of the pointwise square, computed on a doubled grid (alias-free for dealiased input)."""
    fine, c = refine(grid, coeffs, 2)
    v = fine.inverse(c)
    return fine, fine.forward(v * v)


def energy_b(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    g2 = sum(q**2 for q in _grad_components(grid, coeffs))
    return _integ(grid, g2 / (np.sqrt(1.0 + g2) + 1.0))


def dissipation_b(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    Hc = curvature_coefficients(grid, coeffs, check=False)
    return 2.0 * half_norm_sq(grid, Hc)


# ---------------------------------------------------------------------------
# inequality catalogue


def _eed(grid, c, **_):
    d = grid.dim
    E = energy_b(grid, c)
    V = lp_norm(grid, grid.inverse(c), 1)
    D = dissipation_b(grid, c)
    return E, V ** (6.0 / (d + 5)) * D ** ((d + 2.0) / (d + 5))


def _gns_i(grid, c, p=4.0, **_):
    v = grid.inverse(c)
    return lp_norm(grid, v, np.inf), lp_norm(grid, v, 2) ** ((p - 2) / (2 * (p - 1))) * grad_norm(grid, c, p) ** (p / (2 * (p - 1)))


def _gns_ii(grid, c, **_):
    d = grid.dim
    v = grid.inverse(c)
    return lp_norm(grid, v, 2), lp_norm(grid, v, 1) ** (2.0 / (d + 2)) * grad_norm(grid, c, 2) ** (d / (d + 2.0))


def _gns_iii(grid, c, **_):
    d = grid.dim
    v = grid.inverse(c)
    return grad_norm(grid, c, 2), lp_norm(grid, v, 1) ** (2.0 / (d + 4)) * hessian_norm(grid, c, 2) ** ((d + 2.0) / (d + 4))


def _gns_iv(grid, c, **_):
    v = grid.inverse(c)
    return lp_norm(grid, v, np.inf), (lp_norm(grid, v, 1) ** 0.2 * grad_norm(grid, c, 2) ** 0.4
                                      * grad_norm(grid, c, np.inf) ** 0.4)


def _gns_iv_1d(grid, c, **_):
    v = grid.inverse(c)
    return lp_norm(grid, v, np.inf), lp_norm(grid, v, 1) ** (1 / 3) * grad_norm(grid, c, 2) ** (2 / 3)


def _gns_v(grid, c, q=4.0, **_):
    v = grid.inverse(c)
    return lp_norm(grid, v, q), lp_norm(grid, v, 2) ** (2.0 / q) * grad_norm(grid, c, 2) ** ((q - 2.0) / q)


def _v2(grid, c, **_):
    fine, sq = square_coefficients(grid, c)
    v = grid.inverse(c)
    return half_norm_sq(fine, sq), lp_norm(grid, v, 6) ** 3 * grad_norm(grid, c, 2)


@dataclass(frozen=True)
class Inequality:
    ident: str
    dims: tuple[int, ...]
    func: object
    needs_graph: bool = False


CATALOGUE = {
    "eed": Inequality("eed", (1, 2), _eed, True),
    "i": Inequality("i", (2,), _gns_i),
    "ii": Inequality("ii", (1, 2), _gns_ii),
    "iii": Inequality("iii", (1, 2), _gns_iii),
    "iv": Inequality("iv", (2,), _gns_iv),
    "iv_1d": Inequality("iv_1d", (1,), _gns_iv_1d),
    "v": Inequality("v", (2,), _gns_v),
    "v2": Inequality("v2", (1, 2), _v2),
}
GNS_ITEMS = ("i", "ii", "iii", "iv", "iv_1d", "v")


def ratios(ident: str, grid: TorusGrid, coeffs: np.ndarray, **params) -> np.ndarray:
    """LHS/RHS per sample; NaN marks degenerate samples (both sides zero or RHS zero)."""
    ineq = CATALOGUE[ident]
    if grid.dim not in ineq.dims:
        raise InequalityError(f"inequality {ident!r} is defined for d in {ineq.dims}, got d = {grid.dim}")
    lhs, rhs = ineq.func(grid, np.asarray(coeffs), **params)
    lhs, rhs = np.atleast_1d(lhs), np.atleast_1d(rhs)
    out = np.full(lhs.shape, np.nan)
    ok = rhs > 0
    out[ok] = lhs[ok] / rhs[ok]
    return out


def ratio_of_field(ident: str, field: SpectralField, **params) -> float:
    return float(ratios(ident, field.grid, field.coefficients[None], **params)[0])


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class InequalityReport:
    inequality_id: str
    n_samples: int
    max_ratio: float
    argmax_seed: int
    doubling_drift: float
    skipped: int = 0
    rechecked: int = 0
    median_ratio: float = float("nan")
    dim: int = 0
    params: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.max_ratio) and np.isfinite(self.doubling_drift))

    def row(self) -> list:
        return [self.inequality_id, self.n_samples, self.max_ratio, self.argmax_seed, self.doubling_drift]


def run_ensemble(ident: str, spec: SampleSpec, n_samples: int, batch: int = 256,
                 outlier_factor: float = 10.0, **params) -> InequalityReport:
    """Evaluate an inequality over ``n_samples`` seeded samples.

    A ratio exceeding ``outlier_factor`` times the running median is re-evaluated
    on the doubled grid before it is accepted.
    """
    grid = spec.grid
    values = np.full(n_samples, np.nan)
    rechecked = 0
    for start in range(0, n_samples, batch):
        idx = range(start, min(start + batch, n_samples))
        c, _ = sample_batch(spec, idx)
        r = ratios(ident, grid, c, **params)
        done = values[:start]
        pool = done if np.any(np.isfinite(done)) else r
        med = np.nanmedian(pool) if np.any(np.isfinite(pool)) else np.inf
        for j in np.nonzero(np.isfinite(r) & (r > outlier_factor * med))[0]:
            fine, cf = refine(grid, c[j:j + 1])
            r[j] = ratios(ident, fine, cf, **params)[0]
            rechecked += 1
        values[start:start + len(r)] = r
    finite = np.isfinite(values)
    skipped = int(n_samples - finite.sum())
    if not finite.any():
        return InequalityReport(ident, n_samples, float("nan"), -1, float("nan"), skipped, rechecked,
                                dim=grid.dim, params=params)
    arg = int(np.nanargmax(values))
    best = float(values[arg])
    c, _ = sample_batch(spec, [arg])
    fine, cf = refine(grid, c)
    fine_ratio = float(ratios(ident, fine, cf, **params)[0])
    coarse_ratio = float(ratios(ident, grid, c, **params)[0])
    drift = abs(fine_ratio - coarse_ratio) / coarse_ratio
    return InequalityReport(ident, n_samples, best, arg, drift, skipped, rechecked,
                            float(np.nanmedian(values)), grid.dim, dict(params))


def default_sample_grid(dim: int) -> TorusGrid:
    return make_grid(1, 2 * np.pi, 64) if dim == 1 else make_grid(2, 2 * np.pi, 32)


def check_eed(spec: SampleSpec, n_samples: int = 10_000, **kw) -> InequalityReport:
    return run_ensemble("eed", spec, n_samples, **kw)


def check_gns(item: str, spec: SampleSpec, n_samples: int = 1000, **params) -> InequalityReport:
    if item not in GNS_ITEMS:
        raise InequalityError(f"unknown GNS item {item!r}; expected one of {GNS_ITEMS}")
    if item == "i":
        params.setdefault("p", 4.0)
        if not params["p"] > 2:
            raise InequalityError("item i needs p > 2")
    if item == "v":
        params.setdefault("q", 4.0)
        if not params["q"] >= 2:
            raise InequalityError("item v needs q >= 2")
    return run_ensemble(item, spec, n_samples, **params)


def check_v2(spec: SampleSpec, n_samples: int = 1000, **kw) -> InequalityReport:
    if not spec.zero_mean:
        raise InequalityError("the V^2 estimate is checked on zero-mean samples")
    return run_ensemble("v2", spec, n_samples, **kw)


def eed_elliptic_spot(spec: SampleSpec, n_samples: int = 8) -> InequalityReport:
    """d = 1 spot check of the interpolation estimate with D from the two-phase elliptic solve."""
    from .elliptic import elliptic_velocity
    from .functionals import energy, excess_mass

    grid = spec.grid
    if grid.dim != 1:
        raise InequalityError("elliptic spot checks are d = 1 only")
    c, _ = sample_batch(spec, range(n_samples))
    vals = []
    for j in range(n_samples):
        h = SpectralField(grid, coefficients=c[j])
        D = elliptic_velocity(h, check=False)[2]
        vals.append(energy(h) / (excess_mass(h) ** 1.0 * D ** 0.5))
    vals = np.asarray(vals)
    arg = int(np.argmax(vals))
    return InequalityReport("eed_elliptic", n_samples, float(vals[arg]), arg, float("nan"), dim=1)


# ---------------------------------------------------------------------------
# time integral


@dataclass
class TintRow:
    a: float
    b: float
    T: float
    integral: float
    ratio: float
    beta: float

    @property
    def error(self) -> float:
        return abs(self.ratio - self.beta) / self.beta


def time_integral(a: float, b: float, T: float) -> float:
    """Integral over (0, T) of (T - t)^-a t^-b, with both endpoint singularities removed by substitution."""
    if not (0 < a < 1 and 0 < b < 1):
        raise InequalityError(f"need 0 < a, b < 1, got a = {a}, b = {b}")

    def half(alpha, beta):
        # int_0^{T/2} s^-alpha (T - s)^-beta ds with s = u^{1/(1-alpha)}
        k = 1.0 / (1.0 - alpha)
        upper = (T / 2) ** (1.0 - alpha)
        val, _ = integrate.quad(lambda u: (T - u**k) ** (-beta), 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=200)
        return k * val

    return half(b, a) + half(a, b)


def check_tint(a_grid, b_grid, T_grid) -> list[TintRow]:
    rows = []
    for a in a_grid:
        for b in b_grid:
            if a + b < 1:
                raise InequalityError(f"a + b = {a + b:g} < 1 is outside the admissible range a + b >= 1")
            ref = float(special.beta(1.0 - a, 1.0 - b))
            for T in T_grid:
                val = time_integral(a, b, T)
                rows.append(TintRow(a, b, T, val, val / T ** (1.0 - a - b), ref))
    return rows


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([r.inequality_id, r.n_samples, f"{r.max_ratio:.12g}", r.argmax_seed, f"{r.doubling_drift:.6g}"])
    return buf.getvalue()

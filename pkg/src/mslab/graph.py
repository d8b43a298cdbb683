"""Geometry of a periodic graph interface z = h(x).

Orientation: the positive phase lies above the graph and the normal points into
it, so the mean curvature ``H = div(grad h / sqrt(1 + |grad h|^2))`` is positive
where the positive phase is convex and reduces to ``Delta h`` for small slopes.
"""

from __future__ import annotations

import numpy as np

from .spectral import SpectralField, TorusGrid, dealias, derivative_symbols

LIP_TOL = 1e-12


class LipschitzError(RuntimeError):
    """Raised when an interface leaves the graph regime ``|grad h| <= bound``."""


def slopes(grid: TorusGrid, coefficients: np.ndarray) -> list[np.ndarray]:
    """Spectral gradient components of h as physical arrays."""
    return [grid.inverse(coefficients * s) for s in derivative_symbols(grid)]


def lipschitz(grid: TorusGrid, coefficients: np.ndarray) -> np.ndarray:
    """Grid sup of |grad h| (reduces over the trailing grid axes)."""
    g2 = sum(g**2 for g in slopes(grid, coefficients))
    return np.sqrt(np.max(g2, axis=grid.axes))


def check_lipschitz(lip: float, bound: float = 1.0) -> None:
    if not np.all(np.asarray(lip) <= bound * (1 + LIP_TOL)):
        raise LipschitzError(f"|grad h|_inf = {np.max(lip):.6g} exceeds the graph bound {bound:g}")


def curvature_coefficients(grid: TorusGrid, coefficients: np.ndarray, check: bool = True,
                           bound: float = 1.0) -> np.ndarray:
    """Dealiased Fourier coefficients of the mean curvature of the graph of h."""
    grads = slopes(grid, coefficients)
    g2 = sum(g**2 for g in grads)
    if check:
        check_lipschitz(np.sqrt(np.max(g2, axis=grid.axes)), bound)
    w = 1.0 / np.sqrt(1.0 + g2)
    out = 0
    for g, s in zip(grads, derivative_symbols(grid)):
        out = out + dealias(grid, grid.forward(g * w)) * s
    return out


def curvature(h: SpectralField, check: bool = True, bound: float = 1.0) -> SpectralField:
    return SpectralField(h.grid, coefficients=curvature_coefficients(h.grid, h.coefficients, check, bound))


def curvature_1d_pointwise(hx, hxx):
    """h'' / (1 + h'^2)^{3/2}: the d = 1 curvature from pointwise derivatives."""
    hx = np.asarray(hx, float)
    return np.asarray(hxx, float) / (1.0 + hx**2) ** 1.5


def curvature_2d_pointwise(hx, hy, hxx, hxy, hyy):
    """Non-divergence form of the graph curvature in d = 2."""
    q = 1.0 + hx**2 + hy**2
    return (hxx + hyy - (hxx * hx**2 + 2 * hxy * hx * hy + hyy * hy**2) / q) / np.sqrt(q)


def metric_factor(grid: TorusGrid, coefficients: np.ndarray) -> np.ndarray:
    """sqrt(1 + |grad h|^2), the surface-measure density."""
    return np.sqrt(1.0 + sum(g**2 for g in slopes(grid, coefficients)))

"""Monitored quantities of a graph interface and the per-time ledger row.

All integrals are grid quadratures on the flat torus; quantities that live on
the interface carry the surface-measure density sqrt(1 + |grad h|^2).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

from .graph import check_lipschitz, curvature, lipschitz, slopes
from .spectral import SpectralField, derivative_symbols

LEDGER_COLUMNS = ("t", "E", "D", "D_source", "Vmass", "lip", "dimless", "signed_mass", "h_inf")


def _slope_sq(h: SpectralField) -> np.ndarray:
    return sum(g**2 for g in slopes(h.grid, h.coefficients))


def energy(h: SpectralField) -> float:
    """Excess area: integral of sqrt(1 + |grad h|^2) - 1, written without cancellation."""
    g2 = _slope_sq(h)
    return float(h.grid.integrate(g2 / (np.sqrt(1.0 + g2) + 1.0)))


def dirichlet_half(h: SpectralField) -> float:
    """0.5 * ||grad h||_2^2, the small-slope limit of the energy."""
    return 0.5 * float(h.grid.integrate(_slope_sq(h)))


def excess_mass(h: SpectralField) -> float:
    return float(h.grid.integrate(np.abs(h.values)))


def signed_mass(h: SpectralField) -> float:
    return float(h.grid.integrate(h.values))


def half_norm_sq(field: SpectralField) -> float:
    """Homogeneous H^{1/2} seminorm squared: integral of f |nabla| f."""
    g = field.grid
    return float(g.volume * np.sum(g.half_weights * g.k_abs * np.abs(field.coefficients) ** 2))


def dissipation_surrogate(h: SpectralField, H: SpectralField | None = None) -> float:
    """2 * ||H||^2 in the flat H^{1/2} norm: the dissipation of a flat two-sided extension."""
    if H is None:
        H = curvature(h, check=False)
    return 2.0 * half_norm_sq(H)


def hessian_components(h: SpectralField) -> list[np.ndarray]:
    syms = derivative_symbols(h.grid)
    c = h.coefficients
    return [h.grid.inverse(c * a * b) for i, a in enumerate(syms) for b in syms[i:]]


def _hessian_frobenius(h: SpectralField) -> np.ndarray:
    comps = hessian_components(h)
    if h.grid.dim == 1:
        return np.abs(comps[0])
    hxx, hxy, hyy = comps
    return np.sqrt(hxx**2 + 2 * hxy**2 + hyy**2)


@dataclass(frozen=True)
class CurvatureNorms:
    H_L2: float
    H_L4: float
    hess_L2: float
    hess_Lp: float
    p: float


def curvature_norms(h: SpectralField, p: float = 4.0) -> CurvatureNorms:
    """Interface norms of H (surface measure) and flat norms of the Hessian of h."""
    g = h.grid
    H = curvature(h, check=False).values
    w = np.sqrt(1.0 + _slope_sq(h))
    hess = _hessian_frobenius(h)
    return CurvatureNorms(
        H_L2=float(np.sqrt(g.integrate(H**2 * w))),
        H_L4=float(g.integrate(H**4 * w) ** 0.25),
        hess_L2=float(np.sqrt(g.integrate(hess**2))),
        hess_Lp=float(g.integrate(hess**p) ** (1.0 / p)),
        p=p,
    )


def dimensionless(E: float, D: float, d: int) -> float:
    """E^(3-d) D^d, invariant under the parabolic scaling."""
    return float(E ** (3 - d) * D**d)


def eed_ratio(E: float, Vmass: float, D: float, d: int) -> float:
    """E / (Vmass^(6/(d+5)) D^((d+2)/(d+5)))."""
    return float(E / (Vmass ** (6.0 / (d + 5)) * D ** ((d + 2.0) / (d + 5))))


@dataclass
class FunctionalRecord:
    t: float
    E: float
    D: float
    D_source: str
    Vmass: float
    lip: float
    dimless: float
    signed_mass: float
    h_inf: float

    def row(self) -> list:
        return [getattr(self, c) for c in LEDGER_COLUMNS]


def record(h: SpectralField, t: float, scheme: str = "flat_dtn", d_value: float | None = None,
           check: bool = True) -> FunctionalRecord:
    """Assemble one ledger row.

    ``d_value`` passes in a dissipation computed elsewhere (e.g. by the stepper);
    otherwise it is computed from ``scheme``.
    """
    grid = h.grid
    lip = float(lipschitz(grid, h.coefficients))
    if check:
        check_lipschitz(lip)
    if scheme == "elliptic":
        source = "elliptic"
        if d_value is None:
            from .elliptic import elliptic_velocity

            d_value = elliptic_velocity(h, check=False)[2]
    elif scheme == "flat_dtn":
        source = "surrogate"
        if d_value is None:
            d_value = dissipation_surrogate(h)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    E = energy(h)
    D = max(float(d_value), 0.0)
    return FunctionalRecord(
        t=float(t), E=E, D=D, D_source=source, Vmass=excess_mass(h), lip=lip,
        dimless=dimensionless(E, D, grid.dim), signed_mass=signed_mass(h), h_inf=h.sup(),
    )


def ledger_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for r in records:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r.row()])
    return buf.getvalue()


def read_ledger(text: str) -> list[FunctionalRecord]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(LEDGER_COLUMNS) - set(reader.fieldnames or [])
    if missing:
        raise ValueError(f"ledger lacks columns {sorted(missing)}")
    out = []
    for row in reader:
        kw = {f.name: (row[f.name] if f.name == "D_source" else float(row[f.name])) for f in fields(FunctionalRecord)}
        out.append(FunctionalRecord(**kw))
    return out


def records_to_arrays(records) -> dict[str, np.ndarray]:
    cols = {c: [] for c in LEDGER_COLUMNS if c != "D_source"}
    for r in records:
        for c in cols:
            cols[c].append(getattr(r, c))
    return {c: np.asarray(v, float) for c, v in cols.items()}


__all__ = [
    "LEDGER_COLUMNS", "energy", "dirichlet_half", "excess_mass", "signed_mass", "half_norm_sq",
    "dissipation_surrogate", "curvature_norms", "CurvatureNorms", "dimensionless", "eed_ratio",
    "FunctionalRecord", "record", "ledger_csv", "read_ledger", "records_to_arrays",
]

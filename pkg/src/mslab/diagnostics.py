"""Trajectory diagnostics computed from a functional ledger.

Every routine takes plain arrays (time and ledger columns) so it applies equally
to fresh runs and to ledgers read back from disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Verdict:
    ok: bool
    value: float
    detail: str = ""


def first_drop_index(q: np.ndarray, fraction: float = 0.5) -> int | None:
    """Index of the first sample with q <= fraction * q[0]."""
    hit = np.nonzero(q <= fraction * q[0])[0]
    return int(hit[0]) if hit.size else None


def monotone_after_drop(q: np.ndarray, fraction: float = 0.5, tol: float = 0.01) -> Verdict:
    """q nonincreasing within relative ``tol`` per sample once it has fallen below fraction * q[0]."""
    q = np.asarray(q, float)
    i0 = first_drop_index(q, fraction)
    if i0 is None:
        return Verdict(False, float("nan"), "quantity never dropped below the threshold")
    tail = q[i0:]
    prev = tail[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rises = np.where(prev > 0, tail[1:] / prev - 1.0, np.where(tail[1:] > 0, np.inf, 0.0))
    worst = float(rises.max()) if rises.size else 0.0
    return Verdict(worst <= tol, worst, f"from sample {i0}")


def graph_time(t: np.ndarray, E: np.ndarray, D: np.ndarray, fraction: float = 0.1) -> Verdict:
    """First time with E D^2 <= eps, eps = fraction * (E D^2)(0), against (2/(3 sqrt eps)) E0^{3/2}."""
    q = E * D**2
    eps = fraction * q[0]
    bound = 2.0 / (3.0 * np.sqrt(eps)) * E[0] ** 1.5
    hit = np.nonzero(q <= eps)[0]
    if not hit.size:
        return Verdict(False, float("inf"), f"never reached eps within t <= {t[-1]:g}; bound {bound:g}")
    tg = float(t[hit[0]])
    return Verdict(tg <= bound, tg, f"bound {bound:.6g}")


def _loglog_interp(t_query, t, y):
    m = (t > 0) & (y > 0)
    return np.exp(np.interp(np.log(t_query), np.log(t[m]), np.log(y[m])))


def dissipation_ratio(t: np.ndarray, E: np.ndarray, D: np.ndarray, window: tuple[float, float],
                      limit: float = 5.0) -> Verdict:
    """max/min of t D(t) / E(t/2) over samples in the window (E interpolated log-log)."""
    m = (t >= window[0]) & (t <= window[1]) & (t / 2 >= t[t > 0].min())
    if m.sum() < 2:
        return Verdict(False, float("nan"), "too few samples in window")
    r = t[m] * D[m] / _loglog_interp(t[m] / 2, t, E)
    spread = float(r.max() / r.min())
    return Verdict(spread <= limit, spread, f"ratio range [{r.min():.4g}, {r.max():.4g}]")


def lipschitz_constant(t: np.ndarray, lip: np.ndarray, dimless: np.ndarray, window: tuple[float, float],
                       limit: float = 2.0) -> Verdict:
    """Variation of lip / dimless^{1/6} over the window."""
    m = (t >= window[0]) & (t <= window[1]) & (dimless > 0)
    if m.sum() < 2:
        return Verdict(False, float("nan"), "too few samples in window")
    c = lip[m] / dimless[m] ** (1.0 / 6.0)
    spread = float(c.max() / c.min())
    return Verdict(spread <= limit, spread, f"constant range [{c.min():.4g}, {c.max():.4g}]")


def mass_bounded(Vmass: np.ndarray, factor: float = 2.0) -> Verdict:
    ratio = float(Vmass.max() / Vmass[0]) if Vmass[0] > 0 else float("inf")
    return Verdict(ratio <= factor, ratio, f"sup V / V0 = {ratio:.4g}")


def mass_drift(t: np.ndarray, signed: np.ndarray, Vmass: np.ndarray, tol: float = 1e-8) -> Verdict:
    """max over samples of |m(t) - m(0)| / (t ||h(t)||_1), a drift rate per unit time."""
    m = (t > 0) & (Vmass > 0)
    rate = np.abs(signed[m] - signed[0]) / (t[m] * Vmass[m])
    worst = float(rate.max()) if rate.size else 0.0
    return Verdict(worst <= tol, worst)


def energy_monotone(E_before: np.ndarray, E_after: np.ndarray, tol: float = 1e-8) -> Verdict:
    """Largest relative energy rise over accepted steps."""
    with np.errstate(divide="ignore", invalid="ignore"):
        rise = np.where(E_before > 0, E_after / E_before - 1.0, np.where(E_after > 0, np.inf, 0.0))
    worst = float(rise.max()) if rise.size else 0.0
    return Verdict(worst <= tol, worst)

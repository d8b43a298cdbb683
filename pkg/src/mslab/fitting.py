"""Log-log regression of decay exponents from a ledger."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

MIN_POINTS = 8


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    quantity: str
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    n_points: int

    def summary(self) -> str:
        return (f"{self.quantity}: slope {self.slope:+.4f} +/- {self.stderr:.4f} "
                f"on [{self.window[0]:g}, {self.window[1]:g}] ({self.n_points} points)")


def fit_decay(series, quantity: str, window: tuple[float, float], breach_time: float | None = None) -> FitResult:
    """Least-squares slope of log(quantity) against log(t) over samples with t in ``window``.

    ``series`` maps column names to arrays and must contain ``t``.  Samples at or
    after ``breach_time`` (a boundary-contamination flag) are refused.
    """
    if quantity not in series:
        raise FitError(f"unknown quantity {quantity!r}; available: {sorted(k for k in series if k != 't')}")
    t = np.asarray(series["t"], float)
    y = np.asarray(series[quantity], float)
    lo, hi = map(float, window)
    if not 0 < lo < hi:
        raise FitError(f"invalid window ({lo:g}, {hi:g})")
    pos = t[t > 0]
    if pos.size == 0 or lo < pos.min() * (1 - 1e-12) or hi > t.max() * (1 + 1e-12):
        rng = f"[{pos.min():g}, {t.max():g}]" if pos.size else "empty"
        raise FitError(f"window [{lo:g}, {hi:g}] not covered by the ledger; available t-range {rng}")
    if breach_time is not None and hi >= breach_time:
        raise FitError(f"window reaches t = {hi:g} but rows from t = {breach_time:g} on are flagged by the "
                       "boundary-contamination guard")
    m = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    n = int(m.sum())
    if n < MIN_POINTS:
        raise FitError(f"only {n} samples in window, need at least {MIN_POINTS}")
    if np.any(y[m] <= 0):
        raise FitError(f"{quantity} has non-positive values in the window; log-log fit undefined")
    res = stats.linregress(np.log(t[m]), np.log(y[m]))
    return FitResult(quantity, float(res.slope), float(res.intercept), float(res.stderr), (lo, hi), n)


def expected_slope(quantity: str, d: int) -> float:
    """Reference decay exponents for small-slope relaxation with bounded excess mass."""
    table = {"E": -(d + 2) / 3, "h_inf": -d / 3, "grad_inf": -(d + 1) / 3, "lip": -(d + 1) / 3, "D": -(d + 5) / 3}
    if quantity not in table:
        raise KeyError(quantity)
    return table[quantity]

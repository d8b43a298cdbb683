"""Nonlinear evolution of a periodic graph interface.

The height obeys ``h_t = sqrt(1 + |grad h|^2) V`` with V the normal velocity.
Writing this as ``h_t = 2|nabla| Delta h + N(h)`` the stiff linear symbol
``-2|k|^3`` is integrated exactly and the remainder N explicitly by the
two-stage exponential Runge-Kutta scheme (ETD-RK2):

    a       = e^{-c dt} h + dt phi1(-c dt) N(h)
    h_next  = a + dt phi2(-c dt) (N(a) - N(h)),       c = 2|k|^3.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .elliptic import VelocityField, VerticalGrid, default_vertical, elliptic_velocity
from .functionals import FunctionalRecord, energy, half_norm_sq, record
from .graph import LipschitzError, check_lipschitz, curvature_coefficients, lipschitz, slopes
from .linear import gaussian_bump, linear_rate
from .spectral import SpectralField, TorusGrid, dealias, derivative_symbols, make_grid, multiplier_symbol

log = logging.getLogger(__name__)


class SimulationAbort(RuntimeError):
    """Raised internally when a run cannot continue; carries a short reason."""


@dataclass
class InterfaceState:
    h: SpectralField
    t: float = 0.0

    @property
    def d(self) -> int:
        return self.h.grid.dim

    @property
    def grid(self) -> TorusGrid:
        return self.h.grid


# ---------------------------------------------------------------------------
# velocity laws


def flat_dtn_velocity(h: SpectralField, check: bool = True, bound: float = 1.0) -> VelocityField:
    """V = 2|nabla| H(h): flat Dirichlet-to-Neumann map applied to the nonlinear curvature."""
    g = h.grid
    Hc = curvature_coefficients(g, h.coefficients, check, bound)
    V = SpectralField(g, coefficients=2.0 * g.k_abs * Hc)
    return VelocityField(V, "flat_dtn", V.mean())


@dataclass
class Evaluation:
    """Nonlinear remainder and diagnostics at one state."""

    N: np.ndarray
    D: float
    velocity_mean: float


class VelocityLaw:
    """Evaluates N(h) = sqrt(1 + |grad h|^2) V(h) + 2|k|^3 h for one scheme on a fixed grid."""

    def __init__(self, grid: TorusGrid, scheme: str = "flat_dtn", vertical: VerticalGrid | None = None,
                 height_factor: float = 4.0, bound: float = 1.0):
        if scheme not in ("flat_dtn", "elliptic"):
            raise ValueError(f"unknown scheme {scheme!r}")
        if scheme == "elliptic" and grid.dim != 1:
            raise ValueError("the elliptic velocity is available in d = 1 only")
        self.grid = grid
        self.scheme = scheme
        self.bound = bound
        self.rate = linear_rate(grid)
        self.vertical = vertical
        self.phi = _PhiCache(self.rate)
        if scheme == "elliptic" and vertical is None:
            self.vertical = default_vertical(grid, height_factor)

    def __call__(self, coeffs: np.ndarray) -> Evaluation:
        g = self.grid
        h = SpectralField(g, coefficients=coeffs)
        grads = slopes(g, coeffs)
        g2 = sum(q**2 for q in grads)
        check_lipschitz(float(np.sqrt(g2.max())), self.bound)
        metric = np.sqrt(1.0 + g2)
        if self.scheme == "flat_dtn":
            Hc = 0
            for q, sym in zip(grads, derivative_symbols(g)):
                Hc = Hc + dealias(g, g.forward(q / metric)) * sym
            V = g.inverse(2.0 * g.k_abs * Hc)
            D = 2.0 * half_norm_sq(SpectralField(g, coefficients=Hc))
        else:
            _, vel, D = elliptic_velocity(h, vertical=self.vertical, check=False)
            V = vel.V.values
        rhs = dealias(g, g.forward(metric * V))
        mean = float(np.real(rhs.flat[0]))
        if self.scheme == "flat_dtn":
            # the exact law conserves volume; the surrogate does so only to O(slope^2)
            rhs.flat[0] = 0.0
        return Evaluation(rhs + self.rate * coeffs, float(D), mean)


def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(z), phi1 = (e^z - 1)/z and phi2 = (e^z - 1 - z)/z^2 without cancellation."""
    z = np.asarray(z, float)
    small = np.abs(z) < 1e-2
    safe = np.where(small, 1.0, z)
    em1 = np.expm1(z)
    p1 = em1 / safe
    p2 = (em1 - z) / safe**2
    zs = z[small]
    p1[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120
    p2[small] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720
    return em1 + 1.0, p1, p2


class _PhiCache:
    """Memoizes the phi tables for the most recent step sizes."""

    def __init__(self, rate: np.ndarray, size: int = 4):
        self.rate = rate
        self.size = size
        self.store: dict[float, tuple] = {}

    def __call__(self, dt: float):
        hit = self.store.get(dt)
        if hit is None:
            if len(self.store) >= self.size:
                self.store.pop(next(iter(self.store)))
            hit = self.store[dt] = phi_functions(-self.rate * dt)
        return hit


@dataclass
class StepOutcome:
    coefficients: np.ndarray
    D: float
    velocity_mean: float
    change: float


def etd_rk2(law: VelocityLaw, coeffs: np.ndarray, dt: float, start: Evaluation | None = None) -> StepOutcome:
    """One ETD-RK2 step from ``coeffs``; raises LipschitzError if a stage leaves the graph regime."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    e, p1, p2 = law.phi(dt)
    n0 = start if start is not None else law(coeffs)
    a = e * coeffs + dt * p1 * n0.N
    n1 = law(a)
    new = dealias(law.grid, a + dt * p2 * (n1.N - n0.N))
    g = law.grid
    diff = np.sum(g.half_weights * np.abs(new - coeffs) ** 2)
    base = np.sum(g.half_weights * np.abs(coeffs) ** 2)
    change = float(np.sqrt(diff / base)) if base > 0 else (0.0 if diff == 0 else math.inf)
    return StepOutcome(new, n0.D, n0.velocity_mean, change)


def slope_stats(grid: TorusGrid, coeffs: np.ndarray) -> tuple[float, float]:
    """(sup |grad h|, excess area) from a single slope evaluation."""
    g2 = sum(q**2 for q in slopes(grid, coeffs))
    return float(np.sqrt(g2.max())), float(grid.integrate(g2 / (np.sqrt(1.0 + g2) + 1.0)))


def step_imex(state: InterfaceState, dt: float, scheme: str = "flat_dtn",
              law: VelocityLaw | None = None) -> InterfaceState:
    """Advance ``state`` by one ETD-RK2 step of size ``dt`` (no adaptivity)."""
    check_lipschitz(float(lipschitz(state.grid, state.h.coefficients)))
    law = law or VelocityLaw(state.grid, scheme)
    out = etd_rk2(law, state.h.coefficients, dt)
    return InterfaceState(SpectralField(state.grid, coefficients=out.coefficients), state.t + dt)


# ---------------------------------------------------------------------------
# adaptive driver


@dataclass
class StepRecord:
    t: float
    dt: float
    E_before: float
    E_after: float
    D: float
    lip: float


@dataclass
class Controller:
    change_target: float = 1e-3
    energy_tol: float = 1e-8
    dt_min: float = 1e-9
    dt_max: float | None = None
    fixed_dt: float | None = None
    growth: float = 2.0
    shrink: float = 0.2
    safety: float = 0.9

    def next_dt(self, dt: float, change: float) -> float:
        if self.fixed_dt is not None:
            return self.fixed_dt
        if change <= 0:
            fac = self.growth
        else:
            fac = min(self.growth, max(self.shrink, self.safety * self.change_target / change))
        new = dt * fac
        return min(new, self.dt_max) if self.dt_max else new


class Integrator:
    """Adaptive ETD-RK2 driver with energy and Lipschitz step rejection."""

    def __init__(self, law: VelocityLaw, controller: Controller | None = None, lip_bound: float = 1.0):
        self.law = law
        self.ctl = controller or Controller()
        self.lip_bound = lip_bound
        self.steps: list[StepRecord] = []
        self.rejected = 0
        self.mass_drift_max = 0.0

    def advance(self, state: InterfaceState, t_target: float, dt: float) -> tuple[InterfaceState, float]:
        """Integrate up to ``t_target`` exactly; returns the state and the proposed next dt."""
        g = self.law.grid
        coeffs = state.h.coefficients
        t = state.t
        E = energy(state.h)
        while t < t_target * (1 - 1e-14):
            remaining = t_target - t
            step = min(dt, remaining)
            # avoid leaving a sliver of a step
            if remaining - step < 1e-3 * step:
                step = remaining
            start = self.law(coeffs)
            while True:
                if step < self.ctl.dt_min and step < remaining:
                    raise SimulationAbort(f"time step {step:.3e} fell below dt_min at t = {t:.6g}")
                try:
                    out = etd_rk2(self.law, coeffs, step, start)
                    lip, E_new = slope_stats(g, out.coefficients)
                    check_lipschitz(lip, self.lip_bound)
                    if lip >= 1.0:
                        raise LipschitzError(f"|grad h|_inf = {lip:.6g} reached the graph bound")
                except LipschitzError:
                    if self.ctl.fixed_dt is not None:
                        raise
                    self.rejected += 1
                    step *= 0.5
                    continue
                if E_new > E * (1 + self.ctl.energy_tol) + 1e-300:
                    if self.ctl.fixed_dt is not None:
                        raise SimulationAbort(f"energy increased by {E_new / E - 1:.3e} at t = {t:.6g}")
                    self.rejected += 1
                    step *= 0.5
                    continue
                if self.ctl.fixed_dt is None and out.change > 1.5 * self.ctl.change_target and step > self.ctl.dt_min:
                    self.rejected += 1
                    step = max(step * max(self.ctl.shrink, self.ctl.safety * self.ctl.change_target / out.change),
                               self.ctl.dt_min)
                    continue
                break
            self.steps.append(StepRecord(t, step, E, E_new, out.D, lip))
            coeffs, E = out.coefficients, E_new
            t = t_target if step == remaining else t + step
            if self.ctl.fixed_dt is None:
                dt = self.ctl.next_dt(step, out.change)
        return InterfaceState(SpectralField(g, coefficients=coeffs), t), dt


# ---------------------------------------------------------------------------
# initial data


def _rescale_lip(h: SpectralField, target: float) -> SpectralField:
    lip = float(lipschitz(h.grid, h.coefficients))
    if lip == 0:
        return h
    return h * (target / lip)


def multibump(grid: TorusGrid, rng: np.random.Generator, count: int = 3, width: float = 1.0,
              amplitude: float = 1.0, spread: float = 1.0) -> SpectralField:
    """Cluster of positive Gaussian bumps offset by at most ``spread`` from the box centre."""
    c = grid.length / 2
    vals = np.zeros(grid.shape)
    for _ in range(count):
        off = rng.uniform(-spread, spread, size=grid.dim)
        r2 = sum((x - c - o) ** 2 for x, o in zip(grid.coordinates, off))
        w = width * rng.uniform(0.75, 1.25)
        vals += amplitude * rng.uniform(0.5, 1.0) * np.exp(-r2 / (2 * w**2))
    return SpectralField(grid, values=vals)


def enveloped_random(grid: TorusGrid, rng: np.random.Generator, gamma: float = 2.0,
                     kmax: int | None = None, zero_mean: bool = True) -> SpectralField:
    """Gaussian Fourier coefficients with envelope |k|^-gamma, band-limited at 2/3 Nyquist or ``kmax``."""
    keep = grid.dealias_mask.copy()
    if kmax is not None:
        for kc in grid.k_components:
            keep &= np.broadcast_to(np.rint(np.abs(kc) / grid.k_min) <= kmax, grid.spectral_shape)
    env = multiplier_symbol(grid, -1.0) ** gamma if gamma > 0 else np.ones(grid.spectral_shape)
    c = (rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)) * env * keep
    if zero_mean:
        c.flat[0] = 0.0
    # re-synthesize so the stored spectrum is that of a real field
    return SpectralField(grid, values=grid.inverse(c))


def initial_condition(cfg: RunConfig, grid: TorusGrid | None = None) -> SpectralField:
    grid = grid or make_grid(cfg.dim, cfg.L, cfg.n)
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "flat":
        return SpectralField.zeros(grid)
    if cfg.init == "gaussian":
        h = gaussian_bump(grid, cfg.amplitude, cfg.width)
    elif cfg.init == "multibump":
        h = multibump(grid, rng, cfg.bumps, cfg.width, cfg.amplitude, cfg.spread)
    else:
        h = enveloped_random(grid, rng, cfg.gamma, cfg.kmax)
        if cfg.slope is None:
            h = h * (cfg.amplitude / max(h.sup(), 1e-300))
    if cfg.slope is not None:
        h = _rescale_lip(h, cfg.slope)
    return h


# ---------------------------------------------------------------------------
# runs


def output_times(t_first: float, t_end: float, per_decade: int) -> np.ndarray:
    """Log-spaced sampling times from t_first to t_end inclusive."""
    k = math.ceil(per_decade * math.log10(t_end / t_first) - 1e-9)
    ts = t_first * 10.0 ** (np.arange(k + 1) / per_decade)
    ts[-1] = t_end
    return ts


def contamination(h: SpectralField, fraction: float = 0.1) -> float:
    """max |h| over the outer ``fraction`` of the box (per axis, about its centre) relative to sup |h|."""
    g = h.grid
    sup = h.sup()
    if sup == 0:
        return 0.0
    c = g.length / 2
    outer = np.zeros(g.shape, dtype=bool)
    for x in g.coordinates:
        outer |= np.abs(x - c) >= (0.5 - fraction) * g.length
    return float(np.max(np.abs(h.values[outer])) / sup)


@dataclass
class Snapshot:
    t: float
    h: SpectralField
    scheme: str

    def to_csv(self) -> str:
        g = self.h.grid
        head = f"# t={self.t!r} d={g.dim} L={g.length!r} n={g.n} scheme={self.scheme}\n"
        vals = self.h.values.reshape(g.n, -1) if g.dim == 2 else self.h.values[:, None]
        body = "\n".join(",".join(f"{v:.17g}" for v in row) for row in vals)
        return head + body + "\n"


def read_snapshot(text: str) -> Snapshot:
    lines = text.splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
    d, L, n = int(meta["d"]), float(meta["L"]), int(meta["n"])
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln])
    grid = make_grid(d, L, n)
    vals = data[:, 0] if d == 1 else data
    return Snapshot(float(meta["t"]), SpectralField(grid, values=vals), meta["scheme"])


@dataclass
class SimulationResult:
    config: RunConfig
    records: list[FunctionalRecord]
    steps: list[StepRecord]
    snapshots: list[Snapshot]
    aborted: bool = False
    abort_reason: str = ""
    breach_time: float | None = None
    rejected_steps: int = 0
    velocity_means: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    def arrays(self) -> dict[str, np.ndarray]:
        from .functionals import records_to_arrays

        return records_to_arrays(self.records)

    def step_arrays(self) -> dict[str, np.ndarray]:
        keys = ("t", "dt", "E_before", "E_after", "D", "lip")
        return {k: np.asarray([getattr(s, k) for s in self.steps], float) for k in keys}


def _snapshot_indices(count: int, total: int) -> set[int]:
    if count <= 0 or total == 0:
        return set()
    return set(np.unique(np.linspace(0, total - 1, min(count, total)).round().astype(int)).tolist())


def run_simulation(cfg: RunConfig, h0: SpectralField | None = None, vertical: VerticalGrid | None = None) -> SimulationResult:
    """Integrate from t = 0 to cfg.t_end, sampling the functional ledger on a log-spaced grid."""
    started = _time.perf_counter()
    grid = make_grid(cfg.dim, cfg.L, cfg.n)
    h = initial_condition(cfg, grid) if h0 is None else h0
    lip0 = float(lipschitz(grid, h.coefficients))
    if not lip0 < 1.0 or lip0 > cfg.lip_bound:
        raise LipschitzError(f"initial |grad h|_inf = {lip0:.6g} outside the graph regime (bound {cfg.lip_bound:g}, strict < 1)")
    levels = cfg.levels
    if cfg.scheme == "elliptic" and vertical is None:
        vertical = default_vertical(grid, cfg.height_factor, levels)
    law = VelocityLaw(grid, cfg.scheme, vertical, cfg.height_factor, cfg.lip_bound)
    ctl = Controller(cfg.change_target, cfg.energy_tol, cfg.dt_min, cfg.dt_max, cfg.fixed_dt)
    integ = Integrator(law, ctl, cfg.lip_bound)
    times = np.concatenate([[0.0], output_times(cfg.t_first, cfg.t_end, cfg.per_decade)])
    snap_idx = _snapshot_indices(cfg.snapshots, len(times))
    state = InterfaceState(h, 0.0)
    dt = cfg.fixed_dt or cfg.dt_initial
    result = SimulationResult(cfg, [], integ.steps, [])

    def sample(st: InterfaceState, idx: int):
        ev = law(st.h.coefficients)
        result.records.append(record(st.h, st.t, cfg.scheme, ev.D))
        result.velocity_means.append(ev.velocity_mean)
        if idx in snap_idx:
            result.snapshots.append(Snapshot(st.t, st.h, cfg.scheme))

    try:
        sample(state, 0)
        for i, t_out in enumerate(times[1:], start=1):
            if len(integ.steps) > cfg.max_steps:
                raise SimulationAbort(f"step budget {cfg.max_steps} exhausted at t = {state.t:.6g}")
            state, dt = integ.advance(state, float(t_out), dt)
            sample(state, i)
            if cfg.contamination_tol is not None and cfg.contamination_tol > 0:
                level = contamination(state.h)
                if level > cfg.contamination_tol:
                    result.breach_time = state.t
                    raise SimulationAbort(
                        f"boundary contamination {level:.3e} > {cfg.contamination_tol:g} at t = {state.t:.6g}")
    except (SimulationAbort, LipschitzError, RuntimeError) as exc:
        result.aborted = True
        result.abort_reason = f"{type(exc).__name__}: {exc}"
        log.warning("run aborted: %s", result.abort_reason)
    if state.t > 0 and (not result.snapshots or result.snapshots[-1].t != state.t):
        result.snapshots.append(Snapshot(state.t, state.h, cfg.scheme))
    result.rejected_steps = integ.rejected
    result.wall_time = _time.perf_counter() - started
    return result


def fixed_step_energy_balance(steps: list[StepRecord], t1: float, t2: float) -> dict[str, float]:
    """E(t1) - E(t2) versus the left-endpoint Riemann sum of D over accepted steps in [t1, t2]."""
    sel = [s for s in steps if s.t >= t1 * (1 - 1e-12) and s.t + s.dt <= t2 * (1 + 1e-12)]
    if not sel:
        raise ValueError("no steps inside the requested interval")
    dE = sel[-1].E_after - sel[0].E_before
    integral = float(sum(s.D * s.dt for s in sel))
    defect = abs(dE + integral)
    return {"dE": dE, "integral": integral, "defect": defect, "relative": defect / abs(dE) if dE else math.inf}


__all__ = [
    "InterfaceState", "flat_dtn_velocity", "VelocityLaw", "Evaluation", "phi_functions", "etd_rk2",
    "step_imex", "Controller", "Integrator", "StepRecord", "SimulationAbort", "SimulationResult",
    "Snapshot", "read_snapshot", "run_simulation", "initial_condition", "multibump", "enveloped_random",
    "output_times", "contamination", "fixed_step_energy_balance",
]

"""Run configuration: a flat ``key = value`` text format with validation.

Lines starting with ``#`` are comments.  Unknown keys are rejected.  Values are
numbers, ``on``/``off`` switches or bare words; the validated config is echoed,
with defaults filled in, into every run manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .spectral import _is_power_of_two


class ConfigError(ValueError):
    pass


INIT_FAMILIES = ("flat", "gaussian", "multibump", "random")
SCHEMES = ("flat_dtn", "elliptic")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _opt_float(text: str):
    t = text.strip().lower()
    return None if t in ("none", "off", "auto", "") else float(t)


def _opt_int(text: str):
    t = text.strip().lower()
    return None if t in ("none", "auto", "") else int(t)


@dataclass
class RunConfig:
    dim: int
    L: float
    n: int
    t_end: float
    scheme: str | None = None
    # initial data
    init: str = "gaussian"
    amplitude: float = 0.05
    width: float = 1.0
    slope: float | None = None
    bumps: int = 3
    spread: float = 1.0
    gamma: float = 2.0
    kmax: int = 8
    seed: int = 0
    # output sampling
    t_first: float = 0.01
    per_decade: int = 64
    snapshots: int = 8
    # time stepping
    dt_initial: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float | None = None
    change_target: float = 1e-3
    energy_tol: float = 1e-8
    fixed_dt: float | None = None
    max_steps: int = 2_000_000
    # fit window and guards
    fit_t_lo: float | None = None
    fit_t_hi: float | None = None
    gap_guard: bool = True
    gap_threshold: float = 0.04
    contamination_tol: float | None = 0.02
    lip_bound: float = 1.0
    # elliptic solver
    height_factor: float = 4.0
    levels: int | None = None
    # execution
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def k_min(self) -> float:
        return 2.0 * math.pi / self.L

    def gap_value(self, t: float) -> float:
        return 2.0 * self.k_min**3 * t

    def guard_limit(self) -> float:
        return self.gap_threshold / (2.0 * self.k_min**3)

    def validate(self) -> None:
        if self.dim not in (1, 2):
            raise ConfigError(f"dim: must be 1 or 2, got {self.dim}")
        if not self.L > 0:
            raise ConfigError(f"L: must be positive, got {self.L}")
        if not _is_power_of_two(self.n) or self.n < 8:
            raise ConfigError(f"n: must be a power of two >= 8, got {self.n}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end: must be positive, got {self.t_end}")
        if self.scheme is None:
            self.scheme = "elliptic" if self.dim == 1 and self.n < 1024 else "flat_dtn"
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "elliptic" and self.dim != 1:
            raise ConfigError("scheme: elliptic is available for dim = 1 only")
        if self.init not in INIT_FAMILIES:
            raise ConfigError(f"init: must be one of {INIT_FAMILIES}, got {self.init!r}")
        if not 0 < self.lip_bound <= 1:
            raise ConfigError(f"lip_bound: must lie in (0, 1], got {self.lip_bound}")
        if self.slope is not None and not 0 <= self.slope < 1:
            raise ConfigError(f"slope: initial Lipschitz target must lie in [0, 1), got {self.slope}")
        if self.height_factor < 2:
            raise ConfigError(f"height_factor: strip height must be >= 2L, got {self.height_factor}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ConfigError(f"fixed_dt: must be positive, got {self.fixed_dt}")
        if not 0 < self.t_first < self.t_end:
            raise ConfigError(f"t_first: must lie in (0, t_end), got {self.t_first}")
        if self.per_decade < 1:
            raise ConfigError("per_decade: must be >= 1")
        if self.change_target <= 0:
            raise ConfigError("change_target: must be positive")
        if self.fit_t_hi is None:
            self.fit_t_hi = min(self.t_end, self.guard_limit()) if self.gap_guard else self.t_end
        if self.fit_t_lo is None:
            self.fit_t_lo = max(self.t_first, self.fit_t_hi / 100.0)
            if self.fit_t_lo >= self.fit_t_hi:
                # guard ends before the first sample; fits will report the empty window
                self.fit_t_lo = self.fit_t_hi / 100.0
        if not 0 < self.fit_t_lo < self.fit_t_hi:
            raise ConfigError(f"fit window: need 0 < fit_t_lo < fit_t_hi, got ({self.fit_t_lo}, {self.fit_t_hi})")
        if self.fit_t_hi > self.t_end:
            raise ConfigError(f"fit_t_hi: {self.fit_t_hi} exceeds t_end = {self.t_end}")
        if self.gap_guard:
            val = self.gap_value(self.fit_t_hi)
            if val > self.gap_threshold * (1 + 1e-12):
                raise ConfigError(
                    f"fit_t_hi: gap guard violated, 2|k_min|^3 t_hi = {val:.6g} > {self.gap_threshold:g} "
                    f"(largest admissible t_hi = {self.guard_limit():.6g})")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "on" if v else "off"
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    "dim": int, "L": float, "n": int, "t_end": float, "scheme": str, "init": str,
    "amplitude": float, "width": float, "slope": _opt_float, "bumps": int, "spread": float, "gamma": float,
    "kmax": int, "seed": int, "t_first": float, "per_decade": int, "snapshots": int,
    "dt_initial": float, "dt_min": float, "dt_max": _opt_float, "change_target": float,
    "energy_tol": float, "fixed_dt": _opt_float, "max_steps": int, "fit_t_lo": _opt_float,
    "fit_t_hi": _opt_float, "gap_guard": _bool, "gap_threshold": float,
    "contamination_tol": _opt_float, "lip_bound": float, "height_factor": float,
    "levels": _opt_int, "threads": int, "out": lambda s: None if s.strip().lower() == "none" else s.strip(),
}
REQUIRED = ("dim", "L", "n", "t_end")


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse and validate ``key = value`` text; keyword overrides win over the text."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    values = {}
    for key, value in raw.items():
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from None
    for key, value in overrides.items():
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown override {key!r}")
        if value is not None:
            values[key] = value
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return RunConfig(**values)


def config_keys() -> list[str]:
    return [f.name for f in fields(RunConfig)]


__all__ = ["ConfigError", "RunConfig", "parse_config", "config_keys", "INIT_FAMILIES", "SCHEMES"]

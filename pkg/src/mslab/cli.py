"""Command-line runner.

Exit status: 0 ok, 1 usage error, 2 numerical failure, 3 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .fitting import FitError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("mslab")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# manifests


def build_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def write_manifest(path: Path, cfg: RunConfig, meta: dict) -> None:
    """The manifest is itself a valid config file; run metadata sits in '#@' comment lines."""
    lines = [f"#@ mslab = {__version__}", f"#@ build = {build_describe()}"]
    lines += [f"#@ {k} = {v}" for k, v in meta.items()]
    path.write_text("\n".join(lines) + "\n" + cfg.to_text())


def read_manifest(path: Path) -> tuple[RunConfig, dict]:
    text = Path(path).read_text()
    meta = {}
    for line in text.splitlines():
        if line.startswith("#@"):
            k, _, v = line[2:].partition("=")
            meta[k.strip()] = v.strip()
    return parse_config(text), meta


def _load_config(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config PATH is required")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    return parse_config(text, seed=args.seed, threads=args.threads)


def _out_dir(args, cfg: RunConfig | None = None, default: str = "run") -> Path:
    out = Path(args.out or (cfg.out if cfg and cfg.out else default))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_linear(args) -> int:
    from .fitting import fit_decay
    from .functionals import energy
    from .linear import evolve_linear, linear_decay_series
    from .solver import initial_condition, output_times
    from .spectral import make_grid

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    grid = make_grid(cfg.dim, cfg.L, cfg.n)
    h0 = initial_condition(cfg, grid)
    times = output_times(cfg.t_first, cfg.t_end, cfg.per_decade)
    series = linear_decay_series(h0, times)
    series["E"] = np.array([energy(evolve_linear(h0, t)) for t in times])
    cols = ["t", "h_inf", "grad_inf", "E"]
    np.savetxt(out / "linear_series.csv", np.column_stack([series[c] for c in cols]), delimiter=",",
               header=",".join(cols), comments="", fmt="%.17g")
    write_manifest(out / "manifest.txt", cfg, {"command": "linear"})
    failed = False
    for q, target in (("h_inf", -cfg.dim / 3), ("grad_inf", -(cfg.dim + 1) / 3)):
        fit = fit_decay(series, q, (cfg.fit_t_lo, cfg.fit_t_hi))
        ok = abs(fit.slope - target) <= 0.05
        failed |= not ok
        print(f"{fit.summary()}  target {target:+.4f}  {'ok' if ok else 'MISS'}")
    return EXIT_CHECK if args.check and failed else EXIT_OK


def _write_run(out: Path, res) -> None:
    from .functionals import ledger_csv

    (out / "series.csv").write_text(ledger_csv(res.records))
    st = res.step_arrays()
    cols = ["t", "dt", "E_before", "E_after", "D", "lip"]
    np.savetxt(out / "steps.csv", np.column_stack([st[c] for c in cols]) if res.steps else np.zeros((0, 6)),
               delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    for i, s in enumerate(res.snapshots):
        (snap / f"h_{i:03d}.csv").write_text(s.to_csv())


def cmd_evolve(args) -> int:
    from . import diagnostics as dg
    from .fitting import FitError, expected_slope, fit_decay
    from .graph import LipschitzError
    from .solver import run_simulation

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    try:
        res = run_simulation(cfg)
    except LipschitzError as exc:
        print(f"rejected initial data: {exc}", file=sys.stderr)
        return EXIT_USAGE
    meta = {
        "command": "evolve",
        "aborted": "yes" if res.aborted else "no",
        "abort_reason": res.abort_reason or "none",
        "breach_time": "none" if res.breach_time is None else repr(res.breach_time),
        "accepted_steps": len(res.steps),
        "rejected_steps": res.rejected_steps,
        "t_reached": repr(res.records[-1].t if res.records else 0.0),
        "gap_guard_value": repr(cfg.gap_value(cfg.fit_t_hi)),
    }
    _write_run(out, res)
    write_manifest(out / "manifest.txt", cfg, meta)
    print(f"{len(res.records)} ledger rows, {len(res.steps)} steps, {res.rejected_steps} rejected, "
          f"{res.wall_time:.1f} s -> {out}")
    if res.aborted:
        print(f"ABORTED: {res.abort_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.check:
        return EXIT_OK
    a, st = res.arrays(), res.step_arrays()
    checks = {}
    if res.steps:
        checks["energy_monotone"] = dg.energy_monotone(st["E_before"], st["E_after"], cfg.energy_tol).ok
    if a["E"][0] > 0:
        checks["mass_bounded"] = dg.mass_bounded(a["Vmass"]).ok
        if cfg.scheme == "flat_dtn":
            checks["mass_drift"] = dg.mass_drift(a["t"], a["signed_mass"], a["Vmass"]).ok
        try:
            fit = fit_decay(a, "E", (cfg.fit_t_lo, cfg.fit_t_hi), res.breach_time)
            tol = 0.1 if cfg.dim == 1 else 0.15
            checks["energy_slope"] = abs(fit.slope - expected_slope("E", cfg.dim)) <= tol
            print(fit.summary())
        except FitError as exc:
            print(f"fit skipped: {exc}")
    else:
        checks["flat_stationary"] = bool(np.all(a["E"] == 0) and np.all(a["h_inf"] == 0))
    for k, v in checks.items():
        print(f"check {k}: {'PASS' if v else 'FAIL'}")
    return EXIT_OK if all(checks.values()) else EXIT_CHECK


def cmd_kernel(args) -> int:
    from .linear import kernel_profile, tail_slope

    out = _out_dir(args, default="kernel")
    failed = False
    for d in args.dims:
        prof = kernel_profile(d, r_max=args.r_max)
        (out / f"kernel_d{d}.csv").write_text(prof.to_csv())
        slope = tail_slope(prof, 5.0, 20.0)
        norm_ok = abs(prof.mass - 1) <= 1e-6
        slope_ok = abs(slope + (d + 1)) <= 0.15
        failed |= not (norm_ok and slope_ok and prof.converged)
        print(f"d={d}: G(0)={prof.at_origin():.12g} mass={prof.mass:.12g} tail slope={slope:.4f} "
              f"(reference {-(d + 1)}) doubling change={prof.tail_change:.2e}")
    return EXIT_CHECK if args.check and failed else EXIT_OK


def cmd_ineq(args) -> int:
    from . import inequalities as iq

    out = _out_dir(args, default="ineq")
    seed = 0 if args.seed is None else args.seed
    jobs = []
    for d in args.dims:
        spec = iq.SampleSpec(iq.default_sample_grid(d), seed=seed)
        jobs.append((iq.check_eed, (spec, args.eed_samples), {}))
        jobs.append((iq.check_v2, (spec, args.samples), {}))
        for item in iq.GNS_ITEMS:
            if d in iq.CATALOGUE[item].dims:
                jobs.append((iq.check_gns, (item, spec, args.samples), {}))
    with ThreadPoolExecutor(max_workers=args.threads or 1) as pool:
        reports = list(pool.map(lambda j: j[0](*j[1], **j[2]), jobs))
    (out / "ineq_report.csv").write_text(iq.report_csv(reports))
    failed = False
    for r in reports:
        ok = r.finite and r.doubling_drift <= 0.1
        failed |= not ok
        print(f"d={r.dim} {r.inequality_id:6s} n={r.n_samples:6d} max={r.max_ratio:.6g} "
              f"drift={r.doubling_drift:.2e} {'ok' if ok else 'MISS'}")
    tint_rows = []
    if args.tint:
        for a, b in ((0.5, 0.5), (2 / 3, 1 / 3), (0.9, 0.9)):
            tint_rows += iq.check_tint([a], [b], [1.0, 10.0, 100.0])
    for r in tint_rows:
        failed |= r.error > 1e-8
    if tint_rows:
        print(f"tint: max relative deviation from Beta closed form {max(r.error for r in tint_rows):.2e}")
    return EXIT_CHECK if args.check and failed else EXIT_OK


def _ledger_and_meta(path: Path):
    from .functionals import read_ledger, records_to_arrays

    path = Path(path)
    ledger = path / "series.csv" if path.is_dir() else path
    if not ledger.exists():
        raise UsageError(f"no ledger at {ledger}")
    meta, cfg = {}, None
    manifest = ledger.parent / "manifest.txt"
    if manifest.exists():
        cfg, meta = read_manifest(manifest)
    return records_to_arrays(read_ledger(ledger.read_text())), cfg, meta


def cmd_fit(args) -> int:
    from .fitting import FitError, fit_decay

    series, cfg, meta = _ledger_and_meta(args.ledger)
    breach = meta.get("breach_time", "none")
    breach_t = None if breach in ("none", "") else float(breach)
    if args.window:
        window = tuple(args.window)
    elif cfg is not None:
        window = (cfg.fit_t_lo, cfg.fit_t_hi)
    else:
        raise UsageError("no --window given and no manifest next to the ledger")
    try:
        for q in args.quantity:
            print(fit_decay(series, q, window, breach_t).summary())
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .fitting import FitError, fit_decay

    series, cfg, meta = _ledger_and_meta(args.run)
    run_dir = Path(args.run) if Path(args.run).is_dir() else Path(args.run).parent
    t = series["t"]
    m = t > 0
    d = cfg.dim if cfg else 2
    fig, ax = plt.subplots(figsize=(7, 5))
    for q, label in (("E", "energy"), ("D", "dissipation"), ("Vmass", "excess mass"), ("lip", "Lipschitz")):
        y = series[q][m]
        if np.any(y > 0):
            ax.loglog(t[m], y, label=label)
    t0 = t[m][len(t[m]) // 4] if m.any() else 1.0
    e0 = series["E"][m][len(t[m]) // 4] if m.any() else 1.0
    tr = np.geomspace(t0, t[m].max() if m.any() else 10.0, 20)
    for slope, style in ((-(d + 2) / 3, "k--"), (-1.0, "k:")):
        ax.loglog(tr, e0 * (tr / t0) ** slope, style, label=f"slope {slope:.3g}")
    if cfg is not None:
        for x in (cfg.fit_t_lo, cfg.fit_t_hi):
            ax.axvline(x, color="0.7", lw=0.8)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title(f"d = {d}")
    svg = Path(args.out) / "report.svg" if args.out else run_dir / "report.svg"
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg, format="svg")
    plt.close(fig)
    lines = [f"report for {run_dir}", f"aborted: {meta.get('aborted', 'unknown')}"]
    if cfg is not None:
        for q in ("E", "D", "h_inf", "lip"):
            try:
                lines.append(fit_decay(series, q, (cfg.fit_t_lo, cfg.fit_t_hi)).summary())
            except FitError as exc:
                lines.append(f"{q}: {exc}")
    (svg.parent / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {svg}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (key = value text)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--check", action="store_true", help="exit with status 3 on a failed acceptance property")
    common.add_argument("--seed", type=int, help="override the root seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads for independent jobs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mslab", description="Mullins-Sekerka graph relaxation experiments")
    p.add_argument("--version", action="version", version=f"mslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("linear", parents=[common], help="exact linear-flow decay experiment")
    sub.add_parser("evolve", parents=[common], help="nonlinear evolution run")
    k = sub.add_parser("kernel", parents=[common], help="tabulate the linear kernel profile")
    k.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    k.add_argument("--r-max", type=float, default=20.0)
    q = sub.add_parser("ineq", parents=[common], help="randomized inequality suites")
    q.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    q.add_argument("--samples", type=int, default=1000)
    q.add_argument("--eed-samples", type=int, default=10_000)
    q.add_argument("--no-tint", dest="tint", action="store_false")
    f = sub.add_parser("fit", parents=[common], help="regress decay exponents from a ledger")
    f.add_argument("ledger", help="series.csv or a run directory")
    f.add_argument("--quantity", nargs="+", default=["E"])
    f.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    r = sub.add_parser("report", parents=[common], help="render an SVG panel for a finished run")
    r.add_argument("run", help="run directory")
    return p


COMMANDS = {"linear": cmd_linear, "evolve": cmd_evolve, "kernel": cmd_kernel, "ineq": cmd_ineq,
            "fit": cmd_fit, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

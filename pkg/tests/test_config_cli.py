import numpy as np
import pytest

from mslab.cli import EXIT_CHECK, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, read_manifest
from mslab.config import ConfigError, RunConfig, config_keys, parse_config
from mslab.functionals import read_ledger

SMALL_2D = """\
dim = 2
L = 16.0
n = 32
t_end = 0.5
init = gaussian   # positive bump at the box centre
slope = 0.2
t_first = 0.01
per_decade = 8
"""


def test_defaults_and_scheme_choice():
    cfg = parse_config("dim = 1\nL = 6.28\nn = 64\nt_end = 1\n")
    assert cfg.scheme == "elliptic"
    assert parse_config("dim = 1\nL = 6.28\nn = 1024\nt_end = 1\n").scheme == "flat_dtn"
    assert parse_config(SMALL_2D).scheme == "flat_dtn"
    assert cfg.fit_t_hi == pytest.approx(min(1.0, cfg.guard_limit()))
    assert cfg.fit_t_lo < cfg.fit_t_hi
    assert "change_target" in config_keys()


@pytest.mark.parametrize(
    "text,match",
    [
        ("dim = 1\nL = 1\nn = 1000\nt_end = 1\n", "power of two"),
        ("dim = 3\nL = 1\nn = 16\nt_end = 1\n", "dim"),
        ("dim = 1\nL = 1\nn = 16\n", "missing"),
        ("dim = 1\nL = 1\nn = 16\nt_end = 1\nfoo = 2\n", "unknown key"),
        ("dim = 1\nL = 1\nn = 16\nt_end = 1\nn = 32\n", "duplicate"),
        ("dim = 1\nL = 1\nn = 16\nt_end = 1\nslope = 1.2\n", "slope"),
        ("dim = 2\nL = 1\nn = 16\nt_end = 1\nscheme = elliptic\n", "elliptic"),
        ("dim = 1\nL = 1\nn = 16\nt_end = 1\ngap_guard = maybe\n", "gap_guard"),
        ("dim = 1\nL = 100\nn = 16\nt_end = 1000\nfit_t_lo = 1\nfit_t_hi = 1000\n", "gap guard"),
        ("dim = 1\nL = 1\nn = 16\nt_end = 1\nheight_factor = 1\n", "height_factor"),
        ("dim = 1 L = 2\n", "cannot parse"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_text_round_trip():
    cfg = parse_config(SMALL_2D, seed=4)
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert isinstance(RunConfig(dim=1, L=1.0, n=16, t_end=1.0), RunConfig)


def test_evolve_writes_artifacts_and_manifest_rerun(tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(SMALL_2D)
    out1 = tmp_path / "a"
    # far from the asymptotic regime: the decay-slope property fails, the others hold
    assert main(["evolve", "--config", str(cfg_file), "--out", str(out1), "--check"]) == EXIT_CHECK
    text = capsys.readouterr().out
    assert "energy_slope: FAIL" in text and "energy_monotone: PASS" in text
    for name in ("series.csv", "steps.csv", "manifest.txt"):
        assert (out1 / name).exists()
    assert list((out1 / "snapshots").glob("h_*.csv"))
    cfg, meta = read_manifest(out1 / "manifest.txt")
    assert meta["aborted"] == "no" and "build" in meta
    out2 = tmp_path / "b"
    assert main(["evolve", "--config", str(out1 / "manifest.txt"), "--out", str(out2)]) == EXIT_OK
    a = read_ledger((out1 / "series.csv").read_text())
    b = read_ledger((out2 / "series.csv").read_text())
    for x, y in zip(a, b):
        assert abs(x.E - y.E) <= 1e-12 * max(abs(x.E), 1e-300)


def test_evolve_flat_and_usage_errors(tmp_path, capsys):
    flat = tmp_path / "flat.cfg"
    flat.write_text("dim = 1\nL = 6.28\nn = 32\nt_end = 0.1\ninit = flat\nscheme = flat_dtn\nper_decade = 4\n")
    assert main(["evolve", "--config", str(flat), "--out", str(tmp_path / "f"), "--check"]) == EXIT_OK
    bad = tmp_path / "bad.cfg"
    bad.write_text("dim = 1\nL = 6.28\nn = 1000\nt_end = 1\n")
    assert main(["evolve", "--config", str(bad)]) == EXIT_USAGE
    assert "power of two" in capsys.readouterr().err
    assert main(["evolve"]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    steep = tmp_path / "steep.cfg"
    steep.write_text("dim = 1\nL = 6.28\nn = 32\nt_end = 0.1\ninit = gaussian\namplitude = 5\nwidth = 0.3\n")
    assert main(["evolve", "--config", str(steep), "--out", str(tmp_path / "s")]) == EXIT_USAGE


def test_evolve_abort_exit_code(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("dim = 1\nL = 8\nn = 64\nt_end = 50\nscheme = flat_dtn\nslope = 0.1\ngap_guard = off\n")
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == EXIT_NUMERICAL
    _, meta = read_manifest(out / "manifest.txt")
    assert meta["aborted"] == "yes" and meta["breach_time"] != "none"
    # fits refuse windows reaching the breach
    assert main(["fit", str(out), "--window", "0.01", "49"]) == EXIT_USAGE


def test_fit_and_report(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL_2D)
    out = tmp_path / "r"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert main(["fit", str(out), "--quantity", "E", "D", "--window", "0.05", "0.5"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "E: slope" in text and "D: slope" in text
    assert main(["fit", str(out), "--window", "1", "5"]) == EXIT_USAGE
    assert "available t-range" in capsys.readouterr().err
    assert main(["fit", str(out), "--quantity", "nope", "--window", "0.05", "0.5"]) == EXIT_USAGE
    assert main(["fit", str(tmp_path / "missing")]) == EXIT_USAGE
    assert main(["report", str(out)]) == EXIT_OK
    svg = (out / "report.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    assert (out / "summary.txt").exists()


def test_kernel_and_ineq_commands(tmp_path, capsys):
    assert main(["kernel", "--dims", "1", "--out", str(tmp_path / "k")]) == EXIT_OK
    assert (tmp_path / "k" / "kernel_d1.csv").exists()
    assert main(["ineq", "--dims", "1", "--samples", "16", "--eed-samples", "32", "--out", str(tmp_path / "q"),
                 "--threads", "2", "--check"]) == EXIT_OK
    rows = (tmp_path / "q" / "ineq_report.csv").read_text().splitlines()
    assert rows[0].startswith("inequality_id") and len(rows) == 1 + 5
    assert "tint" in capsys.readouterr().out


def test_linear_command(tmp_path):
    cfg = tmp_path / "lin.cfg"
    cfg.write_text("dim = 1\nL = 200\nn = 4096\nt_end = 100\nscheme = flat_dtn\ninit = gaussian\n"
                   "amplitude = 1\nt_first = 0.1\nfit_t_lo = 1\nfit_t_hi = 100\n")
    assert main(["linear", "--config", str(cfg), "--out", str(tmp_path / "l"), "--check"]) == EXIT_OK
    data = np.loadtxt(tmp_path / "l" / "linear_series.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4 and np.all(np.diff(data[:, 1]) <= 0)

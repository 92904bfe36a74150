import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from turing_lab import cli, io
from turing_lab.errors import ConfigError
from turing_lab.spectral import Grid, SpectralField
from turing_lab.verification import ScalingResult

FULL_CONFIG = """
seed = 3

[model]
name = "benchmark_cubic"
params = { cubic = 1.0 }
eta = 0.5

[grid]
d = 1
n = 16

[simulation]
dt = 0.01
t_end = 0.5
snapshot_stride = 10
initial = "pure"
amplitude = 1e-3

[experiment]
theta = 0.1
deltas = [1e-2, 1e-3, 1e-4]
samples = 20
dt = 0.01

[scan]
combine = "product"
[scan.params]
D1 = [0.5, 1.0]
D2 = [20.0, 40.0]

[output]
dir = "unused"
"""


# ---- CSV -------------------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_cells_round_trip(x):
    assert float(io.fmt(x)) == x


def test_cell_formatting():
    assert io.fmt(None) == ""
    assert io.fmt(True) == "true"
    assert io.fmt(np.int64(3)) == "3"
    assert io.fmt(0.1) == "0.1"


def test_csv_round_trip(tmp_path):
    path = io.write_csv(tmp_path / "a" / "t.csv", ("x", "y"), [(1, 0.5), (2, None)])
    header, rows = io.read_csv(path)
    assert header == ["x", "y"] and rows == [["1", "0.5"], ["2", ""]]
    assert path.read_bytes().endswith(b"\n") and b"\r" not in path.read_bytes()


def test_coefficient_rows():
    g = Grid(2, 4)
    c = np.arange(32, dtype=float).reshape(2, 4, 4)
    rows = list(io.coefficient_rows(SpectralField(g, c)))
    assert io.coefficient_header(2) == ("q1", "q2", "w_u", "w_v")
    assert rows[5] == (1, 1, 5.0, 21.0)


# ---- snapshots -------------------------------------------------------------

@pytest.mark.parametrize("d, n", [(1, 8), (2, 4), (3, 4)])
def test_snapshot_round_trip_and_layout(tmp_path, d, n):
    g = Grid(d, n)
    f = SpectralField(g, np.random.default_rng(d).standard_normal((2,) + g.shape))
    path = io.write_snapshot(tmp_path / "s.turf", f, 1.25)
    raw = path.read_bytes()
    assert len(raw) == 32 + 8 * 2 * n ** d
    magic, version, dd, nn, t = struct.unpack("<4sIIId", raw[:24])
    assert (magic, version, dd, nn, t) == (b"TURF", 1, d, n, 1.25)
    assert raw[24:32] == bytes(8)
    u_first = struct.unpack("<d", raw[32:40])[0]
    assert u_first == f.values[(0,) + (0,) * d]
    t_back, back = io.read_snapshot(path)
    assert t_back == 1.25
    assert np.abs(back.values - f.values).max() <= 1e-12
    assert np.abs(back.coeffs - f.coeffs).max() <= 1e-12


def test_snapshot_rejects_corruption(tmp_path):
    f = SpectralField.zeros(Grid(1, 4))
    path = io.write_snapshot(tmp_path / "s.turf", f, 0.0)
    raw = path.read_bytes()
    (tmp_path / "bad.turf").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        io.read_snapshot(tmp_path / "bad.turf")
    (tmp_path / "short.turf").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        io.read_snapshot(tmp_path / "short.turf")


# ---- configuration ---------------------------------------------------------

def test_full_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(FULL_CONFIG)
    cfg = io.load_config(p)
    assert cfg.seed == 3 and cfg.out == "unused"
    assert cfg.model.name == "benchmark_cubic" and cfg.model.params == {"cubic": 1.0}
    assert cfg.experiment.deltas == (1e-2, 1e-3, 1e-4)
    assert len(io.scan_points(cfg.scan)) == 4


@pytest.mark.parametrize("text, match", [
    ("[grid]\nsize = 3\n", "grid.size"),
    ("[grid]\nn = 12\n", "grid.n"),
    ("[simulation]\nscheme = 'euler'\n", "simulation.scheme"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[grid\n", "line 1"),
    ("[simulation]\ndealias = 1\n", "simulation.dealias"),
    ("[model]\nf = 'U'\n", "expression"),
])
def test_config_errors(tmp_path, text, match):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match):
        io.load_config(p)


def test_scan_points_zip_and_empty():
    assert io.scan_points(io.ScanSection("zip", {"a": [1, 2], "b": [3, 4]})) == [{"a": 1, "b": 3}, {"a": 2, "b": 4}]
    assert io.scan_points(io.ScanSection("product", {"a": []})) == []
    with pytest.raises(ConfigError):
        io.scan_points(io.ScanSection("zip", {"a": [1, 2], "b": [3]}))


def test_expression_model_config():
    cfg = io.config_from_dict({"model": {"name": "schnak", "f": "a - U + U**2*V", "g": "b - U**2*V",
                                         "D1": 1.0, "D2": 40.0, "params": {"a": 0.1, "b": 0.9},
                                         "guess": [1.0, 1.0]}})
    system = io.build_system(cfg.model)
    assert system.steady_state == pytest.approx((1.0, 0.9), abs=1e-12)


# ---- command line ----------------------------------------------------------

def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_benchmark(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "analyze", "--model", "benchmark", "--out", str(tmp_path))
    assert code == 0
    assert "lambda_max: 0.25260" in out and "omega_max: {(1)}" in out
    header, rows = io.read_csv(tmp_path / "dispersion.csv")
    assert header == list(io.DISPERSION_HEADER) and len(rows) == 201
    assert (tmp_path / "modes.csv").exists()


def test_analyze_schnakenberg_runs(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "analyze", "--model", "schnakenberg", "--out", str(tmp_path))
    assert code == 0 and "turing_unstable:" in out


def test_analyze_equal_diffusivities_fails_cleanly(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[model]\nname = "benchmark"\nparams = {D1 = 1.0, D2 = 1.0}\n')
    code, _, err = run_cli(capsys, "analyze", "--config", str(p), "--out", str(tmp_path))
    assert code == 1 and "EqualDiffusivities" in err


def test_missing_model_is_config_error(tmp_path, capsys):
    code, _, err = run_cli(capsys, "analyze", "--model", "nope", "--out", str(tmp_path))
    assert code == 1 and "unknown model" in err


def test_scan_matches_known_witnesses(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[model]\nname = "benchmark"\n[scan]\ncombine = "zip"\n[scan.params]\nD1 = [0.5, 1.0]\nD2 = [20.0, 40.0]\n')
    assert run_cli(capsys, "scan", "--config", str(p), "--out", str(tmp_path))[0] == 0
    header, rows = io.read_csv(tmp_path / "scan.csv")
    assert header == ["D1", "D2", "rest_stable", "turing_unstable", "lambda_max", "omega_max_count"]
    assert rows[0][:4] == ["0.5", "20.0", "true", "true"] and float(rows[0][4]) == pytest.approx(0.252604, abs=1e-6)
    assert rows[1] == ["1.0", "40.0", "true", "false", "", "0"]


def test_scan_single_point_agrees_with_analyze(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[model]\nname = "benchmark"\n[scan.params]\nD2 = [20.0]\n')
    run_cli(capsys, "scan", "--config", str(p), "--out", str(tmp_path))
    run_cli(capsys, "analyze", "--config", str(p), "--out", str(tmp_path))
    _, rows = io.read_csv(tmp_path / "scan.csv")
    report = (tmp_path / "analysis.txt").read_text()
    assert f"lambda_max: {rows[0][3]}" in report


def test_empty_scan_is_header_only(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[scan.params]\nD2 = []\n')
    assert run_cli(capsys, "scan", "--config", str(p), "--out", str(tmp_path))[0] == 0
    assert (tmp_path / "scan.csv").read_text() == "D2,rest_stable,turing_unstable,lambda_max,omega_max_count\n"


def test_simulate_t_end_zero(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "simulate", "--model", "benchmark_cubic", "--t-end", "0",
                           "--grid-n", "16", "--out", str(tmp_path))
    assert code == 0
    _, rows = io.read_csv(tmp_path / "snapshots.csv")
    assert len(rows) == 1
    t, f = io.read_snapshot(tmp_path / rows[0][2])
    assert t == 0.0 and f.l2() == pytest.approx(1e-3)


def test_simulate_validity_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[model]\nname = "benchmark_cubic"\n[grid]\nn = 16\n[simulation]\namplitude = 0.3\n'
                 't_end = 40.0\ndt = 0.01\ninitial = "pure"\nsnapshots = false\n')
    code, _, err = run_cli(capsys, "simulate", "--config", str(p), "--out", str(tmp_path))
    assert code == 2 and "exceeds validity radius" in err


def test_outputs_are_deterministic(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[model]\nname = "benchmark_cubic"\n[grid]\nn = 16\n[simulation]\nt_end = 1.0\n'
                 'initial = "random"\namplitude = 1e-2\n')
    for sub in ("a", "b"):
        assert run_cli(capsys, "simulate", "--config", str(p), "--seed", "11", "--out", str(tmp_path / sub))[0] == 0
    for name in ("diagnostics.csv", "final_coefficients.csv", "snapshots.csv", "snapshot_00000.turf"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run_cli(capsys, "simulate", "--config", str(p), "--seed", "12", "--out", str(tmp_path / "c"))
    assert (tmp_path / "c" / "final_coefficients.csv").read_bytes() != (tmp_path / "a" / "final_coefficients.csv").read_bytes()


VERIFY_SMALL = ('[model]\nname = "benchmark_cubic"\n[grid]\nn = 16\n'
                '[experiment]\ndeltas = [1e-2, 1e-3, 1e-4]\nsamples = 40\ndt = 0.01\n')


def test_verify_small_sweep(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text(VERIFY_SMALL)
    code, out, _ = run_cli(capsys, "verify", "--config", str(p), "--out", str(tmp_path))
    assert code == 0, out
    assert out.count("PASS") == 4
    header, rows = io.read_csv(tmp_path / "deviation_nonlinear.csv")
    assert header == list(io.DEVIATION_HEADER) and len(rows) == 3 * 41


def test_verify_acceptance_failure_exit_code(tmp_path, capsys, monkeypatch):
    p = tmp_path / "c.toml"
    p.write_text(VERIFY_SMALL + "linear_check = false\n")
    failed = ScalingResult((1e-2, 1e-3, 1e-4), (1.0, 1.0, 9.0), 9.0, 9.0, (0, 0, 0), (0, 0, 0), True, False)
    monkeypatch.setattr(cli, "scaling_study", lambda rep, **kw: failed)
    code, out, _ = run_cli(capsys, "verify", "--config", str(p), "--out", str(tmp_path))
    assert code == 3 and "FAIL deviation_scaling" in out


def test_flag_overrides(tmp_path):
    args = cli.build_parser().parse_args(["verify", "--delta", "1e-4", "1e-3", "1e-5", "--theta", "0.2",
                                          "--dt", "0.02", "--grid-n", "32", "--seed", "9", "--out", "x"])
    cfg = cli.apply_overrides(io.RunConfig(), args)
    assert cfg.experiment.deltas == (1e-3, 1e-4, 1e-5)
    assert (cfg.experiment.theta, cfg.experiment.dt, cfg.grid.n, cfg.seed, cfg.out) == (0.2, 0.02, 32, 9, "x")
    with pytest.raises(ConfigError):
        cli.apply_overrides(io.RunConfig(), cli.build_parser().parse_args(["analyze", "--grid-n", "10"]))

import math
import os

import numpy as np
import pytest

from hdivles import appio, cli, fespace as fes, timestepping as ts
from hdivles.appio import (ConfigError, RunConfig, format_config,
                           parse_config, read_snapshot, read_spectrum,
                           read_timeseries, write_snapshot, write_timeseries)
from hdivles.cases import lattice2d
from hdivles.diagnostics import DiagnosticsRecord

MINIMAL = """
case = lattice2d
nu = 1e-2
k = 2
N = 8
dt = 1e-3
t_end = 0.1
"""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_minimal_config_applies_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.case == "lattice2d"
    assert cfg.cells == (8,)
    assert cfg.resolved_sigma() == 36.0       # 4 (k+1)^2
    assert cfg.scheme == "bdf2"
    assert cfg.record_every == 1


def test_parse_paper_style_config():
    text = "case = lattice2d\nnu = 1e-6\nk = 8\nN = 8\ndt = 1e-3\nt_end = 50\n"
    cfg = parse_config(text)
    assert cfg.k == 8 and cfg.nu == 1e-6 and cfg.dt == 1e-3


def test_parse_rejects_unknown_key_with_line():
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL + "viscosity = 2\n")
    assert "viscosity" in str(err.value)
    assert "line 8" in str(err.value)


def test_parse_rejects_negative_dt_naming_field():
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL.replace("dt = 1e-3", "dt = -1e-3"))
    assert "'dt'" in str(err.value)


def test_parse_rejects_missing_required_field():
    with pytest.raises(ConfigError) as err:
        parse_config("case = lattice2d\nnu = 1e-2\nk = 2\nN = 8\ndt = 1e-3\n")
    assert "'t_end'" in str(err.value)


def test_parse_rejects_type_mismatch_and_duplicates():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.replace("k = 2", "k = two"))
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "k = 3\n")


def test_config_round_trip():
    cfg = parse_config(MINIMAL + "sigma = 17.5\nseed = 3\n")
    assert parse_config(format_config(cfg)) == cfg
    cfg2 = RunConfig(case="tgv3d", k=1, cells=(8, 8, 8), dt=2.5e-2,
                     t_end=14.0, re=1600.0, scheme="be", seed=11,
                     out_dir="runs/tgv")
    assert parse_config(format_config(cfg2)) == cfg2
    cfg3 = parse_config(MINIMAL.replace("N = 8", "N = 8,4"))
    assert cfg3.cells == (8, 4)
    assert parse_config(format_config(cfg3)) == cfg3


# ---------------------------------------------------------------------------
# CSV time series
# ---------------------------------------------------------------------------

def test_timeseries_zero_record_and_header(tmp_path):
    rec = DiagnosticsRecord(t=0.0, ke=0.0, enstrophy=0.0, palinstrophy=0.0,
                            eps_visc=0.0, eps_upw=0.0, dke_dt=0.0,
                            budget_residual=0.0, div_max=0.0,
                            err_l2=0.0, err_h1=0.0)
    path = tmp_path / "ts.csv"
    write_timeseries([rec], path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("t,ke,enstrophy,palinstrophy,eps_visc,eps_upw,"
                        "dke_dt,budget_residual,div_max,err_l2,err_h1")
    assert lines[1] == ",".join(["0.0"] * 11)


def test_timeseries_round_trip_full_precision(tmp_path):
    recs = [
        DiagnosticsRecord(t=0.1 / 3, ke=math.pi, enstrophy=1e-17,
                          palinstrophy=8.0 * math.pi ** 2,
                          eps_visc=2.0 / 7, eps_upw=1.2345678901234567e-11,
                          dke_dt=-3.3, budget_residual=4.4e-14,
                          div_max=5e-16, err_l2=math.nan, err_h1=math.nan),
        DiagnosticsRecord(t=0.2, ke=0.5, enstrophy=1.0, palinstrophy=2.0,
                          eps_visc=0.1, eps_upw=0.0, dke_dt=0.0,
                          budget_residual=0.0, div_max=0.0,
                          err_l2=1e-3, err_h1=2e-2),
    ]
    path = tmp_path / "ts.csv"
    write_timeseries(recs, path)
    back = read_timeseries(path)
    for a, b in zip(recs, back):
        assert np.allclose(a.astuple(), b.astuple(), rtol=0, atol=0,
                           equal_nan=True)


def test_timeseries_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_timeseries([], tmp_path / "empty.csv")


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def test_snapshot_constant_field(tmp_path):
    case = lattice2d(1e-2)
    prob = ts.discretize(case, k=1, cells=4)
    u = fes.interpolate_velocity(prob.vel,
                                 lambda x: np.tile([0.5, -0.25], (len(x), 1)))
    st = ts.FieldState(t=1.5, u=u, p=np.zeros(prob.ops.n_p))
    path = tmp_path / "snap.hdiv"
    header = write_snapshot(prob.vel, st, (8, 8), path)
    hdr, fields = read_snapshot(path)
    assert hdr["t"] == 1.5
    assert hdr["m"] == [8, 8]
    assert np.abs(fields["u1"] - 0.5).max() <= 1e-13
    assert np.abs(fields["u2"] + 0.25).max() <= 1e-13
    assert np.abs(fields["omega"]).max() <= 1e-12


def test_snapshot_round_trip_matches_samples(tmp_path):
    case = lattice2d(1e-2)
    prob = ts.discretize(case, k=2, cells=4)
    m = tuple(n * (prob.vel.k + 1) for n in prob.mesh.cells_per_axis)
    path = tmp_path / "snap.hdiv"
    header = write_snapshot(prob.vel, prob.state0, m, path)
    assert header["m"] == list(m)              # default sampling N (k+1)
    _, fields = read_snapshot(path)
    _, vals = fes.sample_velocity(prob.vel, prob.state0.u, m)
    assert np.abs(fields["u1"] - vals[..., 0]).max() <= 1e-12
    assert np.abs(fields["u2"] - vals[..., 1]).max() <= 1e-12


def test_snapshot_magic_is_checked(tmp_path):
    path = tmp_path / "bogus.hdiv"
    path.write_bytes(b"NOTAFILE\n{}\n")
    with pytest.raises(ValueError):
        read_snapshot(path)


# ---------------------------------------------------------------------------
# runs, manifests, determinism
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run_cfg():
    return RunConfig(case="lattice2d", k=1, cells=(4,), dt=2e-3, t_end=1e-2,
                     nu=1e-2, scheme="be", record_every=1, snapshot_every=5,
                     spectrum_every=5, seed=1)


def test_execute_run_writes_outputs_and_manifest(tmp_path, small_run_cfg):
    out = tmp_path / "run1"
    appio.execute_run(small_run_cfg, out_dir=out)
    manifest = appio.read_manifest(out)
    assert manifest["config"]["case"] == "lattice2d"
    assert manifest["config"]["sigma"] == 16.0   # default echoed
    assert manifest["config"]["record_every"] == 1
    recs = read_timeseries(out / "timeseries.csv")
    assert len(recs) == 6
    for name in manifest["files"]["snapshots"]:
        assert (out / name).exists()
    spec = read_spectrum(out / manifest["files"]["spectra"][0])
    assert abs(spec.energy.sum() - spec.grid_ke) <= 1e-6 * spec.grid_ke


def test_runs_are_bit_deterministic(tmp_path, small_run_cfg):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    appio.execute_run(small_run_cfg, out_dir=out1)
    appio.execute_run(small_run_cfg, out_dir=out2)
    assert (out1 / "timeseries.csv").read_bytes() == (out2 / "timeseries.csv").read_bytes()


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_cli_run_and_bad_usage(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(MINIMAL.replace("t_end = 0.1", "t_end = 2e-3")
                        + f"out_dir = {tmp_path / 'out'}\n")
    assert cli.cli_main(["run", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "manifest.json").exists()

    with pytest.raises(SystemExit) as exc:
        cli.cli_main(["frobnicate"])
    assert exc.value.code == 2

    bad = tmp_path / "bad.cfg"
    bad.write_text("case = lattice2d\nwat = 1\n")
    assert cli.cli_main(["run", "--config", str(bad)]) == 1


def test_cli_convergence_table(tmp_path, capsys):
    out = tmp_path / "orders.csv"
    code = cli.cli_main([
        "convergence", "--case", "lattice2d", "--orders", "1",
        "--cells", "2,4", "--nu", "1e-2", "--dt", "2e-3",
        "--t-end", "0.01", "-o", str(out)])
    assert code == 0
    text = out.read_text().splitlines()
    assert text[0] == "k,N,err_l2,order"
    assert len(text) == 3


def test_cli_sweep_over_viscosities(tmp_path):
    cfg_path = tmp_path / "base.cfg"
    cfg_path.write_text(
        "case = lattice2d\nnu = 1e-2\nk = 1\nN = 4\ndt = 2e-3\nt_end = 4e-3\n"
        f"out_dir = {tmp_path / 'sweep'}\n")
    code = cli.cli_main(["sweep", "--config", str(cfg_path),
                         "--nus", "1e-2,1e-3"])
    assert code == 0
    summary = (tmp_path / "sweep" / "sweep_summary.csv").read_text().splitlines()
    assert summary[0] == "nu,ke_final,eps_visc_final,eps_upw_final"
    assert len(summary) == 3
    assert (tmp_path / "sweep" / "nu_1e-3" / "manifest.json").exists()


def test_cli_stats_on_laminar_channel(tmp_path):
    cfg = RunConfig(case="channel_laminar", k=2, cells=(2, 8, 2), dt=5e-3,
                    t_end=1e-2, nu=1.0, F=1.0, H=1.0, scheme="be",
                    snapshot_every=1, out_dir=str(tmp_path / "chan"))
    appio.execute_run(cfg)
    code = cli.cli_main(["stats", "--run-dir", str(tmp_path / "chan"),
                         "--window", "0:1"])
    assert code == 0
    lines = (tmp_path / "chan" / "channel_stats.csv").read_text().splitlines()
    assert lines[1].startswith("x2,y_plus,u_mean,u_plus")
    # the run starts from the exact laminar profile and stays there, so the
    # averaged profile matches the closed form
    rows = np.array([[float(t) for t in ln.split(",")] for ln in lines[2:]])
    x2, u_mean = rows[:, 0], rows[:, 2]
    assert np.abs(u_mean - (1 - x2 ** 2) / 2).max() <= 1e-9

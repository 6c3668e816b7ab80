import json
import subprocess
import sys

import numpy as np
import pytest

from bec_reflection import cli, pipeline
from bec_reflection.config import CACHE_ENV, ConfigError, RunConfig, build_config, dump_config, parse_pairs
from bec_reflection.io import read_csv, write_csv

# a coarse configuration that keeps every pipeline under a few seconds
SMALL = [
    "--set", "spectral_kmax=40", "--set", "inner_kmax=40", "--set", "inner_dk=0.5",
    "--set", "external_grid=0:10:0.5,10:40:5",
]
SMALL_GPE = [
    "--set", "x_max=4", "--set", "dx=1/128", "--set", "dtau=1e-4", "--set", "horizon=0.1",
    "--set", "tau_step=0.01", "--set", "t_skip=0.02", "--set", "t_end=0.1",
]


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.delenv(CACHE_ENV, raising=False)
    cache = tmp_path / "cache"

    def _run(*argv, out="out", cache_dir=cache):
        args = list(argv) + ["--out", str(tmp_path / out)]
        if cache_dir is not None:
            args += ["--cache", str(cache_dir)]
        return cli.main(args), tmp_path / out
    return _run


def test_parse_pairs_and_comments():
    vals = parse_pairs(["# comment", "sigma = 20  # trailing", "", "multi_seed = no", "dx = 1/256", "max_iter=7"])
    assert vals == {"sigma": 20.0, "multi_seed": False, "dx": 1 / 256, "max_iter": 7}
    with pytest.raises(ConfigError):
        parse_pairs(["nonsense"])
    with pytest.raises(ConfigError):
        parse_pairs(["not_a_key = 1"])
    with pytest.raises(ConfigError):
        parse_pairs(["sigma = abc"])


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("sigma = 20\ngamma = 0.3\ncache = from_file\n")
    env = {CACHE_ENV: "from_env"}
    cfg = build_config(preset="paper", config_path=path, environ=env)
    assert (cfg.sigma, cfg.gamma, cfg.a, cfg.cache) == (20.0, 0.3, 5.0, "from_env")
    cfg = build_config(preset="paper", config_path=path, set_pairs=["gamma=0.1", "cache=from_set"],
                       flags={"gamma": "0.2"}, environ=env)
    assert (cfg.gamma, cfg.cache) == (0.2, "from_set")
    assert build_config(environ={}).gamma == 0.0
    assert build_config(preset="paper", environ={}).gamma == 0.5


def test_dump_round_trip(tmp_path):
    cfg = build_config(preset="paper", set_pairs=["dx=1/256", "multi_seed=false"], environ={})
    path = tmp_path / "dump.cfg"
    path.write_text(dump_config(cfg))
    assert build_config(config_path=path, environ={}) == cfg


@pytest.mark.parametrize("pairs", [["sigma=-1"], ["gamma=-0.5"], ["dx=0.3"], ["inner_kmax=300"],
                                   ["t_end=0.9"], ["kernel=spline"], ["external_grid=0:10:1"]])
def test_invalid_config(pairs):
    with pytest.raises(ConfigError):
        build_config(set_pairs=pairs, environ={})


def test_csv_precision(tmp_path):
    value = 0.1234567890123456
    path = write_csv(tmp_path / "x.csv", ["a", "b"], [[value, 1e-300], [np.pi, 2.0]])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    first = lines[1].split(",")[0]
    assert len(first.replace("0.", "", 1).lstrip("0")) >= 12
    header, data = read_csv(path)
    assert header == ["a", "b"]
    assert data[0, 0] == value and data[0, 1] == np.pi


def test_fig1_gamma_zero(run):
    rc, out = run("fig1", *SMALL)
    assert rc == 0
    header, data = read_csv(out / "fig1_linewidth.csv")
    assert header == ["kappa", "Gamma"]
    assert np.all(data[:, 1] == 0.0)


def test_fig1_warm_cache(run, capsys):
    rc, out = run("fig1", "--preset", "paper", *SMALL)
    assert rc == 0
    meta = json.loads((out / "fig1_linewidth.meta.json").read_text())
    assert meta["vertex_cache_hit"] is False
    assert meta["diagnostics"]["converged"] and meta["diagnostics"]["residual"] <= 1e-8
    first = (out / "fig1_linewidth.csv").read_bytes()
    rc, out2 = run("fig1", "--preset", "paper", *SMALL, out="out2")
    meta = json.loads((out2 / "fig1_linewidth.meta.json").read_text())
    assert meta["vertex_cache_hit"] is True
    assert (out2 / "fig1_linewidth.csv").read_bytes() == first


def test_linewidth_alias(run):
    rc, out = run("linewidth", "--gamma", "0.25", *SMALL)
    assert rc == 0
    _, data = read_csv(out / "linewidth_gamma0.25.csv")
    assert data[0, 1] > 0


def test_exit_code_config(run, capsys):
    rc, _ = run("fig1", "--gamma", "-1")
    assert rc == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    rc, _ = run("fig1", "--config", "/nonexistent/file.cfg")
    assert rc == cli.EXIT_CONFIG


def test_exit_code_nonconvergence(run, capsys):
    rc, _ = run("fig1", "--preset", "paper", *SMALL, "--set", "max_iter=2")
    assert rc == cli.EXIT_NONCONVERGENCE
    assert "residual" in capsys.readouterr().err


def test_fig3_columns(run):
    rc, out = run("fig3", "--preset", "paper", *SMALL)
    assert rc == 0
    header, data = read_csv(out / "fig3_reflection.csv")
    assert header == ["kappa", "R2_gamma0", "R2_gamma"]
    kappa, free, damped = data.T
    assert kappa[0] == 1e-3
    assert np.allclose(free, np.exp(-4 * kappa / 30), rtol=1e-12, atol=0)
    assert np.all(damped <= free)
    assert damped[0] < 1e-6
    high = kappa >= 30
    assert np.all(np.abs(damped[high] - free[high]) <= 0.05 * free[high])


def test_spectrum_command(run):
    rc, out = run("spectrum", "--a", "5")
    assert rc == 0
    header, data = read_csv(out / "spectrum.csv")
    assert header == ["kappa", "A"]
    assert data.shape == (4001, 2)
    meta = json.loads((out / "spectrum.meta.json").read_text())
    assert meta["parseval_sum"] == pytest.approx(1.0, abs=1e-4)


def test_propagate_command(run):
    rc, out = run("propagate", "--sigma", "30", *SMALL_GPE)
    assert rc == 0
    header, data = read_csv(out / "propagate_sigma30_gamma0.csv")
    assert header == ["tau", "rho"]
    assert data[0, 1] == pytest.approx(1.0, abs=1e-6)
    assert data[-1, 1] < data[0, 1]
    meta = json.loads((out / "propagate_sigma30_gamma0.meta.json").read_text())
    assert meta["propagator"]["dx"] == 1 / 128


def test_fig2_plumbing(run, capsys):
    rc, out = run("fig2", "--preset", "paper", *SMALL, *SMALL_GPE)
    assert rc == 0
    printed = capsys.readouterr().out
    assert printed.count("->") == 2
    for name in ("fig2_numeric_gamma0", "fig2_numeric_gamma", "fig2_analytic_gamma0", "fig2_analytic_gamma"):
        header, data = read_csv(out / f"{name}.csv")
        assert header[0] == "tau" and data.shape == (11, 2)
    header, report = read_csv(out / "fig2_report.csv")
    assert header == ["tau", "rel_dev_gamma0", "rel_dev_gamma"]
    # transient before t_skip is excluded from the report window
    assert report[0, 0] == pytest.approx(0.02) and report[-1, 0] == pytest.approx(0.1)
    summary = json.loads((out / "fig2_report.json").read_text())
    assert set(summary["curves"]) == {"gamma0", "gamma"}
    assert summary["passed"] == all(c["passed"] for c in summary["curves"].values())


def test_compare_window():
    from bec_reflection.reflection import DecayCurve

    tau = np.array([0.0, 0.01, 0.02, 0.03])
    numeric = DecayCurve(tau, np.array([1.0, 0.5, 0.9, 0.8]), "numeric")
    analytic = DecayCurve(tau, np.array([1.0, 0.9, 0.9, 0.88]), "analytic")
    report = pipeline.compare(numeric, analytic, 0.02, 0.03, 0.1)
    assert report.tau.tolist() == [0.02, 0.03]
    assert report.max_deviation == pytest.approx(0.08 / 0.88)
    assert report.passed
    assert not pipeline.compare(numeric, analytic, 0.0, 0.03, 0.1).passed
    with pytest.raises(ValueError):
        pipeline.compare(numeric, analytic, 0.0, 0.5, 0.1)


def test_sweep_gamma_threshold_ordering(run, capsys):
    rc, out = run("sweep", "--param", "gamma", "--values", "0,0.25,0.5", "--figure", "fig3", *SMALL)
    assert rc == 0
    header, data = read_csv(out / "sweep_summary.csv")
    assert header == ["gamma", "failed", "R2_threshold"]
    assert np.all(data[:, 1] == 0)
    assert np.all(np.diff(data[:, 2]) <= 0)
    for g in ("0", "0.25", "0.5"):
        assert (out / f"gamma_{g}" / "fig3_reflection.csv").exists()
        assert (out / f"gamma_{g}" / "config.txt").exists()


def test_single_value_sweep_matches_command(run):
    rc, single = run("fig3", "--gamma", "0.5", *SMALL, out="single")
    rc2, swept = run("sweep", "--param", "gamma", "--values", "0.5", *SMALL, out="swept")
    assert rc == rc2 == 0
    assert (swept / "gamma_0.5" / "fig3_reflection.csv").read_bytes() == (single / "fig3_reflection.csv").read_bytes()


def test_sweep_failure_continues(run, capsys):
    rc, out = run("sweep", "--param", "gamma", "--values", "0,0.5", *SMALL, "--set", "max_iter=2")
    assert rc == cli.EXIT_SWEEP_FAILED
    _, data = read_csv(out / "sweep_summary.csv")
    assert data[:, 1].tolist() == [0.0, 1.0]
    meta = json.loads((out / "sweep.meta.json").read_text())
    assert list(meta["errors"]) == ["gamma_0.5"]
    assert "FAILED" in capsys.readouterr().out


def test_sweep_workers_deterministic(run):
    rc1, serial = run("sweep", "--param", "sigma", "--values", "20,30", "--gamma", "0.5", *SMALL, out="serial")
    rc2, parallel = run("sweep", "--param", "sigma", "--values", "20,30", "--gamma", "0.5", "--workers", "2",
                        *SMALL, out="parallel")
    assert rc1 == rc2 == 0
    for tag in ("sigma_20", "sigma_30"):
        assert (serial / tag / "fig3_reflection.csv").read_bytes() == (parallel / tag / "fig3_reflection.csv").read_bytes()


def test_env_cache_override(run, tmp_path, monkeypatch):
    env_cache = tmp_path / "env-cache"
    monkeypatch.setenv(CACHE_ENV, str(env_cache))
    rc, _ = run("fig1", *SMALL, cache_dir=None)
    assert rc == 0
    assert list(env_cache.glob("vertex-*.npz"))


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bec_reflection", "spectrum", "--set", "spectral_kmax=10",
                           "--set", "inner_kmax=10", "--set", "external_grid=0:10:1", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "spectrum.csv").exists()


def test_config_is_frozen():
    cfg = RunConfig()
    with pytest.raises(Exception):
        cfg.sigma = 1.0

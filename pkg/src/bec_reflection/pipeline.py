"""Figure-data pipelines shared by the CLI and parameter sweeps."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from bec_reflection import gpe, io, linewidth, packet, reflection, vertex
from bec_reflection.config import RunConfig, dump_config

log = logging.getLogger(__name__)

DEFAULT_CACHE_DIR = ".bec_reflection_cache"


def cache_dir(cfg: RunConfig):
    return Path(cfg.cache) if cfg.cache else Path(DEFAULT_CACHE_DIR)


def spectral_grid(cfg: RunConfig):
    return packet.default_spectral_grid(cfg.spectral_kmax, cfg.spectral_dk)


def vertex_table(cfg: RunConfig):
    """Load the vertex table from the cache or build it. Returns ``(table, cache_hit)``."""
    return vertex.load_or_build(
        cache_dir(cfg), packet.make_packet(cfg.a),
        vertex.segmented_grid(cfg.external_grid),
        vertex.default_inner_grid(cfg.inner_kmax, cfg.inner_dk),
        kappa_small=cfg.kappa_small, max_entries=cfg.max_table_entries)


def linewidth_profile(cfg: RunConfig, gamma, table=None):
    if table is None:
        table, _ = vertex_table(cfg)
    if gamma == 0:
        return linewidth.solve(table, 0.0)
    kwargs = dict(relaxation=cfg.relaxation, tol=cfg.tol, max_iter=cfg.max_iter, kernel=cfg.kernel)
    if cfg.multi_seed:
        return linewidth.solve_multi_seed(table, gamma, **kwargs)
    seed = linewidth.seed_profile(table.kappa_grid, gamma, cfg.seed_c0, cfg.seed_k0)
    return linewidth.solve(table, gamma, seed=seed, **kwargs)


def _sidecar(cfg, **extra):
    return {"config": cfg.as_dict(), **extra}


def run_fig1(cfg: RunConfig, out, name="fig1_linewidth"):
    out = Path(out)
    table, hit = vertex_table(cfg)
    profile = linewidth_profile(cfg, cfg.gamma, table)
    csv = io.write_csv(out / f"{name}.csv", ["kappa", "Gamma"], [profile.kappa_grid, profile.gamma_values])
    io.write_sidecar(out / f"{name}.meta.json", _sidecar(
        cfg, diagnostics=profile.diagnostics, vertex_table=table.metadata, vertex_cache_hit=hit))
    return {"csv": csv, "profile": profile, "cache_hit": hit}


def run_spectrum(cfg: RunConfig, out):
    spec = packet.tabulate_spectrum(packet.make_packet(cfg.a), spectral_grid(cfg))
    csv = io.write_csv(Path(out) / "spectrum.csv", ["kappa", "A"], [spec.kappa_grid, spec.values])
    io.write_sidecar(Path(out) / "spectrum.meta.json", _sidecar(cfg, parseval_sum=spec.parseval_sum()))
    return {"csv": csv, "spectrum": spec}


def fig3_grid(cfg: RunConfig):
    grid = spectral_grid(cfg)
    return np.concatenate([[cfg.fig3_kappa_min], grid[grid > cfg.fig3_kappa_min]])


def run_fig3(cfg: RunConfig, out, profile=None):
    if profile is None:
        profile = linewidth_profile(cfg, cfg.gamma)
    kappa = fig3_grid(cfg)
    free = reflection.anomalous_reflection(kappa, cfg.sigma, None)
    damped = reflection.anomalous_reflection(kappa, cfg.sigma, profile)
    csv = io.write_csv(Path(out) / "fig3_reflection.csv", ["kappa", "R2_gamma0", "R2_gamma"], [kappa, free, damped])
    io.write_sidecar(Path(out) / "fig3_reflection.meta.json",
                     _sidecar(cfg, linewidth_diagnostics=profile.diagnostics))
    return {"csv": csv, "kappa": kappa, "R2_gamma0": free, "R2_gamma": damped, "profile": profile}


def tau_grid(cfg: RunConfig):
    n = int(round(cfg.horizon / cfg.tau_step))
    return np.round(np.arange(n + 1) * cfg.tau_step, 12)


def run_propagate(cfg: RunConfig, out, gamma=None, name=None):
    gamma = cfg.gamma if gamma is None else gamma
    pcfg = cfg.propagator_config(gamma)
    curve = gpe.decay_curve(packet.make_packet(cfg.a), pcfg, tau_grid(cfg))
    name = name or f"propagate_sigma{cfg.sigma:g}_gamma{gamma:g}"
    csv = io.write_csv(Path(out) / f"{name}.csv", ["tau", "rho"], [curve.tau_grid, curve.density])
    io.write_sidecar(Path(out) / f"{name}.meta.json", _sidecar(
        cfg, propagator=pcfg.as_dict(), scheme="Strang split-step, DST-I kinetic",
        grid={"points": pcfg.n_intervals + 1, "dx": pcfg.dx, "x_max": pcfg.x_max}))
    return {"csv": csv, "curve": curve}


@dataclass
class ComparisonReport:
    """Relative deviation |rho - <rho>| / <rho> over a tau window."""

    tau: np.ndarray
    deviation: np.ndarray
    window: tuple
    tolerance: float
    max_deviation: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.max_deviation = float(np.max(self.deviation)) if self.deviation.size else 0.0
        self.passed = self.max_deviation <= self.tolerance


def compare(numeric, analytic, t_skip, t_end, tolerance) -> ComparisonReport:
    if not np.array_equal(numeric.tau_grid, analytic.tau_grid):
        raise ValueError("numeric and analytic curves are sampled on different tau grids")
    tau = numeric.tau_grid
    lo, hi = tau[0], tau[-1]
    if t_skip < lo or t_end > hi + 1e-12:
        raise ValueError(f"report window [{t_skip}, {t_end}] outside sampled range [{lo}, {hi}]")
    mask = (tau >= t_skip - 1e-12) & (tau <= t_end + 1e-12)
    dev = np.abs(numeric.density[mask] - analytic.density[mask]) / analytic.density[mask]
    return ComparisonReport(tau[mask], dev, (t_skip, t_end), tolerance)


def run_fig2(cfg: RunConfig, out, profile=None):
    """Numeric and analytic decay for (sigma, 0) and (sigma, gamma)."""
    out = Path(out)
    wave = packet.make_packet(cfg.a)
    spec = packet.tabulate_spectrum(wave, spectral_grid(cfg))
    if profile is None:
        profile = linewidth_profile(cfg, cfg.gamma)
    taus = tau_grid(cfg)
    results = {}
    for label, gamma in (("gamma0", 0.0), ("gamma", cfg.gamma)):
        if label == "gamma" and cfg.gamma == 0:
            results[label] = results["gamma0"]
            continue
        prof = None if gamma == 0 else profile
        numeric = gpe.decay_curve(wave, cfg.propagator_config(gamma), taus)
        analytic = reflection.mean_density(spec, cfg.sigma, prof, taus)
        report = compare(numeric, analytic, cfg.t_skip, cfg.t_end, cfg.report_tol)
        results[label] = {"numeric": numeric, "analytic": analytic, "report": report, "gamma": gamma}

    for label, res in results.items():
        io.write_csv(out / f"fig2_numeric_{label}.csv", ["tau", "rho"], [taus, res["numeric"].density])
        io.write_csv(out / f"fig2_analytic_{label}.csv", ["tau", "rho_mean"], [taus, res["analytic"].density])
    r0, r1 = results["gamma0"]["report"], results["gamma"]["report"]
    io.write_csv(out / "fig2_report.csv", ["tau", "rel_dev_gamma0", "rel_dev_gamma"], [r0.tau, r0.deviation, r1.deviation])
    summary = {
        label: {"gamma": res["gamma"], "max_deviation": res["report"].max_deviation, "passed": res["report"].passed}
        for label, res in results.items()
    }
    io.write_sidecar(out / "fig2_report.json", _sidecar(
        cfg, window=[cfg.t_skip, cfg.t_end], tolerance=cfg.report_tol, curves=summary,
        passed=all(s["passed"] for s in summary.values()),
        propagator=cfg.propagator_config(cfg.gamma).as_dict(), linewidth_diagnostics=profile.diagnostics))
    return results


FIGURES = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "propagate": run_propagate,
    "spectrum": run_spectrum,
}
SWEEP_PARAMETERS = ("gamma", "sigma", "a")


def sweep_tag(param, value):
    return f"{param}_{value:.12g}"


def _sweep_one(cfg_dict, figure, out):
    cfg = RunConfig(**cfg_dict)
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "config.txt").write_text(dump_config(cfg))
    result = FIGURES[figure](cfg, out)
    summary = {}
    if figure == "fig3":
        summary["R2_threshold"] = float(result["R2_gamma"][0])
    elif figure == "fig1":
        summary["Gamma_max"] = float(np.max(result["profile"].gamma_values))
    return summary


def run_sweep(cfg: RunConfig, param, values, figure, out):
    """Run ``figure`` once per value; failures are recorded and the sweep continues.

    Returns a list of ``(value, error_or_None, summary)`` in input order.
    """
    if param not in SWEEP_PARAMETERS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    out = Path(out)
    jobs = []
    for value in values:
        sub = replace(cfg, **{param: float(value)}).validate()
        jobs.append((float(value), sub.as_dict(), str(out / sweep_tag(param, value))))

    # the vertex table depends on a only; build it up front so workers share the cache
    if param != "a" and figure in ("fig1", "fig2", "fig3"):
        vertex_table(cfg)

    results = []
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_sweep_one, d, figure, o) for _, d, o in jobs]
            for (value, _, _), fut in zip(jobs, futures):
                try:
                    results.append((value, None, fut.result()))
                except Exception as exc:  # noqa: BLE001 - sub-run failures are reported, not fatal
                    results.append((value, exc, {}))
    else:
        for value, d, o in jobs:
            try:
                results.append((value, None, _sweep_one(d, figure, o)))
            except Exception as exc:  # noqa: BLE001
                results.append((value, exc, {}))

    keys = sorted({k for _, _, s in results for k in s})
    rows = [[v, 0.0 if err is None else 1.0] + [s.get(k, np.nan) for k in keys] for v, err, s in results]
    io.write_csv(out / "sweep_summary.csv", [param, "failed"] + keys, list(np.array(rows, dtype=float).T))
    io.write_sidecar(out / "sweep.meta.json", _sidecar(
        cfg, parameter=param, values=[v for v, _, _ in results], figure=figure,
        errors={sweep_tag(param, v): repr(err) for v, err, _ in results if err is not None}))
    return results

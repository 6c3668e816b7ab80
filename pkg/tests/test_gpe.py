from dataclasses import replace

import numpy as np
import pytest

from bec_reflection.errors import DomainError, PropagationError
from bec_reflection.gpe import (
    Absorber,
    GridState,
    PropagatorConfig,
    SplitStepPropagator,
    decay_curve,
    density_inside,
    potential,
    propagate,
)

from conftest import GAMMA, REFINE_TAUS, SIGMA, TAU_GRID

closed = Absorber(enabled=False)


def full_norm(prop):
    return float(np.sum(np.abs(prop.state.psi) ** 2) * prop.config.dx)


@pytest.mark.parametrize("kwargs", [
    dict(sigma=30.0, dx=0.3),
    dict(sigma=30.0, x_max=1.0),
    dict(sigma=30.0, x_max=8.0, absorber=Absorber(start_fraction=0.1)),
    dict(sigma=-1.0),
    dict(sigma=30.0, dtau=0.0),
    dict(sigma=30.0, scheme="lie"),
])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        PropagatorConfig(**kwargs)


def test_potential_layout():
    cfg = PropagatorConfig(sigma=SIGMA)
    v = potential(cfg)
    i_one = round(1 / cfg.dx)
    assert v[i_one - 1] == 0 and v[i_one].real == -SIGMA**2
    x_abs = 0.75 * cfg.x_max
    inside = cfg.x_grid <= x_abs
    assert np.all(v[inside].imag == 0)
    assert v[-1].imag == pytest.approx(-2000.0)


@pytest.mark.parametrize("gamma", [0.0, GAMMA])
def test_norm_conserved_closed_domain(packet5, gamma):
    cfg = PropagatorConfig(sigma=SIGMA, gamma=gamma, x_max=2.0, absorber=closed)
    prop = SplitStepPropagator(cfg, packet5(cfg.x_grid))
    before = full_norm(prop)
    prop.step(1000)
    assert abs(full_norm(prop) - before) < 1e-8


def test_free_norm_conserved_long_run(packet5):
    cfg = PropagatorConfig(sigma=0.0, x_max=2.0, dx=1 / 128, absorber=closed)
    prop = SplitStepPropagator(cfg, packet5(cfg.x_grid))
    before = full_norm(prop)
    prop.step(10_000)
    assert abs(full_norm(prop) - before) < 1e-10


@pytest.mark.parametrize("n", [1, 3, 40])
def test_box_eigenmode_phase(n):
    cfg = PropagatorConfig(sigma=0.0, x_max=2.0, dx=1 / 128, dtau=1e-4, absorber=closed)
    x = cfg.x_grid
    psi0 = np.sin(n * np.pi * x / cfg.x_max)
    prop = SplitStepPropagator(cfg, psi0)
    prop.step(500)
    expected = psi0 * np.exp(-1j * (n * np.pi / cfg.x_max) ** 2 * prop.tau)
    assert np.max(np.abs(prop.state.psi - expected)) < 1e-8


def test_initial_density_is_one(packet5):
    cfg = PropagatorConfig(sigma=SIGMA)
    state = GridState(cfg.x_grid, packet5(cfg.x_grid).astype(complex), 0.0)
    assert abs(density_inside(state) - 1.0) < 1e-8
    curve = decay_curve(packet5, cfg, [0.0])
    assert curve.density.tolist() == [pytest.approx(1.0, abs=1e-8)]
    assert curve.provenance == "numeric"


def test_zero_state_has_zero_density():
    cfg = PropagatorConfig(sigma=SIGMA)
    assert density_inside(GridState(cfg.x_grid, np.zeros(cfg.x_grid.size, complex), 0.0)) == 0.0


def test_origin_regularity(packet5):
    cfg = PropagatorConfig(sigma=SIGMA, gamma=GAMMA)
    (_, state), = propagate(packet5, cfg, [0.01])
    x, psi = state.x_grid, state.psi
    assert psi[0] == 0
    ratio = np.abs(psi[1:20]) ** 2 / x[1:20] ** 2
    assert np.all(np.isfinite(ratio))
    assert ratio.max() < 10 * ratio[0]


def test_nan_detected(packet5):
    cfg = PropagatorConfig(sigma=SIGMA)
    prop = SplitStepPropagator(cfg, packet5(cfg.x_grid))
    prop._u[5] = np.nan
    with pytest.raises(PropagationError):
        prop.check()


def test_norm_growth_detected(packet5):
    cfg = PropagatorConfig(sigma=SIGMA)
    prop = SplitStepPropagator(cfg, packet5(cfg.x_grid))
    prop._u *= 1.001
    with pytest.raises(PropagationError):
        prop.check()


def test_negative_absorber_amplifies_and_is_caught(packet5):
    cfg = PropagatorConfig(sigma=SIGMA, x_max=2.0, absorber=Absorber(strength=2000.0))
    gain = replace(cfg, absorber=closed)
    prop = SplitStepPropagator(gain, packet5(gain.x_grid))
    # flip the imaginary potential into a source
    prop._half_potential = prop._half_potential * np.exp(0.5 * gain.dtau * 50.0)
    prop.step(10)
    with pytest.raises(PropagationError):
        prop.check()


@pytest.mark.parametrize("grid", [[0.1, 0.05], [0.0, 0.6], [0.0, 1.5e-5]])
def test_bad_tau_grid(packet5, grid):
    cfg = PropagatorConfig(sigma=SIGMA)
    with pytest.raises(DomainError):
        list(propagate(packet5, cfg, grid))


def test_snapshots_match_requested_times(packet5):
    cfg = PropagatorConfig(sigma=SIGMA, x_max=2.0, absorber=Absorber(start_fraction=0.75))
    taus = [0.0, 0.001, 0.001, 0.002]
    out = list(propagate(packet5, cfg, taus))
    assert [t for t, _ in out] == taus
    assert out[1][1].psi.tobytes() == out[2][1].psi.tobytes()


def test_decay_ordering_on_window(numeric_decay):
    tau = TAU_GRID
    r0, r5 = numeric_decay[0.0].density, numeric_decay[GAMMA].density
    window = (tau >= 0.05) & (tau <= 0.35)
    assert np.all(r5[window] < r0[window])
    assert r0[-1] < r0[0] and r5[-1] < r5[0]
    assert np.all((r0 >= 0) & (r0 <= 1 + 1e-8))


def test_early_time_ordering(numeric_decay):
    tau = TAU_GRID
    r0, r5 = numeric_decay[0.0].density, numeric_decay[GAMMA].density
    early = (tau > 0) & (tau <= 0.35)
    violations = tau[early][r5[early] > r0[early]]
    assert violations.size == 0, f"interacting density above free density at tau={violations.tolist()}"


def test_envelope_decreases(numeric_decay):
    rho = numeric_decay[0.0].density
    # running maximum over 0.05-wide blocks must decrease block to block
    blocks = rho[10:].reshape(-1, 10).max(axis=1) if rho[10:].size % 10 == 0 else rho[11:].reshape(-1, 10).max(axis=1)
    assert np.all(np.diff(blocks) < 0)


@pytest.mark.slow
def test_self_convergence(numeric_decay, refined_decay):
    idx = np.searchsorted(TAU_GRID, REFINE_TAUS)
    for g in (0.0, GAMMA):
        base = numeric_decay[g].density[idx]
        fine = refined_decay[g].density
        assert abs(fine[-1] - base[-1]) < 1e-3 * fine[-1]


@pytest.mark.slow
def test_absorber_doubling(numeric_decay, wide_decay):
    idx = np.searchsorted(TAU_GRID, REFINE_TAUS)
    for g in (0.0, GAMMA):
        assert np.max(np.abs(wide_decay[g].density - numeric_decay[g].density[idx])) < 1e-4

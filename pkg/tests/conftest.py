from dataclasses import replace

import numpy as np
import pytest

from bec_reflection import gpe, linewidth, packet, vertex

SIGMA = 30.0
GAMMA = 0.5
A_PAPER = 5.0
# fig2 sampling: every 0.005 up to the end of the trusted window
TAU_GRID = np.round(np.arange(0, 71) * 0.005, 12)


@pytest.fixture(scope="session")
def packet5():
    return packet.make_packet(A_PAPER)


@pytest.fixture(scope="session")
def spectrum5(packet5):
    return packet.tabulate_spectrum(packet5, packet.default_spectral_grid())


@pytest.fixture(scope="session")
def cache_root(tmp_path_factory):
    return tmp_path_factory.mktemp("vertex-cache")


@pytest.fixture(scope="session")
def default_table(packet5, cache_root):
    table, _ = vertex.load_or_build(cache_root, packet5, vertex.default_external_grid(), vertex.default_inner_grid())
    return table


@pytest.fixture(scope="session")
def profile05(default_table):
    return linewidth.solve_multi_seed(default_table, GAMMA)


def _config(gamma, **kw):
    return gpe.PropagatorConfig(sigma=SIGMA, gamma=gamma, **kw)


@pytest.fixture(scope="session")
def numeric_decay(packet5):
    """Default-resolution GPE decay for gamma in {0, 0.5}, tau in [0, 0.35]."""
    return {g: gpe.decay_curve(packet5, _config(g), TAU_GRID) for g in (0.0, GAMMA)}


REFINE_TAUS = np.array([0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35])


@pytest.fixture(scope="session")
def refined_decay(packet5):
    """Same runs with dx and dtau halved."""
    base = _config(0.0)
    return {g: gpe.decay_curve(packet5, replace(_config(g), dx=base.dx / 2, dtau=base.dtau / 2), REFINE_TAUS)
            for g in (0.0, GAMMA)}


@pytest.fixture(scope="session")
def wide_decay(packet5):
    """Same runs on a domain twice as long (absorber scaled with it)."""
    return {g: gpe.decay_curve(packet5, _config(g, x_max=2 * gpe.DEFAULT_X_MAX), REFINE_TAUS)
            for g in (0.0, GAMMA)}


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title} ({detail})"
        lines.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

"""Split-step integrator for the scaled radial Gross-Pitaevskii equation

    i d/dtau psi = -psi'' - sigma^2 theta(x - 1) psi + gamma |psi|^2 / x^2 psi

on [0, x_max] with psi(0) = psi(x_max) = 0. The kinetic step is diagonal in
the Dirichlet sine basis (DST-I), the potential and nonlinear steps are
diagonal on the grid; they are combined in symmetric (Strang) order. A
cubic imaginary potential near x_max absorbs the transmitted part.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import dst, idst
from scipy.integrate import simpson

from bec_reflection.errors import DomainError, PropagationError
from bec_reflection.reflection import DecayCurve

log = logging.getLogger(__name__)

DEFAULT_X_MAX = 8.0
DEFAULT_DX = 1.0 / 512
DEFAULT_DTAU = 2e-5
DEFAULT_HORIZON = 0.5
NORM_GROWTH_LIMIT = 1e-6


@dataclass(frozen=True)
class Absorber:
    """Imaginary potential -i W0 ((x - x_abs) / (x_max - x_abs))^power beyond x_abs."""

    start_fraction: float = 0.75
    strength: float = 2000.0
    power: float = 3.0
    enabled: bool = True


@dataclass(frozen=True)
class PropagatorConfig:
    sigma: float
    gamma: float = 0.0
    dx: float = DEFAULT_DX
    dtau: float = DEFAULT_DTAU
    x_max: float = DEFAULT_X_MAX
    absorber: Absorber = field(default_factory=Absorber)
    horizon: float = DEFAULT_HORIZON
    scheme: str = "strang"

    def __post_init__(self):
        if self.sigma < 0 or self.gamma < 0:
            raise DomainError("sigma and gamma must be non-negative")
        if not (self.dx > 0 and self.dtau > 0 and self.horizon > 0):
            raise DomainError("dx, dtau and horizon must be positive")
        if self.x_max <= 1:
            raise DomainError("x_max must exceed 1 so the step lies inside the domain")
        for name, length in (("1", 1.0), ("x_max", self.x_max)):
            n = round(length / self.dx)
            if abs(n * self.dx - length) > 1e-9 * length:
                raise DomainError(f"{name} must be a whole number of grid spacings dx={self.dx}")
        if self.absorber.enabled:
            if self.absorber.start_fraction * self.x_max <= 1 or self.absorber.start_fraction >= 1:
                raise DomainError("absorber must start beyond x = 1 and before x_max")
            if self.absorber.strength < 0:
                raise DomainError("absorber strength must be non-negative")
        if self.scheme != "strang":
            raise DomainError(f"unknown splitting scheme {self.scheme!r}")

    @property
    def n_intervals(self):
        return int(round(self.x_max / self.dx))

    @property
    def x_grid(self):
        return np.linspace(0.0, self.x_max, self.n_intervals + 1)

    def as_dict(self):
        return asdict(self)


@dataclass
class GridState:
    x_grid: np.ndarray
    psi: np.ndarray
    tau: float

    @property
    def dx(self):
        return float(self.x_grid[1] - self.x_grid[0])

    def norm(self):
        """Discrete l2 norm, the quantity the split-step scheme conserves exactly.

        Both walls carry psi = 0, so this is also the trapezoid rule.
        """
        return float(np.sum(self.psi.real**2 + self.psi.imag**2) * self.dx)


def potential(config: PropagatorConfig, x=None):
    """Complex external potential; the step's jump point takes the outside value."""
    x = config.x_grid if x is None else x
    i_step = int(round(1.0 / config.dx))
    v = np.zeros(x.shape, dtype=complex)
    v[i_step:] = -config.sigma**2
    ab = config.absorber
    if ab.enabled and ab.strength > 0:
        x_abs = ab.start_fraction * config.x_max
        ramp = np.clip((x - x_abs) / (config.x_max - x_abs), 0.0, None)
        v = v - 1j * ab.strength * ramp**ab.power
    return v


class SplitStepPropagator:
    """Owns one wavefunction and advances it in steps of ``config.dtau``."""

    def __init__(self, config: PropagatorConfig, psi0):
        self.config = config
        self.x = config.x_grid
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.shape != self.x.shape:
            raise DomainError(f"initial state has shape {psi0.shape}, grid has {self.x.shape}")
        if not np.all(np.isfinite(psi0)):
            raise DomainError("initial state is not finite")
        # interior points only; psi(0) = psi(x_max) = 0 is implied by the sine basis
        self._u = psi0[1:-1].copy()
        self.steps = 0
        dt = config.dtau
        xi = self.x[1:-1]
        self._half_potential = np.exp(-0.5j * dt * potential(config)[1:-1])
        modes = np.arange(1, config.n_intervals) * np.pi / config.x_max
        self._kinetic = np.exp(-1j * dt * modes**2)
        self._half_coupling = 0.5 * dt * config.gamma / xi**2
        self.initial_norm = self.state.norm()

    @property
    def tau(self):
        return self.steps * self.config.dtau

    @property
    def state(self):
        psi = np.zeros(self.x.shape, dtype=complex)
        psi[1:-1] = self._u
        return GridState(self.x, psi, self.tau)

    def _half_step_local(self, u):
        if self.config.gamma:
            u = u * np.exp(-1j * self._half_coupling * (u.real**2 + u.imag**2))
        return u * self._half_potential

    def step(self, n=1):
        u = self._u
        for _ in range(n):
            u = self._half_step_local(u)
            u = idst(self._kinetic * dst(u, type=1, norm="ortho"), type=1, norm="ortho")
            u = self._half_step_local(u)
        self._u = u
        self.steps += n

    def check(self):
        """Raise PropagationError on NaN or on norm growth beyond round-off."""
        if not np.all(np.isfinite(self._u)):
            raise PropagationError(f"non-finite wavefunction at tau={self.tau:.6g}")
        norm = self.state.norm()
        if norm > self.initial_norm * (1.0 + NORM_GROWTH_LIMIT):
            raise PropagationError(
                f"norm grew from {self.initial_norm:.12g} to {norm:.12g} at tau={self.tau:.6g}; "
                "the step is unstable")
        return norm


def initial_wavefunction(initial, x):
    """Sample a packet (or any callable of x) on the grid; arrays pass through."""
    if callable(initial):
        return np.asarray(initial(x), dtype=complex)
    return np.asarray(initial, dtype=complex)


def _step_counts(tau_grid, config):
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or np.any(tau < 0) or np.any(np.diff(tau) < 0):
        raise DomainError("tau_grid must be non-negative and ascending")
    if tau.size and tau[-1] > config.horizon * (1 + 1e-12):
        raise DomainError(f"tau {tau[-1]} beyond configured horizon {config.horizon}")
    steps = np.rint(tau / config.dtau).astype(int)
    if np.any(np.abs(steps * config.dtau - tau) > 1e-9 * np.maximum(1.0, tau)):
        raise DomainError("tau_grid points must be whole multiples of dtau")
    return steps


def propagate(initial, config: PropagatorConfig, tau_grid):
    """Yield ``(tau, GridState)`` at each requested time.

    ``initial`` is a ``WavePacket``, a callable of x, or an array on
    ``config.x_grid``. The packet is zero beyond x = 1 by construction.
    """
    steps = _step_counts(tau_grid, config)
    prop = SplitStepPropagator(config, initial_wavefunction(initial, config.x_grid))
    for target, tau in zip(steps, np.asarray(tau_grid, dtype=float)):
        if target > prop.steps:
            prop.step(target - prop.steps)
        prop.check()
        yield float(tau), prop.state


def density_inside(state: GridState) -> float:
    """rho = integral_0^1 |psi|^2 dx (composite Simpson on the grid points in [0, 1])."""
    dx = state.dx
    i_one = int(round(1.0 / dx))
    if i_one >= state.x_grid.size or abs(state.x_grid[i_one] - 1.0) > 1e-9:
        raise DomainError("grid must contain x = 1")
    return float(simpson(np.abs(state.psi[: i_one + 1]) ** 2, dx=dx))


def decay_curve(initial, config: PropagatorConfig, tau_grid) -> DecayCurve:
    tau = np.asarray(tau_grid, dtype=float)
    rho = np.array([density_inside(state) for _, state in propagate(initial, config, tau)])
    params = config.as_dict()
    return DecayCurve(tau, rho, "numeric", params)

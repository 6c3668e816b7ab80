"""Initial wave packet and its sine-spectral decomposition.

The packet is Psi(x, 0) = N x exp(-a x) on [0, 1] and exactly zero beyond.
It is expanded in the radial sine modes sqrt(2/pi) sin(kappa x), so that
integral |A(kappa)|^2 dkappa over [0, inf) equals the position-space norm.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import gammainc

from bec_reflection.errors import DomainError

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

DEFAULT_SPECTRAL_KMAX = 200.0
DEFAULT_SPECTRAL_DK = 0.05

# below this |z| the closed-form moment of x e^{zx} cancels badly; use its Taylor series
_SERIES_RADIUS = 0.05
_SERIES_TERMS = 12


def _moment(n, c):
    """Integral of x**n * exp(-c x) over [0, 1] for c > 0."""
    return factorial(n) * gammainc(n + 1, c) / c ** (n + 1)


@dataclass(frozen=True)
class WavePacket:
    a: float
    norm_const: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"diffuseness a must be positive, got {self.a!r}")
        if not self.norm_const > 0:
            raise DomainError("normalization constant must be positive")

    def __call__(self, x):
        return evaluate_packet(self, x)

    def amplitude(self, kappa):
        return spectral_amplitude(self, kappa)

    @property
    def edge_value(self):
        """Psi(1), the height of the jump at the support edge."""
        return self.norm_const * np.exp(-self.a)


def make_packet(a: float) -> WavePacket:
    if not (np.isfinite(a) and a > 0):
        raise DomainError(f"diffuseness a must be positive, got {a!r}")
    return WavePacket(a=float(a), norm_const=float(1.0 / np.sqrt(_moment(2, 2.0 * a))))


def evaluate_packet(packet: WavePacket, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("the radial coordinate must be non-negative")
    inside = x <= 1.0
    # np.where would still evaluate exp() outside; the cutoff has to be an exact zero
    out = np.zeros_like(x)
    out[inside] = packet.norm_const * x[inside] * np.exp(-packet.a * x[inside])
    return float(out) if out.ndim == 0 else out


def _x_exp_moment(z):
    """Integral of x exp(z x) over [0, 1], complex z."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_RADIUS
    zb = z[~small]
    out[~small] = (np.exp(zb) * (zb - 1.0) + 1.0) / zb**2
    if np.any(small):
        zs = z[small]
        acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for n in range(_SERIES_TERMS):
            acc += term / (n + 2)
            term = term * zs / (n + 1)
        out[small] = acc
    return out


def spectral_amplitude(packet: WavePacket, kappa):
    """A(kappa) = sqrt(2/pi) * integral_0^1 Psi(x, 0) sin(kappa x) dx, in closed form."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise DomainError("kappa must be non-negative")
    moment = _x_exp_moment(-packet.a + 1j * kappa)
    out = SQRT_2_OVER_PI * packet.norm_const * moment.imag
    return float(out) if out.ndim == 0 else out


def default_spectral_grid(kappa_max=DEFAULT_SPECTRAL_KMAX, dk=DEFAULT_SPECTRAL_DK):
    n = int(round(kappa_max / dk))
    if n < 1 or not np.isclose(n * dk, kappa_max, rtol=1e-12, atol=0):
        raise DomainError(f"kappa_max={kappa_max} is not a multiple of dk={dk}")
    return np.linspace(0.0, kappa_max, n + 1)


@dataclass(frozen=True)
class SpectralAmplitude:
    """A(kappa) tabulated on an increasing momentum grid."""

    kappa_grid: np.ndarray
    values: np.ndarray

    @property
    def kappa_max(self):
        return float(self.kappa_grid[-1])

    def __call__(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        lo, hi = self.kappa_grid[0], self.kappa_grid[-1]
        if np.any(kappa < lo) or np.any(kappa > hi):
            raise DomainError(f"kappa outside tabulated range [{lo}, {hi}]")
        out = np.interp(kappa, self.kappa_grid, self.values)
        return float(out) if out.ndim == 0 else out

    def parseval_sum(self):
        """Trapezoid estimate of integral |A|^2 dkappa over the grid."""
        return float(np.trapezoid(self.values**2, self.kappa_grid))


def check_grid(grid, name="grid"):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d array")
    if not np.all(np.isfinite(grid)):
        raise DomainError(f"{name} contains non-finite values")
    if np.any(np.diff(grid) <= 0):
        raise DomainError(f"{name} must be strictly increasing")
    return grid


def tabulate_spectrum(packet: WavePacket, kappa_grid) -> SpectralAmplitude:
    grid = check_grid(kappa_grid, "kappa_grid")
    if grid[0] < 0:
        raise DomainError("kappa_grid must start at kappa >= 0")
    return SpectralAmplitude(kappa_grid=grid, values=np.asarray(spectral_amplitude(packet, grid), dtype=float))


def parseval_tail(packet: WavePacket, kappa_max: float) -> float:
    """Leading-order weight of |A|^2 beyond kappa_max.

    For large kappa, A ~ -sqrt(2/pi) Psi(1) cos(kappa)/kappa; averaging cos^2
    gives Psi(1)^2 / (pi kappa_max).
    """
    return float(packet.edge_value**2 / (np.pi * kappa_max))


def kinetic_energy(packet: WavePacket) -> float:
    """Scaled kinetic energy, integral_0^1 |dPsi/dx|^2 dx.

    Evaluated in position space on the support only. The momentum-space
    second moment diverges because of the jump at x = 1.
    """
    a = packet.a
    c = 2.0 * a
    # (d/dx) x e^{-ax} = (1 - a x) e^{-ax}
    integral = _moment(0, c) - 2.0 * a * _moment(1, c) + a * a * _moment(2, c)
    return float(packet.norm_const**2 * integral)

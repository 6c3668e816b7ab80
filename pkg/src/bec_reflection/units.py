"""Conversion between atomic units and the dimensionless variables.

Everything downstream runs in scaled units: x = r/L, kappa = k L,
tau = t hbar / (2 m L^2), sigma = L / beta4, gamma = 2 a_int N / L, with
hbar = 1 (atomic units).
"""

from dataclasses import dataclass

import numpy as np

from bec_reflection.errors import DomainError

HBAR = 1.0
#: One atomic unit of time in seconds (CODATA 2018).
AU_TIME_SECONDS = 2.4188843265857e-17
#: Sodium mass in atomic units (22.99 u * 1822.888). See README on the 4.22e5 misprint.
SODIUM_MASS_AU = 4.22e4
PAPER_BETA4 = 1.494e4
PAPER_LENGTH = 4.47e5


@dataclass(frozen=True)
class PhysicalParameters:
    """Laboratory inputs in atomic units."""

    beta4: float
    L: float
    m: float = SODIUM_MASS_AU
    a_int: float = 0.0
    n_particles: float = 0.0

    def __post_init__(self):
        for name in ("beta4", "L", "m"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        for name in ("a_int", "n_particles"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be non-negative, got {value!r}")


@dataclass(frozen=True)
class ScaledParameters:
    sigma: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be non-negative (repulsive only), got {self.gamma!r}")


def to_scaled(phys: PhysicalParameters) -> ScaledParameters:
    return ScaledParameters(
        sigma=phys.L / phys.beta4,
        gamma=2.0 * phys.a_int * phys.n_particles / phys.L,
    )


def _check_mass_length(m, L):
    if not (m > 0 and L > 0):
        raise DomainError(f"mass and length must be positive, got m={m!r}, L={L!r}")


def scaled_time_to_seconds(tau, m=SODIUM_MASS_AU, L=PAPER_LENGTH):
    """Convert scaled time to seconds: t = tau * 2 m L^2 / hbar (a.u.) * AU_TIME_SECONDS."""
    _check_mass_length(m, L)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be non-negative")
    t = tau * (2.0 * m * L**2 / HBAR) * AU_TIME_SECONDS
    return float(t) if t.ndim == 0 else t


def scaled_energy_to_au(energy, m=SODIUM_MASS_AU, L=PAPER_LENGTH):
    """Convert a scaled energy to Hartree: E = E_scaled * hbar^2 / (2 m L^2)."""
    _check_mass_length(m, L)
    energy = np.asarray(energy, dtype=float)
    if not np.all(np.isfinite(energy)):
        raise DomainError("energy must be finite")
    e = energy * HBAR**2 / (2.0 * m * L**2)
    return float(e) if e.ndim == 0 else e

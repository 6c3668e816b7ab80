"""Reflection probabilities and decay laws built on the line width.

All probabilities are |R|^2, not amplitudes:

    |R(kappa; sigma, gamma)|^2 = exp(-4 kappa / sigma) exp(-2 Gamma(kappa) / kappa)

A mode bouncing kappa * tau times survives with |R|^(2 kappa tau), and
the mean inside density is the |A|^2-weighted average of that survival.
"""

from dataclasses import dataclass, field

import numpy as np

from bec_reflection.errors import DomainError


@dataclass
class ReflectionCurve:
    kappa_grid: np.ndarray
    probabilities: np.ndarray
    parameters: dict = field(default_factory=dict)


@dataclass
class DecayCurve:
    tau_grid: np.ndarray
    density: np.ndarray
    provenance: str  # "analytic" or "numeric"
    parameters: dict = field(default_factory=dict)


def _as_out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_sigma(sigma):
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")


def universal_reflection(kappa, sigma):
    """Extended threshold law |R| = exp(-2 kappa / sigma) (amplitude, threshold length 1/sigma)."""
    _check_sigma(sigma)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise DomainError("kappa must be non-negative")
    return _as_out(np.exp(-2.0 * kappa / sigma))


def linear_threshold_reflection(kappa, sigma):
    """|R| = 1 - 2 kappa / sigma, valid for kappa << sigma."""
    _check_sigma(sigma)
    return _as_out(1.0 - 2.0 * np.asarray(kappa, dtype=float) / sigma)


def _gamma_of(profile, kappa):
    if profile is None:
        return np.zeros_like(kappa)
    return np.asarray(profile(kappa), dtype=float)


def anomalous_reflection(kappa, sigma, profile=None):
    """|R(kappa; sigma, gamma)|^2. ``profile=None`` is the gamma = 0 case.

    At kappa = 0 the factor exp(-2 Gamma / kappa) is replaced by its limit:
    0 when Gamma(0) > 0, 1 when Gamma(0) = 0.
    """
    _check_sigma(sigma)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise DomainError("kappa must be non-negative")
    gam = _gamma_of(profile, kappa)
    at_zero = kappa == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        interaction = np.exp(-2.0 * gam / np.where(at_zero, 1.0, kappa))
    interaction = np.where(at_zero, np.where(gam > 0, 0.0, 1.0), interaction)
    return _as_out(np.exp(-4.0 * kappa / sigma) * interaction)


def mode_survival(kappa, tau, sigma, profile=None):
    """|R|^(2 kappa tau) = exp(-4 kappa^2 tau / sigma - 2 Gamma(kappa) tau)."""
    _check_sigma(sigma)
    kappa = np.asarray(kappa, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(kappa < 0) or np.any(tau < 0):
        raise DomainError("kappa and tau must be non-negative")
    gam = _gamma_of(profile, kappa)
    return _as_out(np.exp(-4.0 * kappa**2 * tau / sigma - 2.0 * gam * tau))


def reflection_curve(kappa_grid, sigma, profile=None) -> ReflectionCurve:
    grid = np.asarray(kappa_grid, dtype=float)
    params = {"sigma": sigma, "gamma": 0.0 if profile is None else profile.interaction}
    return ReflectionCurve(grid, np.asarray(anomalous_reflection(grid, sigma, profile)), params)


def mean_density(spectrum, sigma, profile, tau_grid) -> DecayCurve:
    """<rho(tau)> = integral |A(kappa)|^2 |R|^(2 kappa tau) dkappa, trapezoid on the spectral grid."""
    _check_sigma(sigma)
    kappa = spectrum.kappa_grid
    if profile is not None and (kappa[0] < profile.kappa_grid[0] or kappa[-1] > profile.kappa_grid[-1]):
        raise DomainError("line-width profile does not cover the spectral grid")
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or np.any(tau < 0) or np.any(np.diff(tau) < 0):
        raise DomainError("tau_grid must be non-negative and ascending")
    weight = spectrum.values**2
    rate = 4.0 * kappa**2 / sigma + 2.0 * _gamma_of(profile, kappa)
    density = np.array([np.trapezoid(weight * np.exp(-rate * t), kappa) for t in tau])
    params = {"sigma": sigma, "gamma": 0.0 if profile is None else profile.interaction}
    return DecayCurve(tau, density, "analytic", params)

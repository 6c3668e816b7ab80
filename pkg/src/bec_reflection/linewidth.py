"""Self-consistent line width Gamma_gamma(kappa).

The complex equation

    Gamma(k) = i gamma  double-integral  V(k, k1, k2) / (k2^2 - k1^2 + i S),   S = Gamma(k1) + Gamma(k2)

is solved in its real form. Writing i / (D + i S) = (S + i D) / (D^2 + S^2)
with D = k2^2 - k1^2, the D part is odd under k1 <-> k2 while V is even, so
it integrates to zero and only

    Gamma(k) = gamma  double-integral  V S / (D^2 + S^2)

survives. The odd part is still evaluated every iteration as a diagnostic.

For small S the kernel S / (D^2 + S^2) is a Lorentzian in k2 narrower than
the grid spacing, so the default ``"cell"`` quadrature integrates it
analytically over each k2 cell (exactly in D, Jacobian 1/(2 k2) frozen at
the node). ``"pointwise"`` is the plain trapezoid product rule.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from bec_reflection.errors import DegenerateSolutionError, DomainError, NonConvergenceError

log = logging.getLogger(__name__)

S_MIN = 1e-12
DEFAULT_RELAXATION = 0.5
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_SEED_C0 = 1.0
DEFAULT_SEED_K0 = 5.0
MULTI_SEED_SCALES = (0.1, 1.0, 10.0)
# a profile whose sup-norm falls below this while gamma > 0 is the trivial branch
DEGENERATE_FLOOR = 1e-12


@dataclass
class LineWidthProfile:
    kappa_grid: np.ndarray
    gamma_values: np.ndarray
    interaction: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self):
        return bool(self.diagnostics.get("converged", False))

    def __call__(self, kappa):
        """Linear interpolation; extrapolation outside the grid is an error."""
        kappa = np.asarray(kappa, dtype=float)
        lo, hi = self.kappa_grid[0], self.kappa_grid[-1]
        if np.any(kappa < lo) or np.any(kappa > hi):
            raise DomainError(f"kappa outside line-width grid [{lo}, {hi}]")
        out = np.interp(kappa, self.kappa_grid, self.gamma_values)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def zero(cls, kappa_grid):
        """The non-interacting profile, Gamma identically 0."""
        grid = np.asarray(kappa_grid, dtype=float)
        return cls(grid, np.zeros_like(grid), 0.0, {"converged": True, "iterations": 0, "residual": 0.0})


def seed_profile(kappa_grid, gamma, c0=DEFAULT_SEED_C0, kappa0=DEFAULT_SEED_K0):
    """gamma * c0 * exp(-kappa / kappa0)."""
    grid = np.asarray(kappa_grid, dtype=float)
    return LineWidthProfile(grid, gamma * c0 * np.exp(-grid / kappa0), gamma,
                            {"seed": f"gamma*{c0}*exp(-kappa/{kappa0})"})


def _trapezoid_weights(grid):
    w = np.empty_like(grid)
    if grid.size == 1:
        w[0] = 1.0
        return w
    d = np.diff(grid)
    w[0] = 0.5 * d[0]
    w[-1] = 0.5 * d[-1]
    w[1:-1] = 0.5 * (d[:-1] + d[1:])
    return w


def kernel_weights(inner_grid, gamma_inner, kernel="cell", s_min=S_MIN):
    """Quadrature weights for the even and odd parts of the kernel.

    Returns ``(even, odd, floored)``: ``even[j, k]`` multiplies V(k, k1_j, k2_k)
    for the S/(D^2+S^2) part, ``odd[j, k]`` for the D/(D^2+S^2) part;
    ``floored`` reports whether any S was raised to ``s_min``.
    ``even`` is symmetric and ``odd`` antisymmetric to the last bit.
    """
    g = np.asarray(inner_grid, dtype=float)
    gam = np.asarray(gamma_inner, dtype=float)
    S_raw = gam[:, None] + gam[None, :]
    floored = bool(np.any(S_raw < s_min))
    S = np.maximum(S_raw, s_min)
    w = _trapezoid_weights(g)
    k1 = g[:, None]
    k2 = g[None, :]
    D = k2**2 - k1**2

    if kernel == "pointwise":
        denom = D**2 + S**2
        ww = w[:, None] * w[None, :]
        return ww * S / denom, ww * D / denom, floored
    if kernel != "cell":
        raise ValueError(f"unknown kernel {kernel!r}")

    # k2 cell edges: midpoints between nodes, grid ends at the ends
    mid = 0.5 * (g[:-1] + g[1:])
    left = np.concatenate([g[:1], mid])[None, :]
    right = np.concatenate([mid, g[-1:]])[None, :]
    u_lo = left**2 - k1**2
    u_hi = right**2 - k1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = np.where(k2 > 0, 0.5 / k2, 0.0)
        even_cell = jac * (np.arctan2(u_hi, S) - np.arctan2(u_lo, S))
        odd_cell = 0.5 * jac * np.log((u_hi**2 + S**2) / (u_lo**2 + S**2))
    at_origin = np.broadcast_to(k2 == 0, D.shape)
    if np.any(at_origin):
        width = np.broadcast_to(right - left, D.shape)
        denom = D**2 + S**2
        even_cell = np.where(at_origin, width * S / denom, even_cell)
        odd_cell = np.where(at_origin, width * D / denom, odd_cell)
    even = w[:, None] * even_cell
    odd = w[:, None] * odd_cell
    return 0.5 * (even + even.T), 0.5 * (odd - odd.T), floored


def _check_compatible(profile, table):
    inner = table.inner_grid
    if inner[0] < profile.kappa_grid[0] or inner[-1] > profile.kappa_grid[-1]:
        raise DomainError("profile grid does not cover the vertex inner grid")
    if profile.kappa_grid.shape != table.kappa_grid.shape or not np.array_equal(profile.kappa_grid, table.kappa_grid):
        raise DomainError("profile and vertex table use different kappa grids")


def _rhs_parts(gamma_ext, table, gamma, kernel, s_min):
    gamma_inner = np.interp(table.inner_grid, table.kappa_grid, gamma_ext)
    even, odd, floored = kernel_weights(table.inner_grid, gamma_inner, kernel, s_min)
    flat = table.values.reshape(table.values.shape[0], -1)
    return gamma * (flat @ even.ravel()), gamma * (flat @ odd.ravel()), floored


def real_form_rhs(profile: LineWidthProfile, table, gamma, kernel="cell", s_min=S_MIN, return_imag=False):
    """gamma * double-integral V S / (D^2 + S^2) at every external kappa.

    With ``return_imag=True`` also returns the odd part, which must vanish.
    """
    _check_compatible(profile, table)
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    rhs, imag, _ = _rhs_parts(profile.gamma_values, table, gamma, kernel, s_min)
    return (rhs, imag) if return_imag else rhs


def solve(table, gamma, seed=None, relaxation=DEFAULT_RELAXATION, tol=DEFAULT_TOL,
          max_iter=DEFAULT_MAX_ITER, kernel="cell", s_min=S_MIN) -> LineWidthProfile:
    """Damped fixed-point iteration Gamma <- (1 - r) Gamma + r RHS(Gamma).

    ``seed`` is a LineWidthProfile or array on ``table.kappa_grid``; by
    default ``seed_profile``. Convergence means sup |Gamma - RHS(Gamma)| <= tol,
    and the returned values are the iterate that satisfied it.
    """
    grid = table.kappa_grid
    if not gamma >= 0:
        raise DomainError(f"gamma must be non-negative, got {gamma!r}")
    if not 0 < relaxation <= 1:
        raise DomainError("relaxation must lie in (0, 1]")

    if gamma == 0:
        diagnostics = {"converged": True, "iterations": 1, "residual": 0.0, "relaxation": relaxation,
                       "seed": "none (gamma = 0)", "kernel": kernel, "max_imag": 0.0,
                       "s_floor_applied": False, "negative_count": 0, "tol": tol}
        return LineWidthProfile(grid.copy(), np.zeros_like(grid), 0.0, diagnostics)

    if seed is None:
        seed = seed_profile(grid, gamma)
    if isinstance(seed, LineWidthProfile):
        seed_desc = seed.diagnostics.get("seed", "profile")
        current = np.array(seed.gamma_values, dtype=float)
    else:
        seed_desc = "user array"
        current = np.array(seed, dtype=float)
    if current.shape != grid.shape:
        raise DomainError("seed must live on the vertex table's kappa grid")
    if np.any(current <= 0):
        raise DomainError("seed must be strictly positive when gamma > 0")

    max_imag = 0.0
    any_floored = False
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        rhs, imag, floored = _rhs_parts(current, table, gamma, kernel, s_min)
        any_floored |= floored
        max_imag = max(max_imag, float(np.max(np.abs(imag))))
        if not np.all(np.isfinite(rhs)):
            raise NonConvergenceError("line-width iteration produced non-finite values", current, residual)
        residual = float(np.max(np.abs(current - rhs)))
        if np.max(np.abs(rhs)) < DEGENERATE_FLOOR and np.max(np.abs(current)) < DEGENERATE_FLOOR:
            raise DegenerateSolutionError("iteration collapsed onto Gamma == 0", current)
        if residual <= tol:
            break
        current = (1.0 - relaxation) * current + relaxation * rhs
    else:
        raise NonConvergenceError(
            f"line width not converged after {max_iter} iterations (residual {residual:.3e})", current, residual)

    negative = int(np.sum(current < 0))
    if negative:
        log.warning("converged line width is negative at %d grid points", negative)
    if any_floored:
        log.warning("S fell below s_min=%g during the iteration", s_min)
    diagnostics = {
        "converged": True,
        "iterations": iteration,
        "residual": residual,
        "relaxation": relaxation,
        "seed": seed_desc,
        "kernel": kernel,
        "tol": tol,
        "max_imag": max_imag,
        "s_floor_applied": any_floored,
        "negative_count": negative,
    }
    return LineWidthProfile(grid.copy(), current, float(gamma), diagnostics)


def solve_multi_seed(table, gamma, scales=MULTI_SEED_SCALES, rtol=0.01, **kwargs):
    """Solve from several seed scales and compare the converged profiles.

    Returns the profile from the middle seed with ``multi_seed_spread`` (max
    sup-norm difference over the sup-norm of that profile) and
    ``multi_seed_agree`` added to its diagnostics. Disagreement is logged.
    """
    profiles = []
    for scale in scales:
        seed = seed_profile(table.kappa_grid, gamma, c0=scale * DEFAULT_SEED_C0)
        profiles.append(solve(table, gamma, seed=seed if gamma > 0 else None, **kwargs))
    reference = profiles[len(profiles) // 2]
    norm = float(np.max(np.abs(reference.gamma_values)))
    diffs = [float(np.max(np.abs(p.gamma_values - reference.gamma_values))) for p in profiles]
    spread = max(diffs) / norm if norm > 0 else max(diffs)
    reference.diagnostics["multi_seed_scales"] = list(scales)
    reference.diagnostics["multi_seed_spread"] = spread
    reference.diagnostics["multi_seed_agree"] = spread < rtol
    if spread >= rtol:
        log.warning("line-width seeds disagree: relative sup-norm spread %.3e", spread)
    return reference


def interaction_decay(profile: LineWidthProfile, kappa, tau):
    """Survival of the self-interacting part, exp(-2 Gamma(kappa) tau)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be non-negative")
    out = np.exp(-2.0 * np.asarray(profile(kappa)) * tau)
    return float(out) if np.ndim(out) == 0 else out

"""Three-mode vertex V(kappa, kappa1, kappa2) and its precomputed table.

    V = 3 kappa^-2 A(kappa1) A(kappa2) (2/pi) I(kappa, kappa1, kappa2)
    I = integral_0^1 sin^2(kappa x) sin(kappa1 x) sin(kappa2 x) / x^2 dx

I is evaluated in closed form through the sine integral after a
product-to-sum expansion. Where that form loses digits to cancellation
(all arguments small) a panel Gauss-Legendre rule takes over; an adaptive
QUADPACK route is kept as an independent check.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import sici

from bec_reflection.errors import DomainError, ResourceLimitError
from bec_reflection.packet import check_grid

log = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1

#: Below this external momentum the kappa^-2 prefactor is cancelled analytically.
KAPPA_SMALL = 1e-2
#: Closed form is used only when every non-zero argument is at least this large.
CLOSED_FORM_MIN_ARG = 0.2
PANEL_ORDER = 16

DEFAULT_INNER_KMAX = 60.0
DEFAULT_INNER_DK = 0.25
DEFAULT_EXTERNAL_GRID = "0:10:0.25,10:60:1,60:200:5"
DEFAULT_MAX_ENTRIES = 100_000_000


def segmented_grid(spec: str) -> np.ndarray:
    """Grid from ``"start:stop:step,..."`` segments; every stop is included.

    >>> segmented_grid("0:1:0.5,1:3:1").tolist()
    [0.0, 0.5, 1.0, 2.0, 3.0]
    """
    points = []
    for chunk in spec.split(","):
        try:
            start, stop, step = (float(v) for v in chunk.split(":"))
        except ValueError:
            raise DomainError(f"bad grid segment {chunk!r}, expected start:stop:step") from None
        if step <= 0 or stop <= start:
            raise DomainError(f"bad grid segment {chunk!r}")
        n = int(round((stop - start) / step))
        if not np.isclose(start + n * step, stop, rtol=0, atol=1e-9 * max(1.0, abs(stop))):
            raise DomainError(f"segment {chunk!r}: stop is not reached by whole steps")
        seg = start + step * np.arange(n + 1)
        seg[-1] = stop
        if points:
            if not np.isclose(points[-1][-1], start):
                raise DomainError("grid segments must be contiguous")
            seg = seg[1:]
        points.append(seg)
    return check_grid(np.concatenate(points), "segmented grid")


def default_inner_grid(kappa_max=DEFAULT_INNER_KMAX, dk=DEFAULT_INNER_DK):
    return segmented_grid(f"0:{kappa_max}:{dk}")


def default_external_grid():
    return segmented_grid(DEFAULT_EXTERNAL_GRID)


def _F(w):
    """integral_0^1 (1 - cos(w x)) / x^2 dx = |w| Si(|w|) - (1 - cos w)."""
    w = np.abs(w)
    si, _ = sici(w)
    return w * si - (1.0 - np.cos(w))


def _closed_form(kappa, kappa1, kappa2):
    # |p| and paired terms keep the result bit-identical under kappa1 <-> kappa2
    p = np.abs(kappa1 - kappa2)
    q = kappa1 + kappa2
    k2 = 2.0 * kappa
    # sin^2(kx) sin(k1x) sin(k2x) = sum_i c_i cos(w_i x) with sum_i c_i = 0
    return -0.25 * (
        _F(p) - _F(q)
        - 0.5 * _F(k2 + p) - 0.5 * _F(k2 - p)
        + 0.5 * _F(k2 + q) + 0.5 * _F(k2 - q)
    )


def _panel(kappa, kappa1, kappa2, order=PANEL_ORDER, refine=1):
    """Gauss-Legendre on panels no wider than pi / (kappa + kappa1 + kappa2 + 1)."""
    kappa, kappa1, kappa2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, kappa1, kappa2)))
    if kappa.size == 0:
        return np.zeros(kappa.shape)
    freq = float(np.max(kappa + kappa1 + kappa2)) + 1.0
    n_panels = refine * max(1, int(np.ceil(freq / np.pi)))
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    x = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    shape = kappa.shape
    k, k1, k2 = (v.reshape(-1, 1) for v in (kappa, kappa1, kappa2))
    f = np.sin(k * x) ** 2 * (np.sin(k1 * x) * np.sin(k2 * x)) / x**2
    return (f @ w).reshape(shape)


def _adaptive_scalar(kappa, kappa1, kappa2, epsabs, epsrel):
    def f(x):
        if x == 0.0:
            return 0.0
        return np.sin(kappa * x) ** 2 * (np.sin(kappa1 * x) * np.sin(kappa2 * x)) / x**2

    freq = kappa + kappa1 + kappa2 + 1.0
    breaks = np.linspace(0.0, 1.0, max(2, int(np.ceil(freq / np.pi)) + 1))[1:-1]
    value, _ = integrate.quad(f, 0.0, 1.0, points=breaks if breaks.size else None,
                              limit=2000, epsabs=epsabs, epsrel=epsrel)
    return value


def vertex_integral(kappa, kappa1, kappa2, method="auto", tol=1e-12):
    """I(kappa, kappa1, kappa2) = integral_0^1 sin^2(kappa x) sin(kappa1 x) sin(kappa2 x) / x^2 dx.

    ``method`` is ``"auto"`` (closed form, panel rule where the closed form
    cancels), ``"closed"``, ``"panel"`` or ``"adaptive"``. ``tol`` only
    affects the adaptive route. The integrand behaves like
    kappa^2 kappa1 kappa2 x^2 at the origin, so no singular handling is needed.
    """
    kappa, kappa1, kappa2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, kappa1, kappa2)))
    if np.any(kappa < 0) or np.any(kappa1 < 0) or np.any(kappa2 < 0):
        raise DomainError("vertex arguments must be non-negative")

    if method == "closed":
        out = _closed_form(kappa, kappa1, kappa2)
    elif method == "panel":
        out = _panel(kappa, kappa1, kappa2)
    elif method == "adaptive":
        out = np.array([_adaptive_scalar(k, k1, k2, tol, tol)
                        for k, k1, k2 in zip(kappa.ravel(), kappa1.ravel(), kappa2.ravel())]).reshape(kappa.shape)
    elif method == "auto":
        out = _closed_form(kappa, kappa1, kappa2)
        nonzero = (kappa > 0) & (kappa1 > 0) & (kappa2 > 0)
        small = nonzero & (np.minimum(np.minimum(kappa, kappa1), kappa2) < CLOSED_FORM_MIN_ARG)
        if np.any(small):
            out = np.array(out, dtype=float)
            out[small] = _panel(kappa[small], kappa1[small], kappa2[small])
    else:
        raise ValueError(f"unknown method {method!r}")

    # any zero argument kills the integrand identically
    out = np.where((kappa == 0) | (kappa1 == 0) | (kappa2 == 0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def _sine_overlap(kappa1, kappa2):
    """integral_0^1 sin(kappa1 x) sin(kappa2 x) dx."""
    p = np.abs(kappa1 - kappa2)
    q = kappa1 + kappa2
    return 0.5 * (np.sinc(p / np.pi) - np.sinc(q / np.pi))


def _spectrum_of(amplitude):
    # a WavePacket is itself callable as Psi(x); its spectrum is the .amplitude method
    return getattr(amplitude, "amplitude", amplitude)


def vertex(kappa, kappa1, kappa2, amplitude, kappa_small=KAPPA_SMALL):
    """V(kappa, kappa1, kappa2) for the spectrum ``amplitude``.

    ``amplitude`` is a WavePacket, a SpectralAmplitude or any callable
    returning A(kappa). Below ``kappa_small`` sin^2(kappa x) is replaced by
    kappa^2 x^2, which turns kappa^-2 I into the finite overlap integral of
    the two sines.
    """
    amplitude = _spectrum_of(amplitude)
    kappa, kappa1, kappa2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, kappa1, kappa2)))
    if np.any(kappa < 0):
        raise DomainError("kappa must be non-negative")
    prefactor = 3.0 * (2.0 / np.pi) * (np.asarray(amplitude(kappa1)) * np.asarray(amplitude(kappa2)))
    small = kappa < kappa_small
    reduced = np.empty(kappa.shape)
    reduced[small] = _sine_overlap(kappa1[small], kappa2[small])
    big = ~small
    if np.any(big):
        reduced[big] = vertex_integral(kappa[big], kappa1[big], kappa2[big]) / kappa[big] ** 2
    out = prefactor * reduced
    return float(out) if out.ndim == 0 else out


@dataclass
class VertexTable:
    """V[i, j, k] = V(kappa_grid[i], inner_grid[j], inner_grid[k])."""

    kappa_grid: np.ndarray
    inner_grid: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def key(self):
        return self.metadata.get("key")

    def is_symmetric(self):
        return bool(np.array_equal(self.values, self.values.swapaxes(1, 2)))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, kappa_grid=self.kappa_grid, inner_grid=self.inner_grid,
                     values=self.values, metadata=np.array(json.dumps(self.metadata, sort_keys=True)))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            metadata = json.loads(str(data["metadata"]))
            if metadata.get("format_version") != TABLE_FORMAT_VERSION:
                raise DomainError(f"{path}: unsupported table format {metadata.get('format_version')!r}")
            return cls(kappa_grid=data["kappa_grid"], inner_grid=data["inner_grid"],
                       values=data["values"], metadata=metadata)


def _settings(kappa_small):
    return {
        "format_version": TABLE_FORMAT_VERSION,
        "kappa_small": kappa_small,
        "closed_form_min_arg": CLOSED_FORM_MIN_ARG,
        "panel_order": PANEL_ORDER,
        "integral": "closed-form sine integral, panel Gauss-Legendre fallback",
    }


def table_key(packet_a, kappa_grid, inner_grid, kappa_small=KAPPA_SMALL):
    h = hashlib.sha256()
    h.update(json.dumps({"a": float(packet_a), **_settings(kappa_small)}, sort_keys=True).encode())
    h.update(np.ascontiguousarray(kappa_grid, dtype=float).tobytes())
    h.update(b"|")
    h.update(np.ascontiguousarray(inner_grid, dtype=float).tobytes())
    return h.hexdigest()[:24]


def build_table(kappa_grid, inner_grid, amplitude, kappa_small=KAPPA_SMALL,
                max_entries=DEFAULT_MAX_ENTRIES, packet_a=None) -> VertexTable:
    """Tabulate V over ``kappa_grid`` x ``inner_grid`` x ``inner_grid``.

    ``amplitude`` is anything ``vertex`` accepts. ``packet_a`` is recorded
    in the metadata and the cache key.
    """
    kappa_grid = check_grid(kappa_grid, "kappa_grid")
    inner_grid = check_grid(inner_grid, "inner_grid")
    if kappa_grid[0] < 0 or inner_grid[0] < 0:
        raise DomainError("grids must be non-negative")
    n, m = kappa_grid.size, inner_grid.size
    if n * m * m > max_entries:
        raise ResourceLimitError(f"vertex table of {n}x{m}x{m} = {n * m * m} entries exceeds cap {max_entries}")
    if packet_a is None:
        packet_a = getattr(amplitude, "a", None)

    amp = np.asarray(_spectrum_of(amplitude)(inner_grid), dtype=float)
    k1 = inner_grid[:, None]
    k2 = inner_grid[None, :]
    prefactor = 3.0 * (2.0 / np.pi) * amp[:, None] * amp[None, :]
    overlap = _sine_overlap(k1, k2)
    values = np.empty((n, m, m))
    for i, kappa in enumerate(kappa_grid):
        if kappa < kappa_small:
            reduced = overlap
        else:
            reduced = vertex_integral(np.full((m, m), kappa), k1, k2) / kappa**2
        slab = prefactor * reduced
        values[i] = 0.5 * (slab + slab.T)

    metadata = _settings(kappa_small)
    metadata["a"] = packet_a
    metadata["shape"] = [n, m, m]
    if packet_a is not None:
        metadata["key"] = table_key(packet_a, kappa_grid, inner_grid, kappa_small)
    return VertexTable(kappa_grid=kappa_grid, inner_grid=inner_grid, values=values, metadata=metadata)


def load_or_build(cache_dir, packet, kappa_grid, inner_grid, kappa_small=KAPPA_SMALL,
                  max_entries=DEFAULT_MAX_ENTRIES):
    """Return ``(table, cache_hit)``, building and storing the table on a miss."""
    key = table_key(packet.a, kappa_grid, inner_grid, kappa_small)
    path = Path(cache_dir) / f"vertex-{key}.npz" if cache_dir is not None else None
    if path is not None and path.exists():
        try:
            table = VertexTable.load(path)
        except (OSError, ValueError, KeyError) as exc:
            log.warning("ignoring unreadable vertex cache %s: %s", path, exc)
        else:
            if table.key == key:
                log.info("vertex table cache hit %s", path)
                return table, True
    log.info("building vertex table %dx%dx%d", len(kappa_grid), len(inner_grid), len(inner_grid))
    table = build_table(kappa_grid, inner_grid, packet, kappa_small=kappa_small,
                        max_entries=max_entries, packet_a=packet.a)
    if path is not None:
        table.save(path)
    return table, False

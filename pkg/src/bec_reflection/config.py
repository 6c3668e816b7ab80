"""Run configuration: flat ``key = value`` files, presets and overrides.

Precedence, lowest first: built-in defaults, ``--preset``, the config file,
the cache environment variable, ``--set key=value``, ``--key value`` flags.
"""

import os
from dataclasses import asdict, dataclass, fields, replace

from bec_reflection import gpe, linewidth, packet, vertex
from bec_reflection.errors import DomainError

CACHE_ENV = "BEC_REFLECTION_CACHE"


class ConfigError(DomainError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # physics
    sigma: float = 30.0
    gamma: float = 0.0
    a: float = 5.0
    # spectral grid for A(kappa) and the mean density
    spectral_kmax: float = packet.DEFAULT_SPECTRAL_KMAX
    spectral_dk: float = packet.DEFAULT_SPECTRAL_DK
    # vertex table
    inner_kmax: float = vertex.DEFAULT_INNER_KMAX
    inner_dk: float = vertex.DEFAULT_INNER_DK
    external_grid: str = vertex.DEFAULT_EXTERNAL_GRID
    kappa_small: float = vertex.KAPPA_SMALL
    max_table_entries: int = vertex.DEFAULT_MAX_ENTRIES
    # line-width solver
    seed_c0: float = linewidth.DEFAULT_SEED_C0
    seed_k0: float = linewidth.DEFAULT_SEED_K0
    relaxation: float = linewidth.DEFAULT_RELAXATION
    tol: float = linewidth.DEFAULT_TOL
    max_iter: int = linewidth.DEFAULT_MAX_ITER
    kernel: str = "cell"
    multi_seed: bool = True
    # propagator
    x_max: float = gpe.DEFAULT_X_MAX
    dx: float = gpe.DEFAULT_DX
    dtau: float = gpe.DEFAULT_DTAU
    horizon: float = gpe.DEFAULT_HORIZON
    tau_step: float = 0.005
    absorber: bool = True
    absorber_start: float = 0.75
    absorber_strength: float = 2000.0
    absorber_power: float = 3.0
    # comparison report and figure grids
    t_skip: float = 0.05
    t_end: float = 0.35
    report_tol: float = 0.10
    fig3_kappa_min: float = 1e-3
    # plumbing
    out: str = "out"
    cache: str = ""
    workers: int = 1

    def validate(self):
        try:
            ext = vertex.segmented_grid(self.external_grid)
            packet.default_spectral_grid(self.spectral_kmax, self.spectral_dk)
            vertex.default_inner_grid(self.inner_kmax, self.inner_dk)
            self.propagator_config(self.gamma)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        if self.sigma <= 0 or self.gamma < 0 or self.a <= 0:
            raise ConfigError("need sigma > 0, gamma >= 0, a > 0")
        if self.inner_kmax > self.spectral_kmax:
            raise ConfigError("spectral grid must cover the vertex inner grid")
        if ext[0] > 0 or ext[-1] < self.spectral_kmax:
            raise ConfigError("external line-width grid must span [0, spectral_kmax]")
        if not 0 <= self.t_skip < self.t_end <= self.horizon:
            raise ConfigError("need 0 <= t_skip < t_end <= horizon")
        if self.tau_step <= 0 or self.workers < 1 or self.max_iter < 1:
            raise ConfigError("tau_step, workers and max_iter must be positive")
        if not 0 < self.fig3_kappa_min < self.spectral_kmax:
            raise ConfigError("fig3_kappa_min must lie inside the spectral grid")
        if self.kernel not in ("cell", "pointwise"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        return self

    def propagator_config(self, gamma):
        absorber = gpe.Absorber(self.absorber_start, self.absorber_strength, self.absorber_power, self.absorber)
        return gpe.PropagatorConfig(sigma=self.sigma, gamma=gamma, dx=self.dx, dtau=self.dtau,
                                    x_max=self.x_max, absorber=absorber, horizon=self.horizon)

    def as_dict(self):
        return asdict(self)


PRESETS = {
    "paper": {"sigma": 30.0, "gamma": 0.5, "a": 5.0},
}

_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key, text):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELDS[key].type
    try:
        if kind in (bool, "bool"):
            return _parse_bool(text)
        if kind in (int, "int"):
            return int(float(text)) if float(text).is_integer() else int(text)
        if kind in (float, "float"):
            if "/" in text:
                num, den = text.split("/")
                return float(num) / float(den)
            return float(text)
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_pairs(lines, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = _convert(key, value)
    return values


def load_config_file(path):
    try:
        with open(path) as fh:
            return parse_pairs(fh, str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def build_config(preset=None, config_path=None, set_pairs=(), flags=None, environ=None):
    environ = os.environ if environ is None else environ
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = replace(cfg, **PRESETS[preset])
    if config_path is not None:
        cfg = replace(cfg, **load_config_file(config_path))
    if environ.get(CACHE_ENV):
        cfg = replace(cfg, cache=environ[CACHE_ENV])
    if set_pairs:
        cfg = replace(cfg, **parse_pairs(set_pairs, "--set"))
    if flags:
        cfg = replace(cfg, **{k: _convert(k, str(v)) for k, v in flags.items()})
    return cfg.validate()


def dump_config(cfg: RunConfig):
    """Render a config in the same key=value format it is read from."""
    lines = []
    for key, value in cfg.as_dict().items():
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"

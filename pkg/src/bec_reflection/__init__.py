"""Anomalous quantum reflection of a Bose-Einstein condensate.

Line-width theory (sine-spectral decomposition, three-mode vertex,
self-consistent damping), the reflection/decay laws built on it, and a
radial Gross-Pitaevskii propagator used to check the analytic decay.
"""

from bec_reflection.errors import (
    DegenerateSolutionError,
    DomainError,
    NonConvergenceError,
    PropagationError,
    ResourceLimitError,
)
from bec_reflection.units import (
    PhysicalParameters,
    ScaledParameters,
    scaled_energy_to_au,
    scaled_time_to_seconds,
    to_scaled,
)
from bec_reflection.packet import (
    SpectralAmplitude,
    WavePacket,
    kinetic_energy,
    make_packet,
    spectral_amplitude,
    tabulate_spectrum,
)
from bec_reflection.vertex import VertexTable, build_table, vertex_integral
from bec_reflection.linewidth import LineWidthProfile, interaction_decay, real_form_rhs, solve
from bec_reflection.reflection import (
    DecayCurve,
    ReflectionCurve,
    anomalous_reflection,
    mean_density,
    mode_survival,
    universal_reflection,
)
from bec_reflection.gpe import GridState, PropagatorConfig, decay_curve, density_inside, propagate

__version__ = "0.1.0"

__all__ = [
    "DecayCurve",
    "DegenerateSolutionError",
    "DomainError",
    "GridState",
    "LineWidthProfile",
    "NonConvergenceError",
    "PhysicalParameters",
    "PropagationError",
    "PropagatorConfig",
    "ReflectionCurve",
    "ResourceLimitError",
    "ScaledParameters",
    "SpectralAmplitude",
    "VertexTable",
    "WavePacket",
    "anomalous_reflection",
    "build_table",
    "decay_curve",
    "density_inside",
    "interaction_decay",
    "kinetic_energy",
    "make_packet",
    "mean_density",
    "mode_survival",
    "propagate",
    "real_form_rhs",
    "scaled_energy_to_au",
    "scaled_time_to_seconds",
    "solve",
    "spectral_amplitude",
    "tabulate_spectrum",
    "to_scaled",
    "universal_reflection",
    "vertex_integral",
]

"""Kurth steady state, its breathing family, and a radial particle solver."""

__version__ = "0.1.0"

from .core import (
    Q_NORM,
    RHO_0,
    PhaseVec,
    RadialState,
    energy,
    eval_Q,
    eval_Q_tilde,
    grad_Q,
    potential_dU,
    potential_U,
    support_F,
    to_radial,
)
from .ensemble import (
    ParticleEnsemble,
    PicCollapseError,
    PicConfig,
    PicRun,
    evolve_selfconsistent,
    push_particles,
    sample_family,
    sample_kurth,
)
from .family import KurthFamily, TransformFields, ansatz_residual, separation_constant
from .moments import RadialField, density_from_distribution, radial_field_from_density, radial_field_from_particles
from .phi import NoPeriodError, PhiIntegrationError, PhiTrajectory, detect_period, integrate_phi, period

__all__ = [
    "Q_NORM", "RHO_0", "PhaseVec", "RadialState", "energy", "eval_Q", "eval_Q_tilde", "grad_Q",
    "potential_dU", "potential_U", "support_F", "to_radial",
    "ParticleEnsemble", "PicCollapseError", "PicConfig", "PicRun", "evolve_selfconsistent",
    "push_particles", "sample_family", "sample_kurth",
    "KurthFamily", "TransformFields", "ansatz_residual", "separation_constant",
    "RadialField", "density_from_distribution", "radial_field_from_density", "radial_field_from_particles",
    "NoPeriodError", "PhiIntegrationError", "PhiTrajectory", "detect_period", "integrate_phi", "period",
]

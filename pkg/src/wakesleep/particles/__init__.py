"""
Particle sampling and importance weights.
"""

from .sampler import Particle, ParticleSet, cws_weights, particle_noise, sample_particles
from .weights import log_weight_variance, normalize_weights

__all__ = [
    "Particle",
    "ParticleSet",
    "cws_weights",
    "log_weight_variance",
    "normalize_weights",
    "particle_noise",
    "sample_particles",
]

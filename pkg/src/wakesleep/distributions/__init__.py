"""
Probability primitives with log densities and sampling.
"""

from .bernoulli import BernoulliVec
from .categorical import Categorical, kl_categorical
from .gaussian import DiagGaussian

__all__ = ["BernoulliVec", "Categorical", "DiagGaussian", "kl_categorical"]

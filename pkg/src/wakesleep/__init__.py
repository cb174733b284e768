"""
wakesleep - Semi-supervised wake-sleep training for sequential latent-variable models.

Objectives: ELBO/IWAE, M1+M2, SSWS, CWS, REINFORCE and unsupervised RWS.
"""

__version__ = "0.1.0"
__all__ = ["base", "cli", "core", "data", "distributions", "models", "objectives", "oracle", "particles", "trainer"]

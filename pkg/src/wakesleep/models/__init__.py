"""
Generative models p_θ paired with inference networks q_φ.
"""

from .base import GenStep, InferenceStep, LatentVariableModel, Trace
from .factory import build_model
from .layers import GRUCell, Linear, MLP, ParameterSet
from .sampling import Continuation, continue_sequence
from .sequential import SeqModel
from .static import StaticSemiVAE
from .toy import EnumerableToy, JointTable

__all__ = [
    "Continuation",
    "EnumerableToy",
    "GRUCell",
    "GenStep",
    "InferenceStep",
    "JointTable",
    "LatentVariableModel",
    "Linear",
    "MLP",
    "ParameterSet",
    "SeqModel",
    "StaticSemiVAE",
    "Trace",
    "build_model",
    "continue_sequence",
]

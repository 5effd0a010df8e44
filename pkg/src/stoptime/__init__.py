"""Finite-truncation engines for tree spaces: norms, duals, operators, games and factorisations."""

from .base_norm import BaseNorm
from .spaces import CoeffVector, SpaceTag, norm, norm_B, norm_S, dual_norm_D, dual_norm_Bstar, pairing
from .tree import Node, SubtreeEmbedding, Truncation, verify_embedding
from .operators import OperatorMatrix, build_B_Q, adjoint, op_norm_lower, op_norm_exact_tiny, distance_to_annihilator

__version__ = "0.1.0"

__all__ = [
    "BaseNorm", "CoeffVector", "SpaceTag", "norm", "norm_B", "norm_S", "dual_norm_D",
    "dual_norm_Bstar", "pairing", "Node", "SubtreeEmbedding", "Truncation", "verify_embedding",
    "OperatorMatrix", "build_B_Q", "adjoint", "op_norm_lower", "op_norm_exact_tiny",
    "distance_to_annihilator",
]

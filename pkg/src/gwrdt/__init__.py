"""Rate-distortion tools for multitype Galton-Watson trees."""

__version__ = "0.1.0"

from .errors import GWError
from .model import GWModel, VertexMark, mean_matrix, mtdna_model, uniform_binary_model, validate_model
from .trees import Tree, enumerate_trees, sample_conditioned, sample_tree, tree_prob, vertex_marks

__all__ = [
    "GWError",
    "GWModel",
    "Tree",
    "VertexMark",
    "enumerate_trees",
    "mean_matrix",
    "mtdna_model",
    "sample_conditioned",
    "sample_tree",
    "tree_prob",
    "uniform_binary_model",
    "validate_model",
    "vertex_marks",
]

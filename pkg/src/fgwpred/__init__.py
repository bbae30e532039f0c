"""Supervised graph prediction with fused Gromov-Wasserstein barycenters.

Graphs are ``(C, F)`` pairs with uniform node weights.  Predictions are FGW
barycenters of template graphs, weighted either by kernel ridge coefficients
(templates = training graphs) or by a softmax MLP (learned templates).
"""

from .barycenter import BarycenterResult, TemplateSet, solve_barycenter
from .errors import FGWError
from .fgw import FgwProblem, FgwSolution, fgw_distance, gw_tensor_apply, solve_fgw
from .graph import Graph, LabeledGraph, Permutation, RelaxedGraph, permute
from .krr import Kernel, KrrModel, decode_candidates, fit
from .neural import NeuralModel, TrainConfig, build_model, train
from .ot import TransportPlan, solve_exact, solve_sinkhorn

__all__ = [
    "BarycenterResult", "FGWError", "FgwProblem", "FgwSolution", "Graph", "Kernel", "KrrModel",
    "LabeledGraph", "NeuralModel", "Permutation", "RelaxedGraph", "TemplateSet", "TrainConfig",
    "TransportPlan", "build_model", "decode_candidates", "fgw_distance", "fit", "gw_tensor_apply",
    "permute", "solve_barycenter", "solve_exact", "solve_fgw", "solve_sinkhorn", "train",
]
__version__ = "0.1.0"

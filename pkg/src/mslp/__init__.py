"""Multi-scale link prediction on large graphs.

Hierarchical clustering, clustered low-rank approximations at every level of
the hierarchy, multi-scale Katz / common-neighbor scoring, classical
baselines and an evaluation harness.
"""
from .graph import Graph, SnapshotPair, load_edge_list, load_graph, load_snapshot_pair
from .hierarchy import HierarchyTree, build_hierarchy, level_fractions, random_hierarchy
from .linalg import orthonormalize, principal_angle_cosines, symmetric_eig_top_r
from .methods import METHODS, Method
from .msapprox import (MultiScaleModel, approximation_error, build_multiscale, clra_leaf,
                       lift_subspace, load_model, save_model)
from .predict import MultiScaleScorer, recommend, top_k
from .proximity import ProximityConfig

__version__ = "0.1.0"

__all__ = [
    "Graph", "SnapshotPair", "load_edge_list", "load_graph", "load_snapshot_pair",
    "HierarchyTree", "build_hierarchy", "level_fractions", "random_hierarchy",
    "orthonormalize", "principal_angle_cosines", "symmetric_eig_top_r",
    "METHODS", "Method",
    "MultiScaleModel", "approximation_error", "build_multiscale", "clra_leaf",
    "lift_subspace", "load_model", "save_model",
    "MultiScaleScorer", "recommend", "top_k", "ProximityConfig",
]

"""Hypergraph p-Laplacian interpolation on point clouds."""

from .estimators import HypergraphClassifier, HypergraphInterpolator
from .geometry import LabelConstraints, NeighborIndex, PointCloud
from .hypergraph import Hypergraph, WeightScheme, build_eps_ball, build_knn, build_pair_graph
from .solver import SaddleProblem, SolverConfig, run

__version__ = "0.1.0"

__all__ = [
    "HypergraphClassifier",
    "HypergraphInterpolator",
    "Hypergraph",
    "LabelConstraints",
    "NeighborIndex",
    "PointCloud",
    "SaddleProblem",
    "SolverConfig",
    "WeightScheme",
    "build_eps_ball",
    "build_knn",
    "build_pair_graph",
    "run",
]

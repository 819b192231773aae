"""Detecting adversarially inserted edges against GCN node classifiers."""

from .errors import DomainError, MalformedInputError, SchemaError
from .graph import Graph, load_graph, save_graph
from .pipeline import edog_detect, rank_normalize, run_detector, run_experiment
from .scores import EdgeScores

__all__ = [
    "DomainError", "MalformedInputError", "SchemaError", "Graph", "load_graph", "save_graph",
    "edog_detect", "rank_normalize", "run_detector", "run_experiment", "EdgeScores",
]
__version__ = "0.1.0"

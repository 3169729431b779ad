"""LayerGCN and baseline graph recommenders for implicit feedback."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError
from .graph import BipartiteGraph, build_graph, normalize, spmm
from .ingest import (InteractionLog, SplitBundle, chronological_split, k_core_filter,
                     load_interactions)
from .model import ForwardTrace, ModelConfig, forward
from .pruning import PruneConfig
from .training import TrainConfig, fit
from .evaluation import evaluate

__all__ = [
    "BipartiteGraph", "ConfigError", "DataError", "ForwardTrace", "InteractionLog",
    "ModelConfig", "NumericalError", "PruneConfig", "SplitBundle", "TrainConfig",
    "build_graph", "chronological_split", "evaluate", "fit", "forward", "k_core_filter",
    "load_interactions", "normalize", "spmm",
]

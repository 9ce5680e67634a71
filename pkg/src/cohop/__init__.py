"""Semi-supervised node classification with a graph-free predictor.

The graph is used only during training: label histograms are appended to
the node features, neighboring predictions are pushed to agree, and the
training set grows with smoothed high-confidence pseudo-labels.
"""

from .data import Dataset, SplitSpec, generate_sbm, load_dataset, save_dataset
from .estimator import CoHOpClassifier
from .graph import Graph, bounded_bfs, build_graph, induced_subgraph, row_normalize
from .histograms import (
    HistogramConfig,
    LabelHistogramTransformer,
    approx_histograms,
    exact_histograms,
)
from .labels import LabelSet
from .trainer import TrainConfig, run

__all__ = [
    "CoHOpClassifier",
    "Dataset",
    "Graph",
    "HistogramConfig",
    "LabelHistogramTransformer",
    "LabelSet",
    "SplitSpec",
    "TrainConfig",
    "approx_histograms",
    "bounded_bfs",
    "build_graph",
    "exact_histograms",
    "generate_sbm",
    "induced_subgraph",
    "load_dataset",
    "row_normalize",
    "run",
    "save_dataset",
]

__version__ = "0.1.0"

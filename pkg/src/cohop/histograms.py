"""Distance-weighted histograms of training labels around each node."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .graph import Graph, bfs_distances, row_normalize
from .labels import LabelSet

MODES = ("exact", "approximate")
DEFAULT_ALPHA = {"exact": 0.9, "approximate": 0.1}


@dataclass(frozen=True)
class HistogramConfig:
    alpha: float = 0.9
    ell: int = 10
    mode: str = "exact"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.ell < 1:
            raise ConfigError(f"ell must be at least 1, got {self.ell}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


def normalize_rows(h: np.ndarray) -> np.ndarray:
    """Divide each row by its sum; rows summing to zero stay all-zero."""
    s = h.sum(axis=1, keepdims=True)
    return np.divide(h, s, out=np.zeros_like(h), where=s > 0)


def exact_histograms(g: Graph, labels: LabelSet, cfg: HistogramConfig, normalize=True):
    """Label histograms from exact hop distances.

    One bounded BFS is run from every training node; its one-hot label is
    scattered onto every node within ``cfg.ell`` hops with weight
    ``alpha ** distance``. A training node counts itself at distance 0.
    Cost is O(|train| * |E|).
    """
    h = np.zeros((g.n, labels.n_classes))
    for j in np.flatnonzero(labels.train):
        dist = bfs_distances(g, j, cfg.ell)
        reached = np.flatnonzero(dist >= 0)
        h[reached, labels.y[j]] += cfg.alpha ** dist[reached].astype(np.float64)
    return normalize_rows(h) if normalize else h


def approx_histograms(g: Graph, labels: LabelSet, cfg: HistogramConfig, normalize=True):
    """Label histograms by repeated propagation, ``sum_{k=1..ell} (alpha*A_hat)^k Y~``.

    ``Y~`` is the one-hot training label matrix (zero rows off the training
    set). Runs ``ell`` sparse products and never forms a dense n x n matrix.
    Unlike :func:`exact_histograms` there is no distance-0 term, but walks
    that return to their origin leak a node's own label into its histogram.
    """
    a_hat = row_normalize(g)
    y_tilde = labels.one_hot(labels.train)
    acc = np.zeros_like(y_tilde)
    for _ in range(cfg.ell):
        acc = cfg.alpha * (a_hat @ (acc + y_tilde))
    return normalize_rows(acc) if normalize else acc


def compute_histograms(g: Graph, labels: LabelSet, cfg: HistogramConfig) -> np.ndarray:
    if cfg.mode == "exact":
        return exact_histograms(g, labels, cfg)
    return approx_histograms(g, labels, cfg)


def concat_features(x, h) -> np.ndarray:
    x = np.asarray(x)
    h = np.asarray(h)
    if x.shape[0] != h.shape[0]:
        raise ValueError(
            f"feature matrix has {x.shape[0]} rows but histogram matrix has {h.shape[0]}"
        )
    return np.hstack([x, h.astype(x.dtype, copy=False)])


class LabelHistogramTransformer(TransformerMixin, BaseEstimator):
    """Append label histograms to node features.

    ``fit`` takes the node labels with ``-1`` marking every node whose label
    must not be used (validation and test nodes included). ``transform``
    expects the rows of the same graph in node order.

    Parameters
    ----------
    graph : Graph
        The graph whose nodes are the rows of ``X``.
    alpha : float, default=None
        Distance decay. ``None`` picks 0.9 for exact and 0.1 for approximate mode.
    ell : int, default=10
        Hop limit.
    mode : {"exact", "approximate"}, default="exact"
    """

    def __init__(self, graph=None, alpha=None, ell=10, mode="exact"):
        self.graph = graph
        self.alpha = alpha
        self.ell = ell
        self.mode = mode

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y, dtype=np.int64)
        if self.graph is None:
            raise ValueError("LabelHistogramTransformer requires a graph")
        if len(y) != self.graph.n or X.shape[0] != self.graph.n:
            raise ValueError(
                f"expected {self.graph.n} rows, got X with {X.shape[0]} and y with {len(y)}"
            )
        alpha = DEFAULT_ALPHA.get(self.mode, 0.9) if self.alpha is None else self.alpha
        cfg = HistogramConfig(alpha=alpha, ell=self.ell, mode=self.mode)
        known = y >= 0
        self.classes_ = np.unique(y[known])
        n_classes = int(y.max()) + 1 if known.any() else 0
        labels = LabelSet(y, n_classes, known, np.zeros_like(known), ~known)
        self.histograms_ = compute_histograms(self.graph, labels, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "histograms_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return concat_features(X, self.histograms_)

"""scikit-learn compatible wrapper around the training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .graph import Graph
from .histograms import (
    DEFAULT_ALPHA,
    HistogramConfig,
    compute_histograms,
    concat_features,
)
from .labels import LabelSet
from .model import forward
from .trainer import TrainConfig, run


class CoHOpClassifier(ClassifierMixin, BaseEstimator):
    """Graph-aware node classifier that needs no message passing at inference.

    Training uses the graph three ways: label histograms appended to the
    features, a neighbor-consistency penalty, and iterative self-training on
    smoothed pseudo-labels. Prediction is one forward pass of a linear model
    (or small MLP) over node features.

    Parameters
    ----------
    iterations : int, default=5
        Pseudo-labeling rounds.
    epochs : int, default=200
        Full-batch epochs per round; the best validation epoch is kept.
    gamma : float, default=0.05
        Weight of the consistency penalty.
    tau : float, default=0.9
        Confidence a smoothed prediction must exceed to become a pseudo-label.
    lam : float, default=0.7
        Weight of a node's own prediction when smoothing with its neighbors.
    histograms : {"exact", "approximate"} or None, default="exact"
        How label histograms are computed; ``None`` disables them.
    alpha : float, default=None
        Histogram distance decay; ``None`` picks 0.9 (exact) or 0.1 (approximate).
    ell : int, default=10
        Histogram hop limit.
    hidden : int, default=None
        Hidden width; ``None`` gives a linear model.
    lr : float, default=None
        Adam step size; ``None`` gives 1e-2 (linear) or 1e-3 (MLP).
    use_consistency, use_iterations, use_smoothing : bool, default=True
        Ablation switches.
    hard_pseudo_labels : bool, default=False
        Use argmax one-hot pseudo-label targets instead of smoothed rows.
    detach_consistency_target : bool, default=False
        Treat the neighbor prediction in the penalty as a constant.
    random_state : int, default=0

    Notes
    -----
    ``fit`` follows the scikit-learn semi-supervised convention: ``y`` holds
    ``-1`` for unlabeled nodes. Labeled nodes flagged in ``val_mask`` are used
    only to pick the best epoch.
    """

    def __init__(
        self,
        iterations=5,
        epochs=200,
        gamma=0.05,
        tau=0.9,
        lam=0.7,
        histograms="exact",
        alpha=None,
        ell=10,
        hidden=None,
        lr=None,
        use_consistency=True,
        use_iterations=True,
        use_smoothing=True,
        hard_pseudo_labels=False,
        detach_consistency_target=False,
        random_state=0,
    ):
        self.iterations = iterations
        self.epochs = epochs
        self.gamma = gamma
        self.tau = tau
        self.lam = lam
        self.histograms = histograms
        self.alpha = alpha
        self.ell = ell
        self.hidden = hidden
        self.lr = lr
        self.use_consistency = use_consistency
        self.use_iterations = use_iterations
        self.use_smoothing = use_smoothing
        self.hard_pseudo_labels = hard_pseudo_labels
        self.detach_consistency_target = detach_consistency_target
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        if self.histograms not in ("exact", "approximate", None):
            raise ConfigError(f"histograms must be 'exact', 'approximate' or None, got {self.histograms!r}")
        mode = self.histograms or "exact"
        alpha = DEFAULT_ALPHA[mode] if self.alpha is None else self.alpha
        return TrainConfig(
            iterations=self.iterations,
            epochs=self.epochs,
            gamma=self.gamma,
            tau=self.tau,
            lam=self.lam,
            lr=self.lr,
            hidden=self.hidden,
            seed=self.random_state,
            histogram=HistogramConfig(alpha=alpha, ell=self.ell, mode=mode),
            use_consistency=self.use_consistency,
            use_histograms=self.histograms is not None,
            use_iterations=self.use_iterations,
            use_smoothing=self.use_smoothing,
            hard_pseudo_labels=self.hard_pseudo_labels,
            detach_consistency_target=self.detach_consistency_target,
        )

    def fit(self, X, y, graph: Graph, val_mask=None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if not isinstance(graph, Graph):
            raise TypeError("graph must be a cohop.graph.Graph")
        if X.shape[0] != graph.n or len(y) != graph.n:
            raise ValueError(
                f"graph has {graph.n} nodes but X has {X.shape[0]} rows and y has {len(y)}"
            )
        val_mask = np.zeros(graph.n, dtype=bool) if val_mask is None else np.asarray(val_mask, dtype=bool)
        known = y >= 0
        if (val_mask & ~known).any():
            raise ValueError("every validation node needs a label")
        self.classes_ = np.unique(y[known])
        if len(self.classes_) < 2:
            raise ValueError("need labeled nodes from at least two classes")
        encoded = np.full(graph.n, -1, dtype=np.int64)
        encoded[known] = np.searchsorted(self.classes_, y[known])
        train = known & ~val_mask
        labels = LabelSet(encoded, len(self.classes_), train, val_mask, ~(train | val_mask))
        cfg = self._train_config()
        result = run(graph, X, labels, cfg)
        self.config_ = cfg
        self.model_ = result.model
        self.history_ = result.history
        self.histograms_ = result.histograms
        self.graph_ = graph
        self.n_features_in_ = X.shape[1]
        return self

    def _features(self, X, graph, y):
        if self.histograms_ is None:
            return X
        if graph is None:
            if X.shape[0] != self.graph_.n:
                raise ValueError(
                    f"X has {X.shape[0]} rows; pass the graph these nodes belong to"
                )
            return concat_features(X, self.histograms_)
        if y is None:
            raise ValueError("histogram features on a new graph need its training labels y")
        y = np.asarray(y)
        known = y >= 0
        encoded = np.full(graph.n, -1, dtype=np.int64)
        encoded[known] = np.searchsorted(self.classes_, y[known])
        labels = LabelSet(encoded, len(self.classes_), known, np.zeros_like(known), ~known)
        return concat_features(X, compute_histograms(graph, labels, self.config_.histogram))

    def predict_proba(self, X, graph: Graph | None = None, y=None):
        """Class probabilities from one forward pass.

        With ``graph=None`` the rows of ``X`` are the nodes of the training
        graph. Otherwise ``graph`` is the graph the rows belong to and ``y``
        its training labels (``-1`` elsewhere), used only to build histograms.
        """
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.model_, self._features(X, graph, y))

    def predict(self, X, graph: Graph | None = None, y=None):
        check_is_fitted(self, "model_")
        return self.classes_[self.predict_proba(X, graph, y).argmax(axis=1)]

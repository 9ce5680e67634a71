"""Iterative pseudo-label training with smoothed, confidence-thresholded targets."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .exceptions import ConfigError
from .graph import Graph, row_normalize
from .histograms import HistogramConfig, compute_histograms, concat_features
from .labels import LabelSet
from .model import AdamState, Model, backward, forward, init_model, loss_total, step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5
    epochs: int = 200
    gamma: float = 0.05
    tau: float = 0.9
    lam: float = 0.7
    lr: float | None = None
    hidden: int | None = None
    seed: int = 0
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    use_consistency: bool = True
    use_histograms: bool = True
    use_iterations: bool = True
    use_smoothing: bool = True
    hard_pseudo_labels: bool = False
    detach_consistency_target: bool = False
    select_best_epoch: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be at least 1, got {self.iterations}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError(f"hidden width must be at least 1, got {self.hidden}")

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if self.hidden else 1e-2

    @property
    def effective_iterations(self) -> int:
        return self.iterations if self.use_iterations else 1

    @property
    def effective_gamma(self) -> float:
        return self.gamma if self.use_consistency else 0.0

    @property
    def effective_lam(self) -> float:
        return self.lam if self.use_smoothing else 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        d["histogram"] = HistogramConfig(**d.get("histogram", {}))
        return cls(**d)


@dataclass
class TrainState:
    model: Model
    members: np.ndarray
    targets: np.ndarray
    y_star: np.ndarray | None = None
    best_val_acc: float = float("nan")
    best_epoch: int = 0
    iteration: int = 0
    epoch_val_acc: list = field(default_factory=list)


def accuracy(pred, y, mask) -> float:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(pred[idx].argmax(axis=1) == y[idx]))


def initial_state(model: Model, labels: LabelSet) -> TrainState:
    return TrainState(
        model=model,
        members=np.flatnonzero(labels.train),
        targets=labels.one_hot(labels.train),
    )


def train_one_iteration(state: TrainState, a_hat, x_aug, labels: LabelSet, cfg: TrainConfig):
    """Full-batch training on the current member set, restoring the best epoch.

    Validation accuracy is measured after every epoch; the parameters of the
    first epoch reaching the highest accuracy are kept. Training continues
    from the current weights of ``state.model``.
    """
    gamma = cfg.effective_gamma
    lr = cfg.learning_rate
    opt = AdamState()
    model = state.model
    has_val = labels.val.any()
    best_params, best_acc, best_epoch = None, -np.inf, 0
    state.epoch_val_acc = []
    for epoch in range(1, cfg.epochs + 1):
        grads = backward(
            model, x_aug, a_hat, state.targets, state.members, gamma,
            detach_target=cfg.detach_consistency_target,
        )
        step(model, grads, opt, lr)
        if not (has_val and cfg.select_best_epoch):
            continue
        acc = accuracy(forward(model, x_aug), labels.y, labels.val)
        state.epoch_val_acc.append(acc)
        if acc > best_acc:
            best_params, best_acc, best_epoch = [p.copy() for p in model.params], acc, epoch
    if best_params is not None:
        model.params = best_params
        state.best_epoch = best_epoch
    else:
        state.best_epoch = cfg.epochs
    state.best_val_acc = accuracy(forward(model, x_aug), labels.y, labels.val)
    return state


def smooth_predictions(pred, a_hat, lam) -> np.ndarray:
    """``lam * pred + (1 - lam) * a_hat @ pred``.

    Isolated nodes have no neighbor average; their row is rescaled by
    ``1/lam`` (which gives back ``pred``), and left as ``pred`` when ``lam`` is 0.
    """
    pred = np.asarray(pred, dtype=np.float64)
    a_hat = row_normalize(a_hat) if isinstance(a_hat, Graph) else sparse.csr_matrix(a_hat)
    out = lam * pred + (1.0 - lam) * (a_hat @ pred)
    isolated = np.diff(a_hat.indptr) == 0
    if isolated.any():
        out[isolated] = out[isolated] / lam if lam > 0 else pred[isolated]
    return out


def select_pseudo_labels(y_star, labels: LabelSet, tau, eligible, hard=False):
    """Next training set: ground-truth nodes plus eligible nodes with max(Y*) > tau.

    Returns ``(members, targets)``. Ground-truth nodes keep their one-hot
    targets regardless of confidence; pseudo-labeled nodes get their smoothed
    row (or its argmax one-hot when ``hard``). Nothing carries over from the
    previous selection.
    """
    y_star = np.asarray(y_star)
    confident = (y_star.max(axis=1) > tau) & np.asarray(eligible, dtype=bool) & ~labels.train
    pseudo = np.flatnonzero(confident)
    targets = labels.one_hot(labels.train)
    if hard:
        targets[pseudo, y_star[pseudo].argmax(axis=1)] = 1.0
    else:
        targets[pseudo] = y_star[pseudo]
    members = np.flatnonzero(labels.train | confident)
    return members, targets


@dataclass
class RunResult:
    model: Model
    history: list
    histograms: np.ndarray | None
    x_aug: np.ndarray
    config: TrainConfig
    timings: dict = field(default_factory=dict)


def augment_features(g: Graph, x, labels: LabelSet, cfg: TrainConfig):
    """Histogram-augmented features, computed once from ground-truth train labels."""
    x = np.asarray(x, dtype=np.float64)
    if not cfg.use_histograms:
        return x, None
    h = compute_histograms(g, labels, cfg.histogram)
    return concat_features(x, h), h


def run(g: Graph, x, labels: LabelSet, cfg: TrainConfig, on_iteration=None) -> RunResult:
    """Train on graph ``g`` (every node of which is visible at training time).

    ``on_iteration(metrics, state)`` is called after every iteration, once the
    next training set has been selected.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.n or labels.n != g.n:
        raise ValueError(f"graph has {g.n} nodes, features {x.shape[0]} rows, labels {labels.n}")
    t0 = time.perf_counter()
    x_aug, h = augment_features(g, x, labels, cfg)
    t1 = time.perf_counter()
    a_hat = row_normalize(g)
    rng = np.random.default_rng(cfg.seed)
    model = init_model(x_aug.shape[1], labels.n_classes, cfg.hidden, rng)
    state = initial_state(model, labels)
    eligible = ~labels.val
    if labels.unseen is not None:
        eligible &= ~labels.unseen
    history = []
    for t in range(1, cfg.effective_iterations + 1):
        state.iteration = t
        train_set_size = len(state.members)
        train_one_iteration(state, a_hat, x_aug, labels, cfg)
        losses = loss_total(state.model, x_aug, a_hat, state.targets, state.members, cfg.effective_gamma)
        pred = forward(state.model, x_aug)
        state.y_star = smooth_predictions(pred, a_hat, cfg.effective_lam)
        state.members, state.targets = select_pseudo_labels(
            state.y_star, labels, cfg.tau, eligible, hard=cfg.hard_pseudo_labels
        )
        metrics = {
            "iteration": t,
            "epoch_best": state.best_epoch,
            "val_acc": state.best_val_acc,
            "train_set_size": train_set_size,
            "next_train_set_size": len(state.members),
            "loss_gt": losses.gt_term,
            "loss_consist": losses.consistency_term,
        }
        log.debug("iteration %s", metrics)
        history.append(metrics)
        if on_iteration is not None:
            on_iteration(metrics, state)
    timings = {"histograms": t1 - t0, "training": time.perf_counter() - t1}
    return RunResult(state.model, history, h, x_aug, cfg, timings)

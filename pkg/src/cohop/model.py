"""Node-level predictor, its consistency-regularized loss and analytic gradients.

The predictor is either a single linear layer or a two-layer perceptron with
a rectifier, followed by a row-wise softmax. Losses are sums (not means)
over nodes:

    gt      = sum_{i in members} CE(p_i, t_i)
    consist = sum_i 1/|N(i)| sum_{j in N(i)} CE(p_i, p_j)
    total   = gt + gamma * consist

with ``CE(p, t) = -sum_c t_c log p_c``.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .exceptions import DataError, DimensionMismatchError
from .graph import Graph, row_normalize

LOG_EPS = 1e-12
CHECKPOINT_MAGIC = b"COHM1"


class EmptyMembersWarning(UserWarning):
    pass


@dataclass
class Model:
    """Layer widths ``(d_in, [hidden,] n_classes)`` and parameters ``[W1, b1, (W2, b2)]``."""

    widths: tuple
    params: list

    @property
    def n_features(self) -> int:
        return self.widths[0]

    @property
    def n_classes(self) -> int:
        return self.widths[-1]

    @property
    def hidden(self) -> int | None:
        return self.widths[1] if len(self.widths) == 3 else None

    def copy(self) -> Model:
        return Model(self.widths, [p.copy() for p in self.params])


def init_model(n_features, n_classes, hidden=None, rng=None) -> Model:
    """Weights uniform in +-1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(rng)
    widths = (n_features, n_classes) if not hidden else (n_features, hidden, n_classes)
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return Model(tuple(int(w) for w in widths), params)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(m: Model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.n_features:
        raise DimensionMismatchError(
            f"model expects {m.n_features} input features, got {x.shape[-1] if x.ndim else 0}"
        )
    if m.hidden is None:
        w, b = m.params
        return softmax(x @ w + b), None
    w1, b1, w2, b2 = m.params
    pre = x @ w1 + b1
    hid = np.maximum(pre, 0.0)
    return softmax(hid @ w2 + b2), (pre, hid)


def forward(m: Model, x) -> np.ndarray:
    """Class distributions for every row of ``x``."""
    return _forward(m, x)[0]


def _members(members, n) -> np.ndarray:
    members = np.asarray(members)
    if members.dtype == bool:
        return np.flatnonzero(members)
    return members.astype(np.int64)


def _adjacency(g) -> sparse.csr_matrix:
    return row_normalize(g) if isinstance(g, Graph) else sparse.csr_matrix(g)


def cross_entropy(pred, target) -> np.ndarray:
    """Row-wise ``-sum_c target_c log pred_c`` with the log clamped at 1e-12."""
    return -(np.asarray(target) * np.log(np.maximum(pred, LOG_EPS))).sum(axis=-1)


def loss_gt(pred, targets, members) -> float:
    idx = _members(members, len(pred))
    if len(idx) == 0:
        warnings.warn("no member nodes; ground-truth loss is 0", EmptyMembersWarning)
        return 0.0
    return float(cross_entropy(pred[idx], targets[idx]).sum())


def loss_consistency(pred, g) -> float:
    """Neighbor-averaged cross-entropy with the neighbor prediction as target.

    ``g`` is a :class:`Graph` or an already row-normalized adjacency.
    """
    a_hat = _adjacency(g)
    return float(-((a_hat @ pred) * np.log(np.maximum(pred, LOG_EPS))).sum()) + 0.0


@dataclass(frozen=True)
class LossBreakdown:
    gt_term: float
    consistency_term: float
    total: float
    gamma: float


def loss_total(m, x, g, targets, members, gamma) -> LossBreakdown:
    pred = forward(m, x)
    idx = _members(members, len(pred))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyMembersWarning)
        gt = loss_gt(pred, targets, idx)
    consist = loss_consistency(pred, g)
    return LossBreakdown(gt, consist, gt + gamma * consist, float(gamma))


def backward(m, x, g, targets, members, gamma, detach_target=False) -> list:
    """Gradient of ``loss_total`` with respect to every parameter of ``m``.

    The consistency term contributes through both arguments of each
    ``CE(p_i, p_j)`` unless ``detach_target`` is set, in which case the
    neighbor prediction is treated as a constant.
    """
    x = np.asarray(x, dtype=np.float64)
    pred, cache = _forward(m, x)
    idx = _members(members, len(pred))
    live = pred > LOG_EPS  # the clamped log has zero slope below LOG_EPS

    # accumulate p * dL/dp, the quantity the softmax backward needs
    pg = np.zeros_like(pred)
    if len(idx):
        pg[idx] -= targets[idx] * live[idx]
    if gamma != 0:
        a_hat = _adjacency(g)
        pg -= gamma * (a_hat @ pred) * live
        if not detach_target:
            logp = np.log(np.maximum(pred, LOG_EPS))
            pg -= gamma * pred * (a_hat.T @ logp)
    dz = pg - pred * pg.sum(axis=1, keepdims=True)

    if m.hidden is None:
        return [x.T @ dz, dz.sum(axis=0)]
    pre, hid = cache
    w2 = m.params[2]
    dpre = (dz @ w2.T) * (pre > 0)
    return [x.T @ dpre, dpre.sum(axis=0), hid.T @ dz, dz.sum(axis=0)]


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def step(m: Model, grads, state: AdamState, lr: float) -> Model:
    """One adaptive-moment update of ``m`` in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in m.params]
        state.v = [np.zeros_like(p) for p in m.params]
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, mom, vel in zip(m.params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        mom *= state.beta1
        mom += (1.0 - state.beta1) * g
        vel *= state.beta2
        vel += (1.0 - state.beta2) * g * g
        p -= lr * (mom / c1) / (np.sqrt(vel / c2) + state.eps)
    return m


def checkpoint_bytes(m: Model) -> bytes:
    """``COHM1``, the width count and widths as u32 LE, then row-major float32 params."""
    head = CHECKPOINT_MAGIC + struct.pack(f"<{len(m.widths) + 1}I", len(m.widths), *m.widths)
    return head + b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in m.params)


def save_checkpoint(m: Model, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(m))


def load_checkpoint(path) -> Model:
    raw = Path(path).read_bytes()
    if raw[:5] != CHECKPOINT_MAGIC:
        raise DataError("not a model checkpoint (bad magic)", path=path)
    (k,) = struct.unpack_from("<I", raw, 5)
    if k not in (2, 3):
        raise DataError(f"unsupported layer count {k}", path=path)
    widths = struct.unpack_from(f"<{k}I", raw, 9)
    pos = 9 + 4 * k
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            chunk = np.frombuffer(raw, dtype="<f4", count=count, offset=pos)
            params.append(chunk.astype(np.float64).reshape(shape))
            pos += 4 * count
    if pos != len(raw):
        raise DataError(f"checkpoint has {len(raw) - pos} trailing bytes", path=path)
    return Model(tuple(widths), params)

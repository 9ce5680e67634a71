"""Dataset directory format, split construction and a synthetic block-model generator.

A dataset directory holds

- ``edges.tsv``: one ``u<TAB>v`` pair of decimal node ids per line;
- ``labels.tsv``: one ``node<TAB>class`` pair per line, every node labeled;
- ``features.bin``: ``COHF1``, u32 LE ``n``, u32 LE ``d``, then ``n*d``
  row-major little-endian float32 values;
- ``split.json`` (optional): ``{"train": [...], "val": [...], "unseen": [...]}``
  with ``unseen`` optional.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    DimensionMismatchError,
    LabelRangeError,
    MalformedLineError,
    MissingFileError,
)
from .graph import Graph, build_graph, induced_subgraph
from .labels import LabelSet

FEATURES_MAGIC = b"COHF1"


@dataclass(frozen=True)
class SplitSpec:
    mode: str
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    unseen: np.ndarray | None = None
    unseen_fraction: float | None = None

    @property
    def seen(self) -> np.ndarray | None:
        if self.unseen is None:
            return None
        return np.setdiff1d(self.test, self.unseen)

    def to_json(self) -> dict:
        d = {"train": self.train.tolist(), "val": self.val.tolist()}
        if self.unseen is not None:
            d["unseen"] = self.unseen.tolist()
        return d

    @classmethod
    def from_json(cls, d: dict, n: int) -> SplitSpec:
        train = np.asarray(d["train"], dtype=np.int64)
        val = np.asarray(d["val"], dtype=np.int64)
        used = np.zeros(n, dtype=bool)
        used[train] = True
        used[val] = True
        test = np.flatnonzero(~used)
        if d.get("unseen") is None:
            return cls("transductive", train, val, test)
        unseen = np.asarray(d["unseen"], dtype=np.int64)
        return cls("inductive", train, val, test, unseen, len(unseen) / max(len(test), 1))


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    x: np.ndarray
    y: np.ndarray
    n_classes: int
    split: SplitSpec | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    def labels(self, split: SplitSpec | None = None) -> LabelSet:
        split = split or self.split
        if split is None:
            raise ConfigError("dataset has no split")
        return LabelSet.from_indices(
            self.y, self.n_classes, split.train, split.val, split.test, split.unseen
        )


def write_features(x, path) -> None:
    x = np.ascontiguousarray(x, dtype="<f4")
    n, d = x.shape
    Path(path).write_bytes(FEATURES_MAGIC + struct.pack("<II", n, d) + x.tobytes())


def read_features(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFileError("file not found", path=path)
    raw = path.read_bytes()
    if raw[:5] != FEATURES_MAGIC:
        raise DataError("bad magic, expected COHF1", path=path)
    if len(raw) < 13:
        raise DataError("truncated header", path=path)
    n, d = struct.unpack_from("<II", raw, 5)
    if len(raw) - 13 != 4 * n * d:
        raise DimensionMismatchError(
            f"header declares {n}x{d} floats ({4 * n * d} bytes), payload has {len(raw) - 13} bytes",
            path=path,
        )
    x = np.frombuffer(raw, dtype="<f4", offset=13).reshape(n, d).astype(np.float32)
    if not np.isfinite(x).all():
        raise DataError("features contain non-finite values", path=path)
    return x


def _read_pairs(path) -> tuple[np.ndarray, np.ndarray]:
    """Integer pairs from a two-column TSV plus their 1-based line numbers."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError("file not found", path=path)
    pairs, lines = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLineError(f"expected 2 tab-separated fields, got {line!r}", path, lineno)
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise MalformedLineError(f"non-integer field in {line!r}", path, lineno) from None
            lines.append(lineno)
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2), np.asarray(lines, dtype=np.int64)


def load_dataset(path) -> Dataset:
    """Load and validate a dataset directory."""
    root = Path(path)
    if not root.is_dir():
        raise MissingFileError("dataset directory not found", path=root)
    x = read_features(root / "features.bin")
    n = x.shape[0]

    edges, edge_lines = _read_pairs(root / "edges.tsv")
    bad = np.flatnonzero((edges < 0).any(axis=1) | (edges >= n).any(axis=1))
    if len(bad):
        u, v = edges[bad[0]]
        raise DataError(
            f"edge ({u}, {v}) has an endpoint outside [0, {n})", root / "edges.tsv", int(edge_lines[bad[0]])
        )
    graph = build_graph(edges, n)

    pairs, label_lines = _read_pairs(root / "labels.tsv")
    labels_path = root / "labels.tsv"
    if len(pairs) != n:
        raise DimensionMismatchError(
            f"features have {n} rows but labels file has {len(pairs)} entries", labels_path
        )
    y = np.full(n, -1, dtype=np.int64)
    for (node, cls), lineno in zip(pairs, label_lines):
        if not 0 <= node < n:
            raise LabelRangeError(f"node {node} outside [0, {n})", labels_path, int(lineno))
        if cls < 0 or cls > np.iinfo(np.uint16).max:
            raise LabelRangeError(f"class {cls} out of range", labels_path, int(lineno))
        if y[node] >= 0:
            raise MalformedLineError(f"node {node} labeled twice", labels_path, int(lineno))
        y[node] = cls
    n_classes = int(y.max()) + 1 if n else 0

    split = None
    split_path = root / "split.json"
    if split_path.exists():
        try:
            spec = json.loads(split_path.read_text())
        except json.JSONDecodeError as e:
            raise MalformedLineError(str(e), split_path, e.lineno) from None
        ids = np.concatenate([np.asarray(spec.get(k) or [], dtype=np.int64) for k in ("train", "val", "unseen")])
        if len(ids) and (ids.min() < 0 or ids.max() >= n):
            raise LabelRangeError(f"split references node outside [0, {n})", split_path)
        split = SplitSpec.from_json(spec, n)
    return Dataset(graph, x, y, n_classes, split)


def save_dataset(ds: Dataset, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "edges.tsv", "w") as f:
        for u, v in ds.graph.edges():
            f.write(f"{u}\t{v}\n")
    with open(root / "labels.tsv", "w") as f:
        for i, c in enumerate(ds.y):
            f.write(f"{i}\t{c}\n")
    write_features(ds.x, root / "features.bin")
    if ds.split is not None:
        (root / "split.json").write_text(json.dumps(ds.split.to_json()))


def make_transductive_split(ds: Dataset, per_class_train=20, per_class_val=30, seed=0) -> SplitSpec:
    """Sample a fixed number of train and validation nodes per class; the rest is test.

    A class too small for the requested counts gets proportional counts
    instead, with a warning.
    """
    rng = np.random.default_rng(seed)
    train, val = [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        if len(members) == 0:
            raise DataError(f"class {c} has no members")
        members = rng.permutation(members)
        n_tr, n_va = per_class_train, per_class_val
        if len(members) < n_tr + n_va:
            warnings.warn(
                f"class {c} has {len(members)} members, fewer than {n_tr + n_va}; using proportional counts"
            )
            frac = len(members) / (n_tr + n_va)
            n_tr = max(1, int(round(n_tr * frac)))
            n_va = min(len(members) - n_tr, int(round(n_va * frac)))
        train.append(members[:n_tr])
        val.append(members[n_tr : n_tr + n_va])
    train = np.sort(np.concatenate(train))
    val = np.sort(np.concatenate(val))
    used = np.zeros(ds.n, dtype=bool)
    used[train] = True
    used[val] = True
    return SplitSpec("transductive", train, val, np.flatnonzero(~used))


def make_inductive_split(ds: Dataset, base: SplitSpec, unseen_fraction=0.2, seed=0) -> SplitSpec:
    """Hold out a uniformly random fraction of the test nodes as unseen."""
    if base.mode != "transductive":
        raise ConfigError("inductive split must start from a transductive split")
    if not 0.0 < unseen_fraction < 1.0:
        raise ConfigError(f"unseen fraction must lie in (0, 1), got {unseen_fraction}")
    rng = np.random.default_rng(seed)
    k = int(round(unseen_fraction * len(base.test)))
    unseen = np.sort(rng.choice(base.test, size=k, replace=False))
    return SplitSpec("inductive", base.train, base.val, base.test, unseen, unseen_fraction)


def training_view(ds: Dataset, split: SplitSpec):
    """Graph, features and labels visible at training time.

    For an inductive split this is the subgraph induced by every node except
    the unseen ones; ``kept`` maps its node ids back to ``ds``.
    """
    labels = ds.labels(split)
    if split.unseen is None:
        return ds.graph, ds.x, labels, np.arange(ds.n)
    g, kept = induced_subgraph(ds.graph, ~labels.unseen)
    return g, ds.x[kept], labels.subset(kept), kept


def generate_sbm(
    n=1000, n_classes=4, p_in=0.05, p_out=0.005, feature_dim=16, noise_sigma=1.0, seed=0, mean_scale=1.0
) -> Dataset:
    """Balanced stochastic block model with noisy class-mean features.

    Class ``c`` has mean ``mean_scale * e_c`` (orthogonal means), so
    ``feature_dim`` must be at least ``n_classes``.
    """
    if not p_in > p_out >= 0:
        raise ConfigError(f"need p_in > p_out >= 0, got p_in={p_in}, p_out={p_out}")
    if feature_dim < n_classes:
        raise ConfigError(f"feature_dim {feature_dim} < n_classes {n_classes}; means cannot be orthogonal")
    rng = np.random.default_rng(seed)
    y = np.arange(n) % n_classes
    y = np.sort(y)
    probs = np.where(y[:, None] == np.arange(n_classes)[None, :], p_in, p_out)
    src, dst = [], []
    for i in range(n - 1):
        p = probs[i + 1 :, y[i]]
        hit = np.flatnonzero(rng.random(n - i - 1) < p) + i + 1
        src.append(np.full(len(hit), i))
        dst.append(hit)
    edges = np.column_stack([np.concatenate(src or [[]]), np.concatenate(dst or [[]])]).astype(np.int64)
    means = np.zeros((n_classes, feature_dim))
    means[np.arange(n_classes), np.arange(n_classes)] = mean_scale
    x = means[y] + noise_sigma * rng.standard_normal((n, feature_dim))
    return Dataset(build_graph(edges, n), x.astype(np.float32), y.astype(np.int64), n_classes)


def edge_homophily(g: Graph, y) -> float:
    """Fraction of edges whose endpoints share a class."""
    e = g.edges()
    if len(e) == 0:
        return float("nan")
    y = np.asarray(y)
    return float(np.mean(y[e[:, 0]] == y[e[:, 1]]))

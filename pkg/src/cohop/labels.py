from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class LabelSet:
    """Class ids per node plus the split masks.

    ``y`` holds ``-1`` for nodes whose label is unknown. Only the nodes in
    ``train`` may ever contribute a label to training; ``val`` labels are used
    for epoch selection and ``test`` labels only for reporting.
    """

    y: np.ndarray
    n_classes: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    unseen: np.ndarray | None = None

    @classmethod
    def from_indices(cls, y, n_classes, train, val, test=None, unseen=None):
        y = np.asarray(y, dtype=np.int64)
        n = len(y)

        def mask(idx):
            m = np.zeros(n, dtype=bool)
            m[np.asarray(idx, dtype=np.int64)] = True
            return m

        train_m, val_m = mask(train), mask(val)
        test_m = ~(train_m | val_m) if test is None else mask(test)
        unseen_m = None if unseen is None else mask(unseen)
        return cls(y, int(n_classes), train_m, val_m, test_m, unseen_m)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def seen(self) -> np.ndarray | None:
        if self.unseen is None:
            return None
        return self.test & ~self.unseen

    def one_hot(self, mask=None) -> np.ndarray:
        """(n, C) one-hot rows for nodes in ``mask``, zero elsewhere."""
        mask = self.train if mask is None else mask
        out = np.zeros((self.n, self.n_classes))
        idx = np.flatnonzero(mask)
        out[idx, self.y[idx]] = 1.0
        return out

    def subset(self, kept: np.ndarray) -> LabelSet:
        """Restrict to the nodes ``kept`` (original ids), renumbered in order."""
        return replace(
            self,
            y=self.y[kept],
            train=self.train[kept],
            val=self.val[kept],
            test=self.test[kept],
            unseen=None if self.unseen is None else self.unseen[kept],
        )

"""Quantile binning of raw features into small integer codes."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError


class BinMapper:
    """Per-feature bin edges; value ``x`` falls in bin ``b`` iff edges[b-1] < x <= edges[b].

    NaN ("absent") values map to the reserved code ``max_bins``.
    """

    def __init__(self, max_bins: int = 63):
        if not 2 <= max_bins <= 255:
            raise ConfigError(f"bins must be in [2, 255], got {max_bins}", key="gbm.bins")
        self.max_bins = max_bins
        self.edges: list[np.ndarray] = []

    @property
    def missing_bin(self) -> int:
        return self.max_bins

    def fit(self, X: np.ndarray) -> "BinMapper":
        self.edges = []
        for j in range(X.shape[1]):
            col = X[:, j]
            uniq = np.unique(col[~np.isnan(col)])
            if len(uniq) <= self.max_bins:
                edges = (uniq[:-1] + uniq[1:]) / 2
            else:
                qs = np.linspace(0, 100, self.max_bins + 1)[1:-1]
                edges = np.unique(np.percentile(col[~np.isnan(col)], qs, method="midpoint"))
            self.edges.append(np.asarray(edges, dtype=float))
        return self

    @property
    def n_bins(self) -> np.ndarray:
        """Number of non-missing bins per feature."""
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.uint8)
        for j, edges in enumerate(self.edges):
            col = X[:, j]
            codes = np.searchsorted(edges, col, side="left")
            codes[np.isnan(col)] = self.missing_bin
            out[:, j] = codes
        return out

"""Leaf-wise regression tree grown on gradient/hessian histograms."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K


@dataclass(frozen=True)
class TreeNode:
    split_feature: int
    split_threshold: float
    left: Optional[int]
    right: Optional[int]
    leaf_value: float
    absent_goes: str  # "left" | "right"

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class Tree:
    """Flat node arrays; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    is_leaf: np.ndarray
    bin_threshold: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    def node(self, i: int) -> TreeNode:
        leaf = bool(self.is_leaf[i])
        return TreeNode(
            split_feature=int(self.feature[i]),
            split_threshold=float(self.threshold[i]),
            left=None if leaf else int(self.left[i]),
            right=None if leaf else int(self.right[i]),
            leaf_value=float(self.value[i]),
            absent_goes="left" if self.missing_left[i] else "right",
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        return K.walk_raw(np.ascontiguousarray(X, dtype=np.float64), self.feature,
                          self.threshold, self.missing_left, self.left, self.right,
                          self.value, self.is_leaf)

    def predict_binned(self, binned: np.ndarray, missing_bin: int) -> np.ndarray:
        return K.walk_binned(binned, self.feature, self.bin_threshold, self.missing_left,
                             self.left, self.right, self.value, self.is_leaf, missing_bin)

    def preorder(self) -> "Tree":
        """Copy with nodes renumbered in preorder (root, left subtree, right subtree)."""
        order, stack = [], [0]
        while stack:
            i = stack.pop()
            order.append(i)
            if not self.is_leaf[i]:
                stack.append(int(self.right[i]))
                stack.append(int(self.left[i]))
        pos = np.empty(self.n_nodes, dtype=np.int64)
        pos[order] = np.arange(len(order))
        o = np.array(order)
        remap = lambda a: np.where(self.is_leaf[o], -1, pos[np.maximum(a[o], 0)])  # noqa: E731
        return Tree(self.feature[o], self.threshold[o], self.missing_left[o],
                    remap(self.left), remap(self.right), self.value[o], self.is_leaf[o],
                    None if self.bin_threshold is None else self.bin_threshold[o])


@dataclass
class _Pending:
    rows: np.ndarray
    hist: tuple
    sum_g: float
    sum_h: float
    depth: int
    gain: float = -np.inf
    feature: int = -1
    bin: int = -1
    missing_left: bool = True


def grow_tree(binned, grad, hess, rows, edges, n_bins, missing_bin, *, lambda_l2=1.0,
              max_leaves=31, max_depth=-1, min_data_in_leaf=20, min_sum_hessian=1e-3,
              min_split_gain=0.0) -> Tree:
    """Grow one tree best-first on ``rows`` of the binned matrix.

    Leaves get the Newton value ``-G / (H + lambda_l2)``.
    """
    n_total = missing_bin + 1
    min_data = max(1, int(min_data_in_leaf))

    feature, thr, bthr, mleft, left, right, value, leaf = [], [], [], [], [], [], [], []
    pend: dict[int, _Pending] = {}

    def new_node(p: _Pending) -> int:
        i = len(feature)
        feature.append(0); thr.append(0.0); bthr.append(0); mleft.append(True)  # noqa: E702
        left.append(-1); right.append(-1); leaf.append(True)  # noqa: E702
        value.append(-p.sum_g / (p.sum_h + lambda_l2))
        pend[i] = p
        if (max_depth <= 0 or p.depth < max_depth) and len(p.rows) >= 2 * min_data:
            gain, f, b, ml = K.find_best_split(*p.hist, n_bins, missing_bin, lambda_l2,
                                               min_data, min_sum_hessian)
            p.gain, p.feature, p.bin, p.missing_left = gain, f, b, ml
        return i

    def summarize(hist):
        hg, hh, _ = hist
        return float(hg[0].sum()), float(hh[0].sum())

    hist = K.build_histogram(binned, rows, grad, hess, n_total)
    sg, sh = summarize(hist)
    heap: list = []
    root = new_node(_Pending(rows, hist, sg, sh, 0))
    if pend[root].feature >= 0:
        heapq.heappush(heap, (-pend[root].gain, root))
    n_leaves = 1

    while heap and n_leaves < max_leaves:
        neg_gain, i = heapq.heappop(heap)
        if -neg_gain <= min_split_gain:
            break
        p = pend[i]
        lrows, rrows = K.partition(binned, p.rows, p.feature, p.bin, p.missing_left,
                                   missing_bin)
        if len(lrows) <= len(rrows):
            h_left = K.build_histogram(binned, lrows, grad, hess, n_total)
            h_right = tuple(a - b for a, b in zip(p.hist, h_left))
        else:
            h_right = K.build_histogram(binned, rrows, grad, hess, n_total)
            h_left = tuple(a - b for a, b in zip(p.hist, h_right))
        li = new_node(_Pending(lrows, h_left, *summarize(h_left), p.depth + 1))
        ri = new_node(_Pending(rrows, h_right, *summarize(h_right), p.depth + 1))
        feature[i], bthr[i], mleft[i] = p.feature, p.bin, p.missing_left
        e = edges[p.feature]
        thr[i] = float(e[p.bin]) if p.bin < len(e) else np.inf
        left[i], right[i], leaf[i] = li, ri, False
        n_leaves += 1
        for c in (li, ri):
            if pend[c].feature >= 0:
                heapq.heappush(heap, (-pend[c].gain, c))
        p.hist = None

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(thr, dtype=np.float64),
        missing_left=np.array(mleft, dtype=np.bool_),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        is_leaf=np.array(leaf, dtype=np.bool_),
        bin_threshold=np.array(bthr, dtype=np.int64),
    )

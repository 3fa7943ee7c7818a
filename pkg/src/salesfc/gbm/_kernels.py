"""Compiled inner loops: histograms, split search, partitioning, tree walks."""
import numpy as np
from numba import njit

_JIT = dict(nogil=True, cache=True)


@njit(**_JIT)
def build_histogram(binned, rows, grad, hess, n_bins_total):
    n_features = binned.shape[1]
    hg = np.zeros((n_features, n_bins_total))
    hh = np.zeros((n_features, n_bins_total))
    hc = np.zeros((n_features, n_bins_total), dtype=np.int64)
    for r in rows:
        g = grad[r]
        h = hess[r]
        for j in range(n_features):
            b = binned[r, j]
            hg[j, b] += g
            hh[j, b] += h
            hc[j, b] += 1
    return hg, hh, hc


@njit(**_JIT)
def _score(g, h, lam):
    return g * g / (h + lam)


@njit(**_JIT)
def find_best_split(hg, hh, hc, n_bins, missing_bin, lam, min_data, min_hess):
    """Best (gain, feature, bin, missing_left) over every feature and bin boundary.

    Splitting at bin ``b`` sends bins ``0..b`` left. Absent values go to the
    side that scores better; with no absent rows they go left. Ties keep the
    first candidate in (feature, bin) order.
    """
    n_features = hg.shape[0]
    best_gain = -np.inf
    best_f = -1
    best_b = -1
    best_ml = True
    for j in range(n_features):
        G = 0.0
        H = 0.0
        C = 0
        for b in range(n_bins[j]):
            G += hg[j, b]
            H += hh[j, b]
            C += hc[j, b]
        gm = hg[j, missing_bin]
        hm = hh[j, missing_bin]
        cm = hc[j, missing_bin]
        G += gm
        H += hm
        C += cm
        parent = _score(G, H, lam)
        gl = 0.0
        hl = 0.0
        cl = 0
        last = n_bins[j] - 1 if cm == 0 else n_bins[j]
        for b in range(last):
            gl += hg[j, b]
            hl += hh[j, b]
            cl += hc[j, b]
            for ml in (True, False):
                if ml:
                    GL = gl + gm
                    HL = hl + hm
                    CL = cl + cm
                else:
                    if cm == 0:
                        continue
                    GL = gl
                    HL = hl
                    CL = cl
                GR = G - GL
                HR = H - HL
                CR = C - CL
                if CL < min_data or CR < min_data or HL < min_hess or HR < min_hess:
                    continue
                gain = _score(GL, HL, lam) + _score(GR, HR, lam) - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = j
                    best_b = b
                    best_ml = ml
    return best_gain, best_f, best_b, best_ml


@njit(**_JIT)
def partition(binned, rows, feature, bin_threshold, missing_left, missing_bin):
    n = len(rows)
    go_left = np.empty(n, dtype=np.bool_)
    n_left = 0
    for i in range(n):
        b = binned[rows[i], feature]
        if b == missing_bin:
            left = missing_left
        else:
            left = b <= bin_threshold
        go_left[i] = left
        if left:
            n_left += 1
    left_rows = np.empty(n_left, dtype=rows.dtype)
    right_rows = np.empty(n - n_left, dtype=rows.dtype)
    li = 0
    ri = 0
    for i in range(n):
        if go_left[i]:
            left_rows[li] = rows[i]
            li += 1
        else:
            right_rows[ri] = rows[i]
            ri += 1
    return left_rows, right_rows


@njit(**_JIT)
def walk_raw(X, feature, threshold, missing_left, left, right, value, is_leaf):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while not is_leaf[node]:
            x = X[i, feature[node]]
            if np.isnan(x):
                go_left = missing_left[node]
            else:
                go_left = x <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = value[node]
    return out


@njit(**_JIT)
def walk_binned(binned, feature, bin_threshold, missing_left, left, right, value, is_leaf,
                missing_bin):
    n = binned.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while not is_leaf[node]:
            b = binned[i, feature[node]]
            if b == missing_bin:
                go_left = missing_left[node]
            else:
                go_left = b <= bin_threshold[node]
            node = left[node] if go_left else right[node]
        out[i] = value[node]
    return out

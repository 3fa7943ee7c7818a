"""Simplified gradient-based one-side sampling."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError


def goss_sample(gradients, top_rate: float = 0.2, other_rate: float = 0.1, seed=0):
    """Keep the largest-|gradient| rows and a reweighted uniform sample of the rest.

    Returns ``(indices, weights)`` with indices ascending. The top
    ``ceil(top_rate * n)`` rows keep weight 1; ``ceil(other_rate * n)`` of the
    remaining rows (fewer if not enough remain) get weight
    ``(1 - top_rate) / other_rate``.
    """
    if top_rate <= 0 or other_rate <= 0 or top_rate + other_rate > 1:
        raise ConfigError(
            f"GOSS rates need 0 < a, 0 < b, a + b <= 1 (got a={top_rate}, b={other_rate})",
            key="gbm.goss")
    g = np.abs(np.asarray(gradients, dtype=float))
    n = len(g)
    n_top = min(n, math.ceil(top_rate * n))
    order = np.argsort(-g, kind="stable")
    top, rest = order[:n_top], order[n_top:]
    n_other = min(len(rest), math.ceil(other_rate * n))
    rng = np.random.default_rng(seed)
    other = rng.choice(rest, size=n_other, replace=False) if n_other else rest[:0]
    idx = np.concatenate([top, other])
    w = np.concatenate([np.ones(n_top), np.full(n_other, (1 - top_rate) / other_rate)])
    order = np.argsort(idx, kind="stable")
    return idx[order], w[order]

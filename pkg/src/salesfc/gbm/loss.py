"""Training objectives for the booster.

Tweedie uses a log link: the raw score ``f`` maps to a mean ``mu = exp(f)``.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DomainError

RAW_CLAMP = 30.0
HESSIAN_FLOOR = 1e-16


def _check_power(p: float) -> None:
    if not 1.0 < p < 2.0:
        raise ConfigError(f"Tweedie power must lie strictly in (1, 2), got {p}",
                          key="gbm.tweedie_power")


def tweedie_loss(y, mu, p: float = 1.5):
    """Per-sample Tweedie negative log-likelihood (up to terms free of ``mu``)."""
    _check_power(p)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise DomainError("Tweedie mean must be strictly positive")
    out = -y * mu ** (1 - p) / (1 - p) + mu ** (2 - p) / (2 - p)
    return out if out.ndim else float(out)


def tweedie_grad_hess(y, f, p: float = 1.5):
    """Gradient and hessian of the Tweedie loss with respect to the raw score."""
    _check_power(p)
    y = np.asarray(y, dtype=float)
    f = np.clip(np.asarray(f, dtype=float), -RAW_CLAMP, RAW_CLAMP)
    a = np.exp((1 - p) * f)
    b = np.exp((2 - p) * f)
    grad = -y * a + b
    hess = np.maximum(-y * (1 - p) * a + (2 - p) * b, HESSIAN_FLOOR)
    return grad, hess


class TweedieLoss:
    name = "tweedie"

    def __init__(self, power: float = 1.5):
        _check_power(power)
        self.power = power

    def base_score(self, y: np.ndarray) -> float:
        return float(np.log(np.mean(y) + 1e-9))

    def grad_hess(self, y, raw):
        return tweedie_grad_hess(y, raw, self.power)

    def mean_loss(self, y, raw) -> float:
        mu = np.exp(np.clip(raw, -RAW_CLAMP, RAW_CLAMP))
        return float(np.mean(tweedie_loss(y, mu, self.power)))

    def transform(self, raw):
        return np.exp(raw)


class MSELoss:
    name = "mse"
    power = None

    def base_score(self, y: np.ndarray) -> float:
        return float(np.mean(y))

    def grad_hess(self, y, raw):
        return raw - y, np.ones_like(raw)

    def mean_loss(self, y, raw) -> float:
        return float(0.5 * np.mean((y - raw) ** 2))

    def transform(self, raw):
        return raw


def make_loss(name: str, power: float = 1.5):
    if name == "tweedie":
        return TweedieLoss(power)
    if name == "mse":
        return MSELoss()
    raise ConfigError(f"unknown loss {name!r}; expected 'tweedie' or 'mse'", key="gbm.loss")

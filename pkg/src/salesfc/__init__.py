"""Hierarchical retail sales forecasting: trend/seasonality grouping, Tweedie GBM
allocation weights, piecewise-linear group totals and WRMSSE evaluation."""

__version__ = "0.1.0"

"""Mean / standard-error reduction shared by the estimator drivers."""

from __future__ import annotations

import math

import numpy as np


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error, by pairwise summation.

    A batch of identical contributions reports stderr 0 and the common
    value exactly: summing n copies and dividing by n can be off by an ulp,
    which would otherwise turn a deterministic estimator into one with a
    1e-18 spread.
    """
    n = values.size
    if n == 0:
        return float("nan"), float("nan")
    if n == 1:
        return float(values[0]), float("nan")
    if np.ptp(values) == 0.0:
        return float(values[0]), 0.0
    mean = float(np.sum(values)) / n
    var = float(np.sum((values - mean) ** 2)) / (n - 1)
    return mean, math.sqrt(var / n)

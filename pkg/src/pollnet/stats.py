"""Batch-means confidence intervals for steady-state simulation output."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


class InsufficientSamplesError(ValueError):
    pass


def _halfwidth(means: np.ndarray, level: float) -> float:
    k = len(means)
    spread = float(np.std(means, ddof=1))
    return float(stats.t.ppf(0.5 + level / 2.0, k - 1)) * spread / math.sqrt(k)


def batch_means(samples, batches: int = 20, level: float = 0.95) -> tuple[float, float]:
    """Mean and CI half-width from equal, contiguous batches.

    The tail that does not fill a whole batch is dropped.
    """
    x = np.asarray(samples, dtype=float)
    if batches < 2:
        raise ValueError("need at least two batches")
    if len(x) < 2 * batches:
        raise InsufficientSamplesError(f"{len(x)} samples cannot fill {batches} batches of two")
    size = len(x) // batches
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.mean()), _halfwidth(means, level)


def ratio_batch_means(sums, counts, level: float = 0.95):
    """Per-column means and half-widths from batch totals.

    ``sums`` and ``counts`` are ``(batches, k)``. The point estimate pools
    every sample; the half-width comes from the spread of the batch means.
    Columns with an empty batch get an infinite half-width.
    """
    sums = np.asarray(sums, dtype=float)
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums.sum(axis=0) / total
        per_batch = sums / counts
    hw = np.empty(sums.shape[1])
    for k in range(sums.shape[1]):
        if np.all(counts[:, k] > 0):
            hw[k] = _halfwidth(per_batch[:, k], level)
        else:
            hw[k] = math.inf
    return mean, hw

"""Small statistical helpers: batch-means standard errors, Welch t, KS critical value."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError


def mean_and_se(values: np.ndarray, n_batches: int = 100) -> tuple[float, float]:
    """Mean of `values` with a batch-means standard error.

    Replications are split into up to `n_batches` near-equal batches; the SE is
    the standard deviation of batch means scaled by 1/sqrt(#batches). With one
    observation per batch this reduces to the plain iid standard error.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise InputError("mean_and_se expects a 1-d array with at least 2 values")
    return float(values.mean()), batch_se(values, n_batches=n_batches)


def batch_se(values: np.ndarray, n_batches: int = 100) -> float:
    values = np.asarray(values, dtype=float)
    b = min(n_batches, values.size)
    batches = np.array_split(values, b)
    means = np.array([chunk.mean() for chunk in batches])
    if b < 2:
        return float("nan")
    return float(means.std(ddof=1) / math.sqrt(b))


def batched(values: np.ndarray, n_batches: int = 100) -> list[np.ndarray]:
    """Split into the same batches mean_and_se uses (for paired batch statistics)."""
    values = np.asarray(values, dtype=float)
    return np.array_split(values, min(n_batches, values.size))


def welch_t(a: np.ndarray, b: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Welch two-sample t statistic and degrees of freedom along `axis`.

    Hand-rolled so it vectorizes across replicates; agrees with
    scipy.stats.ttest_ind(equal_var=False).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.shape[axis], b.shape[axis]
    if na < 2 or nb < 2:
        raise InputError("welch_t needs at least 2 observations per group")
    ma, mb = a.mean(axis=axis), b.mean(axis=axis)
    va, vb = a.var(axis=axis, ddof=1), b.var(axis=axis, ddof=1)
    sa, sb = va / na, vb / nb
    t = (ma - mb) / np.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    return t, dof


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup|F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_critical_value(n: int, m: int, alpha: float) -> float:
    """Large-sample two-sample KS rejection threshold at level alpha."""
    if not 0 < alpha < 1:
        raise InputError("alpha must be in (0, 1)")
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))

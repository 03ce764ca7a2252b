"""Sample-quality metrics: per-input diversity, energy distance, moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def diversity(sets: list[np.ndarray], k: int = 5, sample_sd: bool = False) -> float:
    """Average per-dimension spread across k samples of the same input.

    For each conditioning input: the standard deviation of its k samples,
    per dimension, averaged over dimensions; then averaged over inputs.
    Population form (divisor k) by default; ``sample_sd`` switches to the
    k-1 divisor. Reported in raw data units.
    """
    if not sets:
        raise ValueError("need at least one sample set")
    ddof = 1 if sample_sd else 0
    per_input = []
    dim = None
    for i, arr in enumerate(sets):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != k:
            raise ValueError(f"set {i} must hold exactly k={k} samples, got shape {arr.shape}")
        if dim is None:
            dim = arr.shape[1]
        elif arr.shape[1] != dim:
            raise ValueError(f"set {i} has dimension {arr.shape[1]}, expected {dim}")
        per_input.append(float(np.mean(np.std(arr, axis=0, ddof=ddof))))
    return float(np.mean(per_input))


def _pairwise_mean_norm(a: np.ndarray, b: np.ndarray) -> float:
    # All-pairs V-statistic (diagonal included), so identical sets give 0.
    diff = a[:, None, :] - b[None, :, :]
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=2))))


def energy_distance(a, b) -> float:
    """2 E|a-b| - E|a-a'| - E|b-b'| over all pairs; zero iff the empirical
    distributions coincide (up to estimator noise)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise ValueError("both sample lists must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return 2.0 * _pairwise_mean_norm(a, b) - _pairwise_mean_norm(a, a) - _pairwise_mean_norm(b, b)


@dataclass(frozen=True)
class Moments:
    """Per-dimension sample mean and unbiased variance; ``var_defined`` is
    False for a single sample, where the variance is reported as zero."""

    mean: np.ndarray
    var: np.ndarray
    var_defined: bool


def moments(samples) -> Moments:
    arr = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if arr.shape[0] < 1:
        raise ValueError("need at least one sample")
    mean = arr.mean(axis=0)
    if arr.shape[0] == 1:
        return Moments(mean=mean, var=np.zeros_like(mean), var_defined=False)
    return Moments(mean=mean, var=arr.var(axis=0, ddof=1), var_defined=True)

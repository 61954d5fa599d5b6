"""Cumulant estimators from sampled kink counts."""

from __future__ import annotations

import numpy as np

from ..batch import BitstringBatch
from ..errors import DomainError
from ..model import CumulantSet


def estimate_cumulants(batch: BitstringBatch, N: int | None = None) -> CumulantSet:
    """Sample cumulants of the kink density n = k/N.

    kappa_2 uses the unbiased (S - 1) variance and kappa_3 the k-statistic
    S^2 m_3 / ((S - 1)(S - 2)). Standard errors are the usual large-sample
    ones expressed through central moments.
    """
    if batch.basis != "X":
        raise DomainError("kink statistics need X-basis records")
    N = batch.n_qubits if N is None else N
    w = batch.weights
    S = float(w.sum())
    if S <= 0:
        raise DomainError("empty batch")
    n = batch.kink_counts() / N
    mean = float(w @ n / S)
    d = n - mean
    m2, m3, m4, m6 = (float(w @ d**p / S) for p in (2, 3, 4, 6))
    k2 = m2 * S / (S - 1) if S > 1 else 0.0
    k3 = m3 * S * S / ((S - 1) * (S - 2)) if S > 2 else m3
    se1 = np.sqrt(k2 / S)
    se2 = np.sqrt(max(m4 - m2 * m2, 0.0) / S)
    se3 = np.sqrt(max(m6 - m3 * m3 - 6 * m4 * m2 + 9 * m2**3, 0.0) / S)
    return CumulantSet(
        mean, max(k2, 0.0), k3, float(se1), float(se2), float(se3),
        metadata={"shots": int(S), "variance_estimator": "unbiased", "kappa3_estimator": "k-statistic"},
    )


def plugin_cumulants(n: np.ndarray, weights: np.ndarray | None = None) -> tuple[float, float, float]:
    """Population (plug-in) cumulants of a weighted sample of densities."""
    w = np.ones_like(n, dtype=float) if weights is None else np.asarray(weights, dtype=float)
    S = w.sum()
    mean = w @ n / S
    d = n - mean
    return float(mean), float(w @ d**2 / S), float(w @ d**3 / S)

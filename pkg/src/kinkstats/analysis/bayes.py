"""Posterior data augmentation for error bars on (mitigated) cumulants.

Observed bitstrings get a Dirichlet posterior (counts plus a pseudocount);
each replica draws a probability vector, resamples L shots from it, and
reruns the full estimator. Only strings seen at least once carry mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..batch import BitstringBatch
from ..model import CumulantSet
from ..statevector import make_rng
from .estimators import estimate_cumulants


@dataclass
class PosteriorConfig:
    prior_pseudocount: float = 1.0
    n_replicas: int = 500
    resample_size: Optional[int] = None  # None -> number of observed shots
    ci_level: float = 0.95

    def __post_init__(self):
        if not self.prior_pseudocount > 0:
            raise ValueError("prior pseudocount must be positive")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")


@dataclass
class BayesResult:
    intervals: list  # three (lo, hi) tuples
    replicas: np.ndarray  # (R, 3)
    config: PosteriorConfig
    degenerate: bool = False

    @property
    def std(self) -> np.ndarray:
        return self.replicas.std(axis=0, ddof=1) if len(self.replicas) > 1 else np.zeros(3)

    def interval(self, m: int) -> tuple[float, float]:
        return self.intervals[m - 1]

    def attach(self, cs: CumulantSet) -> CumulantSet:
        cs.ci95_1, cs.ci95_2, cs.ci95_3 = (tuple(i) for i in self.intervals)
        cs.metadata["posterior_std"] = self.std.tolist()
        cs.metadata["posterior_replicas"] = int(len(self.replicas))
        return cs


def _as_batch(counts) -> BitstringBatch:
    if isinstance(counts, BitstringBatch):
        agg = counts.to_counts()
        return BitstringBatch.from_counts(agg, basis=counts.basis)
    return BitstringBatch.from_counts(dict(counts))


def bayesian_intervals(counts, estimator: Optional[Callable[[BitstringBatch], CumulantSet]] = None,
                       config: Optional[PosteriorConfig] = None, seed=0) -> BayesResult:
    """Equal-tailed posterior intervals for kappa_1..3.

    ``counts`` is a mapping bitstring -> count or a batch. ``estimator`` maps a
    resampled (weighted) batch to a :class:`CumulantSet`; by default the plain
    sample estimator.
    """
    config = config or PosteriorConfig()
    base = _as_batch(counts)
    keep = base.counts > 0
    base = base.select(keep)
    if base.n_rows == 0:
        raise ValueError("no observed strings")
    estimator = estimator or (lambda b: estimate_cumulants(b))
    L = config.resample_size or base.shots
    rng = make_rng(seed)
    if base.n_rows == 1:
        warnings.warn("single observed string: posterior is degenerate", stacklevel=2)
        k = np.array(estimator(base).kappas)
        return BayesResult([(v, v) for v in k], k[None, :], config, degenerate=True)
    alpha = base.counts + config.prior_pseudocount
    out = np.empty((config.n_replicas, 3))
    for i in range(config.n_replicas):
        p = rng.dirichlet(alpha)
        m = rng.multinomial(L, p)
        rep = BitstringBatch(base.bits, 0, 0, base.basis, m)
        out[i] = estimator(rep).kappas
    tail = (1 - config.ci_level) / 2 * 100
    lo = np.percentile(out, tail, axis=0)
    hi = np.percentile(out, 100 - tail, axis=0)
    return BayesResult([(float(a), float(b)) for a, b in zip(lo, hi)], out, config)

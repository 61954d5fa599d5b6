"""Power-law decay fits of the kink cumulants against the quench time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import FitError
from ..model import CumulantSet


@dataclass
class SweepPoint:
    tau_Q: float
    r: int
    cumulants: CumulantSet
    shots: int = 0
    backend: str = "statevector"
    mitigation: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tau_Q > 0:
            raise ValueError("tau_Q must be positive")
        if self.cumulants is None:
            raise ValueError("sweep point without cumulants")


@dataclass
class FitResult:
    alpha: float
    alpha_stderr: float
    window: tuple
    n_points: int
    residual_rms: float
    intercept: float = 0.0
    cumulant: int = 1
    tau_f: float = float("nan")
    tau_f_crossed: bool = True
    points_used: list = field(default_factory=list)
    replica_stderr: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "cumulant": self.cumulant,
            "alpha": self.alpha,
            "stderr": self.alpha_stderr,
            "window": list(self.window),
            "points_used": self.points_used,
            "residual_rms": self.residual_rms,
            "tau_f": self.tau_f,
            "tau_f_crossed": self.tau_f_crossed,
            "replica_stderr": self.replica_stderr,
        }


def find_tau_f(taus: Sequence[float], kappa1: Sequence[float], N: int) -> tuple[float, bool]:
    """First quench time where kappa_1 falls to 1/N, interpolated in log-log.

    Returns ``(tau_f, crossed)``; when the sweep never reaches 1/N the last
    quench time is returned with ``crossed=False``.
    """
    taus = np.asarray(taus, dtype=float)
    k = np.asarray(kappa1, dtype=float)
    order = np.argsort(taus)
    taus, k = taus[order], k[order]
    target = 1.0 / N
    for i in range(len(taus) - 1):
        if k[i] >= target > k[i + 1]:
            if k[i + 1] <= 0:
                return float(taus[i + 1]), True
            x0, x1 = np.log(taus[i]), np.log(taus[i + 1])
            y0, y1 = np.log(k[i]), np.log(k[i + 1])
            frac = (np.log(target) - y0) / (y1 - y0)
            return float(np.exp(x0 + frac * (x1 - x0))), True
    if len(taus) and k[0] < target:
        return float(taus[0]), True
    return float(taus[-1]), False


def power_law_fit(taus, values, weights=None):
    """OLS (or weighted LS) of log(values) on log(taus): returns slope, intercept,
    slope stderr and residual RMS."""
    x = np.log(np.asarray(taus, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    n = len(x)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    W = w.sum()
    xm, ym = w @ x / W, w @ y / W
    sxx = w @ (x - xm) ** 2
    slope = float(w @ ((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    dof = max(n - 2, 1)
    if weights is None:
        s2 = float(resid @ resid / dof)
        se = np.sqrt(s2 / sxx)
    else:
        s2 = float(w @ resid**2 / dof)
        se = np.sqrt(s2 / sxx)
    return slope, intercept, float(se), float(np.sqrt(np.mean(resid**2)))


def fit_decay(points: Sequence[SweepPoint], cumulant_index: int = 1, N: Optional[int] = None,
              window_override: Optional[tuple] = None, weighted: bool = False, tau_lo: float = 1.0,
              n_replicas: int = 200, seed: int = 0) -> FitResult:
    """Fit kappa_m ~ tau_Q^(-alpha) over [1, tau_f].

    tau_f is where kappa_1 reaches 1/N (see :func:`find_tau_f`) unless a
    window is forced. Besides the regression stderr, ``replica_stderr`` is the
    spread of alpha over refits with each point redrawn from its own error
    bar (None when the points carry no finite errors).
    """
    if not points:
        raise FitError("no sweep points")
    taus = np.array([p.tau_Q for p in points])
    k1 = np.array([p.cumulants.kappa1 for p in points])
    vals = np.array([p.cumulants.kappa(cumulant_index) for p in points])
    errs = np.array([p.cumulants.stderrs[cumulant_index - 1] for p in points])
    if window_override is not None:
        lo, hi = map(float, window_override)
        tau_f, crossed = hi, True
    else:
        if N is None:
            raise FitError("N is needed to locate tau_f")
        tau_f, crossed = find_tau_f(taus, k1, N)
        lo, hi = tau_lo, tau_f
    eps = 1e-9
    sel = (taus >= lo * (1 - eps)) & (taus <= hi * (1 + eps))
    sel &= vals > 0
    if sel.sum() < 3:
        raise FitError(f"only {int(sel.sum())} usable points in window [{lo}, {hi}]")
    w = None
    if weighted:
        rel = errs[sel] / vals[sel]
        if np.any(~np.isfinite(rel)) or np.any(rel <= 0):
            raise FitError("weighted fit needs finite positive standard errors")
        w = 1.0 / rel**2
    slope, intercept, se, rms = power_law_fit(taus[sel], vals[sel], w)
    rep_se = _replica_spread(taus[sel], vals[sel], errs[sel], w, n_replicas, seed)
    return FitResult(
        alpha=-slope, alpha_stderr=se, window=(lo, hi), n_points=int(sel.sum()), residual_rms=rms,
        intercept=intercept, cumulant=cumulant_index, tau_f=tau_f, tau_f_crossed=crossed,
        points_used=[float(t) for t in taus[sel]], replica_stderr=rep_se,
    )


def _replica_spread(taus, vals, errs, w, n, seed) -> Optional[float]:
    if n < 2 or not np.all(np.isfinite(errs)) or not np.all(errs > 0):
        return None
    rng = np.random.default_rng(seed)
    draws = vals + errs * rng.standard_normal((n, len(vals)))
    slopes = [power_law_fit(taus, d, w)[0] for d in draws if np.all(d > 0)]
    if len(slopes) < 2:
        return None
    return float(np.std(slopes, ddof=1))

"""Maximum-entropy kink-count distribution from its first three moments."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import logsumexp

from ..errors import FeasibilityError, SolverError


@dataclass
class MaxEntSolution:
    N: int
    lagrange: tuple  # multipliers of k, k^2, k^3 (count scale)
    pmf: np.ndarray  # over k = 0..N-1
    moments_in: tuple
    moment_residuals: np.ndarray
    iterations: int = 0
    dual_history: list = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.N)

    @property
    def densities(self) -> np.ndarray:
        return self.support / self.N

    def moments(self) -> np.ndarray:
        x = self.densities
        return np.array([self.pmf @ x**m for m in (1, 2, 3)])

    def cumulants(self) -> tuple[float, float, float]:
        m1, m2, m3 = self.moments()
        k2 = m2 - m1 * m1
        return float(m1), float(k2), float(m3 - 3 * m1 * k2 - m1**3)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "moments_in": list(self.moments_in),
            "lambda": list(self.lagrange),
            "pmf": self.pmf.tolist(),
        }


def check_feasible(mu1: float, mu2: float, mu3: float, lo: float, hi: float, tol: float = 0.0) -> None:
    """Hankel-type conditions for moments of a distribution on [lo, hi].

    Raises :class:`FeasibilityError` unless all localizing matrices are
    positive definite (strictly, since the max-entropy solution only exists
    in the interior of the moment space).
    """
    checks = {
        "variance": np.array([[1.0, mu1], [mu1, mu2]]),
        "lower": np.array([[mu1 - lo, mu2 - lo * mu1], [mu2 - lo * mu1, mu3 - lo * mu2]]),
        "upper": np.array([[hi - mu1, hi * mu1 - mu2], [hi * mu1 - mu2, hi * mu2 - mu3]]),
    }
    scalar = (hi + lo) * mu1 - lo * hi - mu2
    if not scalar > tol:
        raise FeasibilityError(f"moments violate (hi - x)(x - lo) >= 0: {scalar:.3e}")
    for name, m in checks.items():
        ev = np.linalg.eigvalsh(m)
        if not ev.min() > tol:
            raise FeasibilityError(f"moments infeasible on [{lo}, {hi}] ({name} matrix eigenvalue {ev.min():.3e})")


def _shifted_moments(mu, c, s):
    """E[((x - c)/s)^j] for j = 1..3 from raw moments of x."""
    raw = [1.0, *mu]
    out = []
    for j in (1, 2, 3):
        val = sum(comb(j, i) * raw[i] * (-c) ** (j - i) for i in range(j + 1))
        out.append(val / s**j)
    return np.array(out)


def _to_count_polynomial(nu, N, c, s):
    """Coefficients of k, k^2, k^3 for sum_j nu_j ((k/N - c)/s)^j."""
    a, b = 1.0 / (N * s), -c / s  # u = a k + b
    coef = np.zeros(4)
    for j, v in enumerate(nu, start=1):
        for i in range(j + 1):
            coef[i] += v * comb(j, i) * a**i * b ** (j - i)
    return tuple(float(x) for x in coef[1:])


def maxent_pmf(moments, N: int, tol: float = 1e-9, max_iter: int = 200, check: bool = True) -> MaxEntSolution:
    """Entropy-maximizing pmf on k = 0..N-1 with prescribed E[n], E[n^2], E[n^3], n = k/N.

    The dual (log-partition minus target inner product) is minimized by Newton
    steps with backtracking, in a centred and rescaled variable for
    conditioning; multipliers are reported on the count scale so that
    P(k) is proportional to exp(l1 k + l2 k^2 + l3 k^3).
    """
    mu = np.asarray(moments, dtype=float)
    if N < 2:
        raise FeasibilityError("need at least two support points")
    x = np.arange(N) / N
    lo, hi = 0.0, (N - 1) / N
    if check:
        check_feasible(*mu, lo, hi)
    c, s = (lo + hi) / 2, (hi - lo) / 2
    u = (x - c) / s
    F = np.stack([u, u**2, u**3], axis=1)
    target = _shifted_moments(mu, c, s)

    def dual(nu):
        return logsumexp(F @ nu) - nu @ target

    nu = np.zeros(3)
    history = [dual(nu)]
    for it in range(1, max_iter + 1):
        logits = F @ nu
        p = np.exp(logits - logsumexp(logits))
        mean = p @ F
        grad = mean - target
        if np.linalg.norm(grad) <= tol:
            break
        d = F - mean
        hess = (d.T * p) @ d
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        t, f0 = 1.0, history[-1]
        slope = grad @ step
        while t > 1e-12:
            cand = nu + t * step
            fc = dual(cand)
            if fc <= f0 + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            raise SolverError("line search failed", residuals=grad)
        nu = cand
        history.append(fc)
    else:
        raise SolverError(f"no convergence in {max_iter} iterations", residuals=grad)
    logits = F @ nu
    pmf = np.exp(logits - logsumexp(logits))
    pmf /= pmf.sum()
    resid = np.array([pmf @ x**m for m in (1, 2, 3)]) - mu
    return MaxEntSolution(N, _to_count_polynomial(nu, N, c, s), pmf, tuple(mu.tolist()), resid, it, history)


def moments_of_pmf(pmf, N: int) -> np.ndarray:
    x = np.arange(len(pmf)) / N
    pmf = np.asarray(pmf, dtype=float)
    return np.array([pmf @ x**m for m in (1, 2, 3)])

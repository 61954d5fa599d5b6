"""Reconstruct a kink-number distribution from three cumulants.

The first three sampled moments of a 10-spin quench are fed to the maximum
entropy solver; its PMF is compared with the sampled histogram.

    python demos/maxent_distribution.py
"""

import numpy as np

from kinkstats import statevector as sv
from kinkstats.analysis.estimators import estimate_cumulants
from kinkstats.analysis.maxent import maxent_pmf
from kinkstats.trotter import quench_circuit

N, SHOTS = 10, 50_000
state = sv.final_state(quench_circuit(N, 1.5, 20))
batch = sv.sample(state, SHOTS, seed=4)
k1, k2, k3 = estimate_cumulants(batch, N).kappas
sol = maxent_pmf((k1, k2 + k1 * k1, k3 + 3 * k1 * k2 + k1**3), N)

hist = np.bincount(batch.kink_counts(), weights=batch.weights, minlength=N)[:N] / batch.shots
print(" k  sampled  maxent")
for k in range(N):
    print(f"{k:2d}  {hist[k]:7.4f}  {sol.pmf[k]:7.4f}")
print(f"lambda = {np.round(sol.lagrange, 4)}  total variation = {0.5 * np.abs(hist - sol.pmf).sum():.4f}")

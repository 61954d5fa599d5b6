"""Noisy quench on 6 spins, with and without error mitigation.

Local two-qubit depolarizing noise and asymmetric readout flips are injected.
The mitigated estimate combines Pauli twirling, twirled readout calibration,
and a renormalization factor measured on the zero-field reference circuit.

    python demos/mitigation_walkthrough.py
"""

from kinkstats import mitigation as mt
from kinkstats import statevector as sv
from kinkstats.analysis.estimators import estimate_cumulants
from kinkstats.statevector import NoiseModel
from kinkstats.trotter import build_reference_circuit, quench_circuit

N, TAU, R = 6, 2.0, 10
SHOTS, TWIRLS = 40_000, 50

circuit = quench_circuit(N, TAU, R)
truth = sv.kink_moments(sv.final_state(circuit), (1,))[0]
noise = NoiseModel(two_qubit_depol=0.01, readout_flip=(0.02, 0.05))

raw = mt.run_twirled(circuit, noise, SHOTS, TWIRLS, seed=1)
naive = estimate_cumulants(raw, N)

confusion = mt.calibrate_readout(N, 200_000, noise, seed=2, n_twirls=TWIRLS)
renorm = mt.estimate_renorm(build_reference_circuit(circuit), noise, SHOTS, TWIRLS, confusion=confusion, seed=3)
fixed = mt.mitigate_cumulants(raw, N, confusion, renorm, twirled=True)

print(f"noiseless kappa1   {truth:.4f}")
print(f"raw                {naive.kappa1:.4f} +- {naive.stderr1:.4f}")
print(f"renorm factor      {renorm.value:.4f} +- {renorm.stderr:.4f}")
print(f"mitigated          {fixed.kappa1:.4f} +- {fixed.stderr1:.4f}")
print("the reference circuit decays slightly faster than the quench itself, so a")
print("small over-correction remains at this noise strength")

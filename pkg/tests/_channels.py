"""Dense density-matrix reference for the local depolarizing channel."""

from functools import reduce

import numpy as np

from kinkstats import oracle
from kinkstats.trotter import COUP


def paulis_2q():
    P = [oracle.I2, oracle.X, oracle.Y, oracle.Z]
    return [np.kron(P[a], P[b]) for a in range(4) for b in range(4)][1:]


def density_matrix_run(circuit, lam):
    """Exact channel evolution: after each coupling gate, rho -> (1-lam) rho + lam/15 sum P rho P."""
    N = circuit.n_qubits
    rho = np.outer(oracle.zero_state(N), oracle.zero_state(N).conj())
    paulis = paulis_2q()
    for op in circuit.body:
        U = oracle.gate_matrix(op, N)
        rho = U @ rho @ U.conj().T
        if op.kind == COUP:
            q = op.qubit
            mix = np.zeros_like(rho)
            for P in paulis:
                full = reduce(np.kron, [np.eye(2**q), P, np.eye(2 ** (N - q - 2))])
                mix += full @ rho @ full.conj().T
            rho = (1 - lam) * rho + lam / 15 * mix
    return rho


def bond_xx(rho, N):
    return np.array([np.trace(rho @ oracle.embed(N, {i: oracle.X, i + 1: oracle.X})).real for i in range(N - 1)])

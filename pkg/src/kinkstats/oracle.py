"""Dense-matrix and ODE references for small chains.

Everything here is built from Kronecker products and ``scipy.linalg.expm`` /
``scipy.integrate.solve_ivp``, deliberately sharing no code with the
simulation kernels it is used to check.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.integrate
import scipy.linalg

from .model import QuenchSchedule, hamiltonian_coefficients
from .trotter import COUP, FIELD, H_LAYER, Circuit, GateOp

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SINGLE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def embed(N: int, factors: dict) -> np.ndarray:
    """Kronecker product with ``factors[q]`` on qubit q (qubit 0 leftmost)."""
    return reduce(np.kron, [factors.get(q, I2) for q in range(N)])


def pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, [SINGLE[c] for c in label])


def hamiltonian(schedule: QuenchSchedule, t: float, N: int) -> np.ndarray:
    J, h = hamiltonian_coefficients(schedule, t)
    return -J * coupling_sum(N) - h * field_sum(N)


def coupling_sum(N: int) -> np.ndarray:
    return sum(embed(N, {i: X, i + 1: X}) for i in range(N - 1))


def field_sum(N: int) -> np.ndarray:
    return sum(embed(N, {q: Z}) for q in range(N))


def kink_operator(N: int) -> np.ndarray:
    dim = 2**N
    return sum(np.eye(dim) - embed(N, {i: X, i + 1: X}) for i in range(N - 1)) / (2 * N)


def gate_matrix(op: GateOp, N: int) -> np.ndarray:
    if op.kind == FIELD:
        return scipy.linalg.expm(1j * op.angle * embed(N, {op.qubit: Z}))
    if op.kind == COUP:
        return scipy.linalg.expm(1j * op.angle * embed(N, {op.qubit: X, op.qubit + 1: X}))
    if op.kind == H_LAYER:
        return reduce(np.kron, [H] * N)
    return embed(N, {op.qubit: SINGLE[op.kind]})


def circuit_unitary(circuit: Circuit, body_only: bool = True) -> np.ndarray:
    N = circuit.n_qubits
    U = np.eye(2**N, dtype=complex)
    for op in circuit.body if body_only else circuit.ops:
        U = gate_matrix(op, N) @ U
    return U


def ops_unitary(ops, N: int) -> np.ndarray:
    U = np.eye(2**N, dtype=complex)
    for op in ops:
        U = gate_matrix(op, N) @ U
    return U


def zero_state(N: int) -> np.ndarray:
    psi = np.zeros(2**N, dtype=complex)
    psi[0] = 1
    return psi


def plus_state(N: int) -> np.ndarray:
    return np.full(2**N, 2 ** (-N / 2), dtype=complex)


def evolve_exact(schedule: QuenchSchedule, N: int, t_final=None, rtol=1e-12, atol=1e-13) -> np.ndarray:
    """Time-ordered evolution of |0...0> by direct ODE integration."""
    t_final = schedule.tau_Q if t_final is None else t_final
    ZZ = field_sum(N)
    XX = coupling_sum(N)

    def rhs(t, y):
        J, h = hamiltonian_coefficients(schedule, t)
        return 1j * (J * (XX @ y) + h * (ZZ @ y))

    sol = scipy.integrate.solve_ivp(
        rhs, (0.0, t_final), zero_state(N), method="DOP853", rtol=rtol, atol=atol
    )
    if not sol.success:
        raise RuntimeError(sol.message)
    psi = sol.y[:, -1]
    return psi / np.linalg.norm(psi)


def expectation(psi: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, op @ psi)))


def exact_kink_moments(schedule: QuenchSchedule, N: int, orders=(1, 2, 3)) -> list[float]:
    psi = evolve_exact(schedule, N)
    n = kink_operator(N)
    return [expectation(psi, np.linalg.matrix_power(n, m)) for m in orders]


def exact_bond_correlators(schedule: QuenchSchedule, N: int, t_final=None) -> np.ndarray:
    psi = evolve_exact(schedule, N, t_final)
    return np.array([expectation(psi, embed(N, {i: X, i + 1: X})) for i in range(N - 1)])


def equal_up_to_phase(A: np.ndarray, B: np.ndarray) -> float:
    """Max entry deviation between A and B after removing a global phase."""
    k = np.unravel_index(np.argmax(np.abs(B)), B.shape)
    phase = A[k] / B[k]
    phase /= abs(phase)
    return float(np.abs(A - phase * B).max())

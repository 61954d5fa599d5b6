"""Dense state-vector backend with Pauli-trajectory noise and X-basis sampling.

Qubit 0 is the most significant bit of the basis index, so reshaping the
amplitudes to ``(2,) * N`` puts qubit q on axis q.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .batch import BitstringBatch
from .errors import DomainError, ResourceError
from .model import BondTerm
from .trotter import COUP, FIELD, H_LAYER, Circuit, GateOp

DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes
_SQRT_HALF = np.sqrt(0.5)

# Two-qubit Paulis indexed 0..15 as 4*a + b with a, b in (I, X, Y, Z).
PAULI_LABELS = "IXYZ"


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream; every sampler in the package goes through here."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def probabilities(self, basis: str = "Z") -> np.ndarray:
        if basis == "X":
            psi = self.copy()
            _hadamard_all(psi.amplitudes, self.n_qubits)
            amps = psi.amplitudes
        else:
            amps = self.amplitudes
        p = amps.real**2 + amps.imag**2
        return p / p.sum()


@dataclass
class NoiseModel:
    """Synthetic channels applied during :func:`run_noisy`.

    ``readout_flip`` is either one ``(p01, p10)`` pair for every qubit or an
    array of shape (N, 2); p01 is the chance of reading 1 after preparing 0.
    """

    two_qubit_depol: float = 0.0
    global_depol: float = 0.0
    readout_flip: object = (0.0, 0.0)
    weight_dependent: bool = field(default=False, repr=False)

    def __post_init__(self):
        for name in ("two_qubit_depol", "global_depol"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        ro = np.asarray(self.readout_flip, dtype=float)
        if np.any(ro < 0) or np.any(ro > 1):
            raise DomainError("readout flip probabilities must lie in [0, 1]")

    def readout_rates(self, N: int) -> np.ndarray:
        ro = np.asarray(self.readout_flip, dtype=float)
        return np.broadcast_to(ro, (N, 2)).copy()

    @property
    def is_noiseless(self) -> bool:
        return self.two_qubit_depol == 0 and self.global_depol == 0 and not np.any(np.asarray(self.readout_flip))

    def to_dict(self) -> dict:
        return {
            "two_qubit_depol": self.two_qubit_depol,
            "global_depol": self.global_depol,
            "readout_flip": np.asarray(self.readout_flip, dtype=float).tolist(),
        }


NOISELESS = NoiseModel()


def required_bytes(N: int) -> int:
    return 16 * (1 << N)


def prepare(N: int, init: str = "all_zero", memory_budget: int = DEFAULT_MEMORY_BUDGET) -> StateVector:
    if N < 1:
        raise DomainError("need at least one qubit")
    need = required_bytes(N)
    if need > memory_budget:
        raise ResourceError(f"{N} qubits need {need} bytes, budget is {memory_budget}", need)
    if init == "all_zero":
        amps = np.zeros(1 << N, dtype=np.complex128)
        amps[0] = 1.0
    elif init == "all_plus":
        amps = np.full(1 << N, 2.0 ** (-N / 2), dtype=np.complex128)
    else:
        raise DomainError(f"unknown initial state {init!r}")
    return StateVector(N, amps)


# --- kernels ------------------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _popcount_table(N: int) -> np.ndarray:
    idx = np.arange(1 << N, dtype=np.uint64)
    return np.bitwise_count(idx).astype(np.intp)


@functools.lru_cache(maxsize=8)
def kink_table(N: int) -> np.ndarray:
    """Kink count of every basis index (bit q of the string = bit N-1-q of the index)."""
    idx = np.arange(1 << N, dtype=np.uint64)
    walls = (idx ^ (idx >> np.uint64(1))) & np.uint64((1 << (N - 1)) - 1)
    return np.bitwise_count(walls).astype(np.intp)


def _view(amps: np.ndarray, N: int, q: int, width: int = 1) -> np.ndarray:
    return amps.reshape(1 << q, 1 << width, 1 << (N - q - width))


def _field(amps, N, q, angle):
    v = _view(amps, N, q)
    v[:, 0, :] *= np.exp(1j * angle)
    v[:, 1, :] *= np.exp(-1j * angle)


def _uniform_field(amps, N, angle):
    table = np.exp(1j * angle * (N - 2 * np.arange(N + 1)))
    _kernels.phase_by_table_inplace(amps, table, _popcount_table(N))


def _coupling(amps, N, q, angle):
    _kernels.coupling_inplace(amps, N, q, np.cos(angle), 1j * np.sin(angle))


def _hadamard_all(amps, N):
    for q in range(N):
        v = _view(amps, N, q)
        a = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        a -= v[:, 1, :]
        v[:, 1, :] = a
    amps *= 2.0 ** (-N / 2)


def _pauli(amps, N, kind, q):
    v = _view(amps, N, q)
    if kind == "Z":
        v[:, 1, :] *= -1
        return
    a = v[:, 0, :].copy()
    if kind == "X":
        v[:, 0, :] = v[:, 1, :]
        v[:, 1, :] = a
    else:  # Y = [[0, -i], [i, 0]]
        v[:, 0, :] = -1j * v[:, 1, :]
        v[:, 1, :] = 1j * a


def _apply_two_qubit_pauli(amps, N, q, index):
    a, b = divmod(index, 4)
    if a:
        _pauli(amps, N, PAULI_LABELS[a], q)
    if b:
        _pauli(amps, N, PAULI_LABELS[b], q + 1)


def apply(state: StateVector, op: GateOp) -> StateVector:
    """Apply one gate in place and return the state."""
    N = state.n_qubits
    for q in op.qubits:
        if not 0 <= q < N:
            raise DomainError(f"{op} targets a qubit outside 0..{N - 1}")
    amps = state.amplitudes
    if op.kind == FIELD:
        _field(amps, N, op.qubit, op.angle)
    elif op.kind == COUP:
        _coupling(amps, N, op.qubit, op.angle)
    elif op.kind == H_LAYER:
        _hadamard_all(amps, N)
    else:
        _pauli(amps, N, op.kind, op.qubit)
    return state


def evolve(state: StateVector, ops: Sequence[GateOp]) -> StateVector:
    """Apply a gate list, fusing runs of field rotations into one diagonal pass
    when they form a uniform layer."""
    N = state.n_qubits
    amps = state.amplitudes
    pending: list[GateOp] = []

    def flush():
        if not pending:
            return
        angles = np.zeros(N)
        hit = np.zeros(N, dtype=int)
        for g in pending:
            angles[g.qubit] += g.angle
            hit[g.qubit] += 1
        if np.all(hit > 0) and np.all(angles == angles[0]):
            _uniform_field(amps, N, angles[0])
        else:
            for q in np.flatnonzero(hit):
                _field(amps, N, q, angles[q])
        pending.clear()

    for op in ops:
        if op.kind == FIELD:
            if not 0 <= op.qubit < N:
                raise DomainError(f"{op} targets a qubit outside 0..{N - 1}")
            pending.append(op)
            continue
        flush()
        apply(state, op)
    flush()
    return state


def initial_state(N: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> StateVector:
    return prepare(N, "all_zero", memory_budget)


def final_state(circuit: Circuit, body_only: bool = True, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> StateVector:
    """Noiseless state after the circuit. With ``body_only`` the terminal
    measurement block is skipped, leaving the state whose X-basis statistics
    the circuit measures."""
    psi = initial_state(circuit.n_qubits, memory_budget)
    return evolve(psi, circuit.body if body_only else circuit.ops)


# --- observables ----------------------------------------------------------------


def _support_mask(term: BondTerm, N: int) -> list[int]:
    support = term.qubit_support
    if any(q >= N for q in support):
        raise DomainError(f"term {term.bonds} exceeds chain of {N} qubits")
    return sorted(support)


def expectation_x_string(state: StateVector, qubits: Iterable[int], tol: float = 1e-10) -> float:
    """<psi| prod_{q} X_q |psi> by direct amplitude contraction."""
    qubits = list(qubits)
    if not qubits:
        return 1.0
    t = state.tensor()
    flipped = np.flip(t, axis=tuple(qubits))
    val = np.vdot(t.ravel(), flipped.ravel())
    if abs(val.imag) > tol:
        raise ArithmeticError(f"imaginary residue {val.imag:.2e} for Hermitian observable")
    return float(val.real)


def expectation_bond_terms(state: StateVector, terms: Sequence[BondTerm]) -> list[float]:
    """Exact <term> for each bond product (coefficients not applied)."""
    N = state.n_qubits
    return [expectation_x_string(state, _support_mask(t, N)) for t in terms]


def bond_correlators(state: StateVector) -> np.ndarray:
    N = state.n_qubits
    return np.array([expectation_x_string(state, (i, i + 1)) for i in range(N - 1)])


def kink_moments(state: StateVector, orders=(1, 2, 3)) -> list[float]:
    """Exact raw moments of the kink density from X-basis probabilities."""
    N = state.n_qubits
    p = state.probabilities("X")
    n = kink_table(N) / N
    return [float(p @ n**m) for m in orders]


# --- sampling -----------------------------------------------------------------


def _index_to_bits(idx: np.ndarray, N: int) -> np.ndarray:
    shifts = np.arange(N - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None].astype(np.int64) >> shifts) & 1).astype(np.uint8)


def sample_indices(p: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(p)
    u = rng.random(shots) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)


def sample(state: StateVector, shots: int, basis: str = "X", seed=0) -> BitstringBatch:
    rng = make_rng(seed)
    idx = sample_indices(state.probabilities(basis), shots, rng)
    return BitstringBatch.from_bits(_index_to_bits(idx, state.n_qubits), basis=basis)


def _apply_readout(bits: np.ndarray, rates: np.ndarray, rng: np.random.Generator) -> None:
    if not np.any(rates):
        return
    u = rng.random(bits.shape)
    p_flip = np.where(bits == 0, rates[:, 0], rates[:, 1])
    bits ^= (u < p_flip).astype(np.uint8)


def run_noisy(
    circuit: Circuit,
    noise: NoiseModel = NOISELESS,
    shots: int = 2000,
    seed=0,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> BitstringBatch:
    """Monte Carlo sampling of ``circuit`` under ``noise``.

    Each shot draws its own local-depolarizing events (one of the 15
    non-identity two-qubit Paulis after a coupling gate with probability
    ``two_qubit_depol``). Shots without events share the noiseless output
    distribution; each noisy shot replays the circuit from its first event,
    branching off the noiseless prefix. Global depolarizing replaces a shot by a
    uniformly random string, and readout flips act on the raw bits before the
    twirl mask is undone.
    """
    if shots < 1:
        raise DomainError("shots must be >= 1")
    N = circuit.n_qubits
    rng = make_rng(seed)
    ops = circuit.ops
    coup_pos = np.array([i for i, op in enumerate(ops) if op.kind == COUP], dtype=np.intp)
    lam = noise.two_qubit_depol

    events = None
    if lam > 0 and len(coup_pos):
        hit = rng.random((shots, len(coup_pos))) < lam
        which = rng.integers(1, 16, size=hit.shape)
        events = (hit, which)

    idx = np.empty(shots, dtype=np.int64)
    if events is None:
        clean = np.arange(shots)
        noisy = np.array([], dtype=np.intp)
    else:
        has = events[0].any(axis=1)
        clean = np.flatnonzero(~has)
        noisy = np.flatnonzero(has)

    psi = prepare(N, "all_zero", memory_budget)
    done = 0
    if len(noisy):
        hit, which = events
        first = np.argmax(hit[noisy], axis=1)
        order = np.argsort(first, kind="stable")
        noisy, first = noisy[order], first[order]
        for s, f in zip(noisy, first):
            stop = coup_pos[f] + 1
            if stop > done:
                evolve(psi, ops[done:stop])
                done = stop
            branch = psi.copy()
            _replay(branch, ops, coup_pos, hit[s], which[s], f)
            idx[s] = sample_indices(branch.probabilities("Z"), 1, rng)[0]
    evolve(psi, ops[done:])
    if len(clean):
        idx[clean] = sample_indices(psi.probabilities("Z"), len(clean), rng)

    bits = _index_to_bits(idx, N)
    if noise.global_depol > 0:
        mixed = rng.random(shots) < noise.global_depol
        bits[mixed] = rng.integers(0, 2, size=(int(mixed.sum()), N), dtype=np.uint8)
    _apply_readout(bits, noise.readout_rates(N), rng)
    mask = np.array(circuit.readout_flips, dtype=np.uint8)
    bits ^= mask
    header = {
        "seed": seed if not isinstance(seed, np.random.Generator) else "generator",
        "noise": noise.to_dict(),
        "circuit": circuit.hash,
    }
    return BitstringBatch(bits, int(circuit.metadata.get("twirl_id", 0)), mask, circuit.measure_basis, None, header)


def _replay(state, ops, coup_pos, hit_row, which_row, first):
    """Continue a trajectory whose first Pauli event follows coupling gate ``first``."""
    N = state.n_qubits
    amps = state.amplitudes
    _apply_two_qubit_pauli(amps, N, ops[coup_pos[first]].qubit, int(which_row[first]))
    seg_start = coup_pos[first] + 1
    for k in np.flatnonzero(hit_row[first + 1:]) + first + 1:
        end = coup_pos[k] + 1
        evolve(state, ops[seg_start:end])
        _apply_two_qubit_pauli(amps, N, ops[coup_pos[k]].qubit, int(which_row[k]))
        seg_start = end
    evolve(state, ops[seg_start:])


def pauli_expectation_samples(batch: BitstringBatch, qubits: Sequence[int]) -> np.ndarray:
    """Per-shot +-1 parity of the bits on ``qubits``."""
    if not len(qubits):
        return np.ones(batch.n_rows)
    par = np.bitwise_xor.reduce(batch.bits[:, list(qubits)], axis=1)
    return 1.0 - 2.0 * par


def memory_report(N: int) -> dict:
    return {"n_qubits": N, "bytes": required_bytes(N)}


__all__ = [
    "StateVector", "NoiseModel", "prepare", "apply", "evolve", "final_state", "run_noisy",
    "sample", "expectation_bond_terms", "bond_correlators", "kink_moments", "make_rng",
]


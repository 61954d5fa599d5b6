"""Matrix-product-state execution of the same gate lists as the dense backend.

Site tensors have legs (left bond, physical, right bond). Two-site gates are
applied TEBD style: contract the pair, SVD, drop the tail of the spectrum
whose relative squared weight stays under ``trunc_tol``, renormalize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .batch import BitstringBatch
from .errors import DomainError, NormalizationError, ResourceError, TruncationOverflowError
from .model import BondTerm
from .statevector import make_rng
from .trotter import COUP, FIELD, H_LAYER, Circuit, GateOp

MEMORY_GUARD = 2 << 30  # bytes
CHECKPOINT_MAGIC = b"KSMPS v1\n"

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass
class MPSState:
    n_qubits: int
    site_tensors: list
    orthogonality_center: int = 0
    max_bond: Optional[int] = None
    trunc_tol: float = 1e-10
    discarded: list = field(default_factory=list)
    retained_norm2: float = 1.0
    debug: bool = False

    @classmethod
    def product_zero(cls, N: int, **kwargs) -> "MPSState":
        if N < 1:
            raise DomainError("need at least one site")
        tensors = []
        for _ in range(N):
            a = np.zeros((1, 2, 1), dtype=np.complex128)
            a[0, 0, 0] = 1.0
            tensors.append(a)
        return cls(N, tensors, 0, **kwargs)

    @classmethod
    def product_plus(cls, N: int, **kwargs) -> "MPSState":
        st = cls.product_zero(N, **kwargs)
        for j in range(N):
            st.site_tensors[j] = np.full((1, 2, 1), np.sqrt(0.5), dtype=np.complex128)
        return st

    def copy(self) -> "MPSState":
        return MPSState(
            self.n_qubits, [a.copy() for a in self.site_tensors], self.orthogonality_center,
            self.max_bond, self.trunc_tol, list(self.discarded), self.retained_norm2, self.debug,
        )

    @property
    def bond_dims(self) -> list[int]:
        return [a.shape[2] for a in self.site_tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max([1] + self.bond_dims)

    @property
    def cumulative_discarded(self) -> float:
        return float(sum(self.discarded))

    @property
    def nbytes(self) -> int:
        return sum(a.nbytes for a in self.site_tensors)

    def norm(self) -> float:
        a = self.site_tensors[self.orthogonality_center]
        return float(np.linalg.norm(a))

    # --- canonical form ---------------------------------------------------

    def _shift_right(self, j: int):
        a = self.site_tensors[j]
        l, d, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l * d, r))
        self.site_tensors[j] = q.reshape(l, d, q.shape[1])
        self.site_tensors[j + 1] = np.tensordot(rr, self.site_tensors[j + 1], axes=(1, 0))

    def _shift_left(self, j: int):
        a = self.site_tensors[j]
        l, d, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l, d * r).T)
        self.site_tensors[j] = q.T.reshape(q.shape[1], d, r)
        self.site_tensors[j - 1] = np.tensordot(self.site_tensors[j - 1], rr.T, axes=(2, 0))

    def move_center(self, target: int):
        if not 0 <= target < self.n_qubits:
            raise DomainError(f"site {target} outside chain")
        while self.orthogonality_center < target:
            self._shift_right(self.orthogonality_center)
            self.orthogonality_center += 1
        while self.orthogonality_center > target:
            self._shift_left(self.orthogonality_center)
            self.orthogonality_center -= 1

    def canonicalize(self, center: int = 0):
        """Full sweep so every tensor away from ``center`` is an isometry."""
        self.orthogonality_center = 0
        for j in range(self.n_qubits - 1):
            self._shift_right(j)
        self.orthogonality_center = self.n_qubits - 1
        self.move_center(center)

    def isometry_residual(self) -> float:
        worst = 0.0
        for j, a in enumerate(self.site_tensors):
            l, d, r = a.shape
            if j < self.orthogonality_center:
                m = a.reshape(l * d, r)
                worst = max(worst, np.abs(m.conj().T @ m - np.eye(r)).max())
            elif j > self.orthogonality_center:
                m = a.reshape(l, d * r)
                worst = max(worst, np.abs(m @ m.conj().T - np.eye(l)).max())
        return float(worst)

    # --- gates --------------------------------------------------------------

    def apply_single(self, j: int, u: np.ndarray):
        self.site_tensors[j] = np.einsum("ij,ajb->aib", u, self.site_tensors[j])

    def apply_field(self, j: int, angle: float):
        a = self.site_tensors[j]
        a[:, 0, :] *= np.exp(1j * angle)
        a[:, 1, :] *= np.exp(-1j * angle)

    def apply_coupling(self, i: int, angle: float, leave_center_right: bool = True):
        """exp(+i angle X_i X_{i+1}) followed by SVD truncation."""
        if not 0 <= i < self.n_qubits - 1:
            raise DomainError(f"bond {i} outside chain")
        if self.orthogonality_center < i:
            self.move_center(i)
        elif self.orthogonality_center > i + 1:
            self.move_center(i + 1)
        a, b = self.site_tensors[i], self.site_tensors[i + 1]
        theta = np.tensordot(a, b, axes=(2, 0))  # l, p, q, r
        theta = np.cos(angle) * theta + 1j * np.sin(angle) * theta[:, ::-1, ::-1, :]
        l, _, _, r = theta.shape
        u, s, vh = _svd(theta.reshape(2 * l, 2 * r))
        s, keep = self._truncate(s)
        u, vh = u[:, :keep], vh[:keep]
        if leave_center_right:
            self.site_tensors[i] = u.reshape(l, 2, keep)
            self.site_tensors[i + 1] = (s[:, None] * vh).reshape(keep, 2, r)
            self.orthogonality_center = i + 1
        else:
            self.site_tensors[i] = (u * s[None, :]).reshape(l, 2, keep)
            self.site_tensors[i + 1] = vh.reshape(keep, 2, r)
            self.orthogonality_center = i
        if self.nbytes > MEMORY_GUARD:
            raise ResourceError(f"MPS exceeds memory guard ({self.nbytes} bytes)", self.nbytes)

    def _truncate(self, s: np.ndarray) -> tuple[np.ndarray, int]:
        w = s**2
        total = w.sum()
        # tail[k] = relative weight of s[k:]
        tail = np.cumsum(w[::-1])[::-1] / total
        keep = int(np.count_nonzero(tail > self.trunc_tol))
        keep = max(keep, 1)
        if self.max_bond is not None and keep > self.max_bond:
            dropped = float(tail[self.max_bond])
            if dropped > self.trunc_tol:
                raise TruncationOverflowError(
                    f"bond cap {self.max_bond} would discard weight {dropped:.3e} > {self.trunc_tol:.1e}",
                    max(dropped, max(self.discarded, default=0.0)),
                )
            keep = self.max_bond
        dropped = float(tail[keep]) if keep < len(s) else 0.0
        if keep < len(s):
            self.discarded.append(dropped)
            self.retained_norm2 *= 1.0 - dropped
        kept = s[:keep]
        return kept / np.sqrt((kept**2).sum()), keep


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def _schedule(ops: Sequence[GateOp]):
    """Group ops into single-site gates and runs of disjoint coupling gates."""
    i = 0
    while i < len(ops):
        op = ops[i]
        if op.kind != COUP:
            yield op
            i += 1
            continue
        run = [op]
        used = {op.qubit, op.qubit + 1}
        i += 1
        while i < len(ops) and ops[i].kind == COUP and not ({ops[i].qubit, ops[i].qubit + 1} & used):
            used |= {ops[i].qubit, ops[i].qubit + 1}
            run.append(ops[i])
            i += 1
        yield run


def evolve_circuit(state: MPSState, circuit, body_only: bool = True) -> MPSState:
    """Run a circuit (or a plain gate list) on ``state`` in place.

    Mutually commuting coupling gates inside one layer are swept in whichever
    direction is closer to the current orthogonality center.
    """
    if isinstance(circuit, Circuit):
        if circuit.n_qubits != state.n_qubits:
            raise DomainError("circuit and state sizes differ")
        ops = circuit.body if body_only else circuit.ops
    else:
        ops = list(circuit)
    N = state.n_qubits
    for item in _schedule(ops):
        if isinstance(item, list):
            bonds = sorted(g.qubit for g in item)
            by_bond = {g.qubit: g for g in item}
            c = state.orthogonality_center
            if abs(c - bonds[0]) <= abs(c - bonds[-1]):
                for b in bonds:
                    state.apply_coupling(b, by_bond[b].angle, leave_center_right=True)
            else:
                for b in reversed(bonds):
                    state.apply_coupling(b, by_bond[b].angle, leave_center_right=False)
            if state.debug:
                res = state.isometry_residual()
                if res > 1e-10:
                    raise NormalizationError(f"isometry residual {res:.2e} after sweep")
            continue
        op = item
        if op.kind == FIELD:
            state.apply_field(op.qubit, op.angle)
        elif op.kind == H_LAYER:
            for j in range(N):
                state.apply_single(j, _H)
        elif op.kind in _PAULI:
            state.apply_single(op.qubit, _PAULI[op.kind])
        else:
            raise DomainError(f"unsupported gate {op}")
    return state


def run_circuit(circuit: Circuit, trunc_tol: float = 1e-10, max_bond: Optional[int] = None, debug=False) -> MPSState:
    st = MPSState.product_zero(circuit.n_qubits, trunc_tol=trunc_tol, max_bond=max_bond, debug=debug)
    return evolve_circuit(st, circuit)


# --- observables ----------------------------------------------------------------


def expectation_x_string(state: MPSState, qubits: Sequence[int]) -> float:
    qubits = sorted(qubits)
    if not qubits:
        return 1.0
    lo, hi = qubits[0], qubits[-1]
    if state.orthogonality_center < lo or state.orthogonality_center > hi:
        state.move_center(min(max(state.orthogonality_center, lo), hi))
    X = _PAULI["X"]
    env = None
    support = set(qubits)
    for j in range(lo, hi + 1):
        a = state.site_tensors[j]
        b = np.einsum("ij,ajb->aib", X, a) if j in support else a
        if env is None:
            env = np.einsum("apb,apc->bc", a.conj(), b)
        else:
            env = np.einsum("ab,apc,bpd->cd", env, a.conj(), b)
    val = np.trace(env)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"imaginary residue {val.imag:.2e}")
    return float(val.real)


def expectation_bond_terms(state: MPSState, terms: Sequence[BondTerm]) -> list[float]:
    N = state.n_qubits
    out = []
    for t in terms:
        sup = t.qubit_support
        if any(q >= N for q in sup):
            raise DomainError(f"term {t.bonds} exceeds chain of {N} sites")
        out.append(expectation_x_string(state, sup))
    return out


def bond_correlators(state: MPSState) -> np.ndarray:
    N = state.n_qubits
    state.move_center(0)
    return np.array([expectation_x_string(state, (i, i + 1)) for i in range(N - 1)])


# --- sampling -----------------------------------------------------------------


def sample(state: MPSState, shots: int, basis: str = "X", seed=0) -> BitstringBatch:
    """Exact sequential sampling, site by site from the left.

    With the orthogonality center on site 0 the right environment of every
    site is the identity, so conditional probabilities only need the left
    partial contraction carried per shot.
    """
    if basis not in ("X", "Z"):
        raise DomainError(f"unknown basis {basis!r}")
    rng = make_rng(seed)
    state.move_center(0)
    nrm = state.norm()
    if abs(nrm - 1.0) > 1e-6:
        raise NormalizationError(f"state norm {nrm:.8f} deviates from 1")
    N = state.n_qubits
    bits = np.empty((shots, N), dtype=np.uint8)
    env = np.full((shots, 1), 1.0 / nrm, dtype=np.complex128)
    rows = np.arange(shots)
    for j, a in enumerate(state.site_tensors):
        if basis == "X":
            a = np.einsum("ij,ajb->aib", _H, a)
        v = np.einsum("sa,apb->spb", env, a)
        w = (v.real**2 + v.imag**2).sum(axis=2)
        tot = w.sum(axis=1)
        p0 = w[:, 0] / tot
        b = (rng.random(shots) >= p0).astype(np.uint8)
        bits[:, j] = b
        env = v[rows, b, :] / np.sqrt(w[rows, b])[:, None]
    return BitstringBatch.from_bits(bits, basis=basis, backend="mps")


def marginals(state: MPSState, sites: Sequence[int], basis: str = "X") -> np.ndarray:
    """Exact joint distribution of the bits on ``sites`` (small sets only)."""
    sites = sorted(sites)
    lo, hi = sites[0], sites[-1]
    state.move_center(lo)
    open_sites = set(sites)
    rho = np.eye(state.site_tensors[lo].shape[0], dtype=np.complex128)
    for j in range(lo, hi + 1):
        a = state.site_tensors[j]
        if basis == "X":
            a = np.einsum("ij,ajb->aib", _H, a)
        rho = _marg_step(rho, a, j in open_sites)
    p = np.trace(rho, axis1=-2, axis2=-1).real
    return p.reshape((2,) * len(sites))


def _marg_step(rho, a, open_leg):
    # rho has shape (..., chi, chi) on bra/ket bonds
    if open_leg:
        return np.einsum("...ab,apc,bpd->...pcd", rho, a.conj(), a)
    return np.einsum("...ab,apc,bpd->...cd", rho, a.conj(), a)


# --- checkpoint ---------------------------------------------------------------


def save_checkpoint(state: MPSState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(f"n_qubits {state.n_qubits} center {state.orthogonality_center}\n".encode())
        for j, a in enumerate(state.site_tensors):
            l, d, r = a.shape
            fh.write(f"site {j} {l} {d} {r}\n".encode())
            fh.write(np.ascontiguousarray(a, dtype="<c16").tobytes())


def load_checkpoint(path, **kwargs) -> MPSState:
    with open(path, "rb") as fh:
        if fh.readline() != CHECKPOINT_MAGIC:
            raise ValueError("not an MPS checkpoint (bad magic/version)")
        head = fh.readline().decode().split()
        N, center = int(head[1]), int(head[3])
        tensors = []
        for _ in range(N):
            _, _, l, d, r = fh.readline().decode().split()
            l, d, r = int(l), int(d), int(r)
            raw = fh.read(16 * l * d * r)
            tensors.append(np.frombuffer(raw, dtype="<c16").reshape(l, d, r).astype(np.complex128))
    return MPSState(N, tensors, center, **kwargs)


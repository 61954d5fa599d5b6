"""Second-order product-formula circuits for the quench and its reference runs.

Every rotation stores the full exponent: ``FIELD q a`` is exp(+i a Z_q) and
``COUP q a`` is exp(+i a X_q X_{q+1}). With H = -J sum XX - h sum Z a step of
length dt is exp(+i h dt/2 Z) exp(+i J dt XX) exp(+i h dt/2 Z) per site/bond.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import ConstructionError, DomainError
from .model import QuenchSchedule, couplings_at

H_LAYER = "H_LAYER"
FIELD = "FIELD"
COUP = "COUP"
PAULIS = ("X", "Y", "Z")
KINDS = (H_LAYER, FIELD, COUP) + PAULIS


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubit: int = -1
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstructionError(f"unknown gate kind {self.kind!r}")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind == COUP

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.kind == H_LAYER:
            return ()
        if self.kind == COUP:
            return (self.qubit, self.qubit + 1)
        return (self.qubit,)

    def inverse(self) -> "GateOp":
        if self.kind in (FIELD, COUP):
            return GateOp(self.kind, self.qubit, -self.angle)
        return self


def field_rotation(q: int, angle: float) -> GateOp:
    return GateOp(FIELD, q, float(angle))


def coupling_rotation(q: int, angle: float) -> GateOp:
    return GateOp(COUP, q, float(angle))


def hadamard_layer() -> GateOp:
    return GateOp(H_LAYER)


def pauli(kind: str, q: int) -> GateOp:
    return GateOp(kind, q)


@dataclass(frozen=True)
class TrotterPlan:
    r: int
    t: float

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ConstructionError(f"number of Trotter steps must be a positive integer, got {self.r}")

    @property
    def dt(self) -> float:
        return self.t / self.r


def midpoint_times(plan: TrotterPlan) -> list[float]:
    dt = plan.dt
    return [(k + 0.5) * dt for k in range(plan.r)]


@dataclass(frozen=True)
class Circuit:
    """Gate list over ``n_qubits`` with the measurement layer included.

    For X-basis circuits the ops end with a Hadamard layer, optionally followed
    by single-qubit X flips used for readout twirling. ``body`` strips that
    terminal block so backends can evaluate X-basis correlators directly.
    """

    n_qubits: int
    ops: tuple[GateOp, ...]
    measure_basis: str = "X"
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        N = self.n_qubits
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < N:
                    raise ConstructionError(f"{op} targets qubit outside 0..{N - 1}")
        if self.measure_basis not in ("X", "Z"):
            raise ConstructionError(f"unknown measure basis {self.measure_basis!r}")

    def _measurement_start(self) -> int:
        if self.measure_basis == "Z":
            return len(self.ops)
        i = len(self.ops)
        while i > 0 and self.ops[i - 1].kind == "X":
            i -= 1
        if i == 0 or self.ops[i - 1].kind != H_LAYER:
            raise ConstructionError("X-basis circuit must end with a Hadamard layer")
        return i - 1

    @property
    def body(self) -> tuple[GateOp, ...]:
        return self.ops[: self._measurement_start()]

    @property
    def readout_flips(self) -> tuple[int, ...]:
        """Per-qubit 0/1 mask of X flips applied just before measurement."""
        mask = [0] * self.n_qubits
        start = self._measurement_start()
        for op in self.ops[start:]:
            if op.kind == "X":
                mask[op.qubit] ^= 1
        return tuple(mask)

    @property
    def n_coupling_gates(self) -> int:
        return sum(op.kind == COUP for op in self.ops)

    def with_ops(self, ops: Iterable[GateOp], **metadata) -> "Circuit":
        return replace(self, ops=tuple(ops), metadata={**self.metadata, **metadata})

    def to_text(self) -> str:
        return dumps(self)

    @property
    def hash(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


def _coupling_layer(N: int, angle: float) -> list[GateOp]:
    bonds = list(range(0, N - 1, 2)) + list(range(1, N - 1, 2))
    return [coupling_rotation(i, angle) for i in bonds]


def _field_layer(N: int, angle: float) -> list[GateOp]:
    return [field_rotation(q, angle) for q in range(N)]


def build_quench_circuit(
    schedule: QuenchSchedule,
    plan: TrotterPlan,
    N: int,
    merge_fields: bool = False,
    split: str = "field_outer",
) -> Circuit:
    """Trotterized quench from |0...0> measured in the X basis.

    ``split="field_outer"`` puts the field half-steps on the outside of each
    step; ``"coupling_outer"`` swaps the roles. ``merge_fields`` fuses the
    adjacent field half-layers of consecutive steps (same unitary, fewer gates);
    it only applies to the field-outer split.
    """
    if N < 2:
        raise ConstructionError("need at least two spins")
    if not math.isclose(plan.t, schedule.tau_Q, rel_tol=1e-12, abs_tol=0.0):
        raise ConstructionError("plan must cover the full quench (t == tau_Q)")
    if split not in ("field_outer", "coupling_outer"):
        raise ConstructionError(f"unknown split {split!r}")
    dt = plan.dt
    ops: list[GateOp] = []
    pending = 0.0
    for tk in midpoint_times(plan):
        J, h = couplings_at(schedule, tk)
        if split == "field_outer":
            if merge_fields:
                ops += _field_layer(N, pending + h * dt / 2)
            else:
                ops += _field_layer(N, h * dt / 2)
            ops += _coupling_layer(N, J * dt)
            if merge_fields:
                pending = h * dt / 2
            else:
                ops += _field_layer(N, h * dt / 2)
        else:
            ops += _coupling_layer(N, J * dt / 2)
            ops += _field_layer(N, h * dt)
            ops += _coupling_layer(N, J * dt / 2)
    if merge_fields and split == "field_outer":
        ops += _field_layer(N, pending)
    ops.append(hadamard_layer())
    meta = {"tau_Q": schedule.tau_Q, "r": plan.r, "variant": "quench", "J0": schedule.J0, "h0": schedule.h0}
    return Circuit(N, tuple(ops), "X", meta)


def build_reference_circuit(base: Circuit, variant: str = "zero_field") -> Circuit:
    """Noise-calibration twin of ``base``: starts from |+...+>, same two-qubit
    gates, field angles set to zero (``zero_field``) or rescaled so that the
    accumulated field angle on each qubit is pi (``pi_field``)."""
    if variant not in ("zero_field", "pi_field"):
        raise DomainError(f"unsupported reference variant {variant!r}")
    body = base.body
    tail = base.ops[len(body):]
    N = base.n_qubits
    scale = [0.0] * N
    if variant == "pi_field":
        totals = [0.0] * N
        for op in body:
            if op.kind == FIELD:
                totals[op.qubit] += op.angle
        for q in range(N):
            if totals[q] == 0.0:
                raise ConstructionError(f"qubit {q} has no field rotation to rescale")
            scale[q] = math.pi / totals[q]
    ops = [hadamard_layer()]
    for op in body:
        if op.kind == FIELD:
            ops.append(field_rotation(op.qubit, op.angle * scale[op.qubit]))
        else:
            ops.append(op)
    ops += tail
    return Circuit(N, tuple(ops), base.measure_basis, {**base.metadata, "variant": variant})


def inverse_ops(ops: Iterable[GateOp]) -> list[GateOp]:
    return [op.inverse() for op in reversed(list(ops))]


# --- text serialization -----------------------------------------------------


def dumps(circuit: Circuit) -> str:
    md = circuit.metadata
    header = f"{circuit.n_qubits} {md.get('r', 0)} {format(float(md.get('tau_Q', 0.0)), '.17g')} {md.get('variant', 'custom')}"
    lines = [header]
    for op in circuit.ops:
        if op.kind == H_LAYER:
            lines.append(H_LAYER)
        elif op.kind in (FIELD, COUP):
            lines.append(f"{op.kind} {op.qubit} {format(op.angle, '.17g')}")
        else:
            lines.append(f"{op.kind} {op.qubit}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ConstructionError("empty circuit text")
    head = lines[0].split()
    if len(head) != 4:
        raise ConstructionError(f"bad circuit header {lines[0]!r}")
    N, r, tau, variant = int(head[0]), int(head[1]), float(head[2]), head[3]
    ops = []
    for ln in lines[1:]:
        parts = ln.split()
        kind = parts[0]
        if kind == H_LAYER:
            ops.append(hadamard_layer())
        elif kind in (FIELD, COUP):
            ops.append(GateOp(kind, int(parts[1]), float(parts[2])))
        elif kind in PAULIS:
            ops.append(pauli(kind, int(parts[1])))
        else:
            raise ConstructionError(f"unknown gate line {ln!r}")
    basis = "Z"
    i = len(ops)
    while i > 0 and ops[i - 1].kind == "X":
        i -= 1
    if i > 0 and ops[i - 1].kind == H_LAYER:
        basis = "X"
    return Circuit(N, tuple(ops), basis, {"r": r, "tau_Q": tau, "variant": variant})


def quench_circuit(N: int, tau_Q: float, r: int, **kwargs) -> Circuit:
    """Shorthand for the default quench with J0 = h0 = 1."""
    return build_quench_circuit(QuenchSchedule(tau_Q), TrotterPlan(r, tau_Q), N, **kwargs)


def reference_for(N: int, tau_Q: float, r: int, variant: str = "zero_field", **kwargs) -> Circuit:
    return build_reference_circuit(quench_circuit(N, tau_Q, r, **kwargs), variant)


__all__ = [
    "GateOp", "Circuit", "TrotterPlan", "midpoint_times", "build_quench_circuit",
    "build_reference_circuit", "dumps", "loads", "quench_circuit", "reference_for",
    "field_rotation", "coupling_rotation", "hadamard_layer", "pauli", "inverse_ops",
]

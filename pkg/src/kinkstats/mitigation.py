"""Error mitigation: Pauli and readout twirling, sparse readout calibration,
and depolarizing-noise renormalization from reference circuits.

Mitigated quantities are handled at the level of bond-product correlators:
the moments of the kink density are expanded into identity plus traceless
Pauli-X strings, each traceless string is corrected for readout on its own
qubit support and divided by the renormalization factor, and the moments are
reassembled afterwards.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .batch import BitstringBatch
from .errors import DomainError, IllConditionedCorrectionError, UnusableRenormError
from .model import BondTerm, CumulantSet, cumulants_from_moments, moment_expansion
from .statevector import NOISELESS, NoiseModel, make_rng, run_noisy
from .trotter import COUP, H_LAYER, Circuit, GateOp, pauli

RENORM_FLOOR = 0.05
ILL_CONDITIONED = 0.1

# (a, b) labels of the 16 two-qubit Paulis, index 4*a + b, a/b in I, X, Y, Z
_LABELS = "IXYZ"


def anticommutes_with_xx(index: int) -> bool:
    """Y and Z anticommute with X; the pair anticommutes with X(x)X when an
    odd number of its factors do."""
    a, b = divmod(index, 4)
    return ((a in (2, 3)) + (b in (2, 3))) % 2 == 1


# --- twirling -----------------------------------------------------------------


@dataclass
class TwirlPlan:
    n_twirls: int
    seed: object
    paulis: list = field(default_factory=list)  # per twirl: array of Pauli indices, one per coupling gate
    sign_flips: list = field(default_factory=list)
    flip_masks: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"n_twirls": self.n_twirls, "seed": self.seed}


def _fuse_paulis(ops: Sequence[GateOp]) -> list[GateOp]:
    """Merge consecutive single-qubit Paulis on the same qubit (global phase dropped).

    A Pauli on qubit q is held back until a non-Pauli gate touches q; Paulis
    on other qubits commute with it, so the hold is exact up to phase.
    """
    out: list[GateOp] = []
    held: dict[int, int] = {}  # qubit -> pauli as bits (x, z)
    codes = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
    names = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}

    def release(qubits):
        for q in sorted(qubits):
            code = held.pop(q, (0, 0))
            if code != (0, 0):
                out.append(pauli(names[code], q))

    for op in ops:
        if op.kind in codes:
            x, z = held.get(op.qubit, (0, 0))
            dx, dz = codes[op.kind]
            held[op.qubit] = (x ^ dx, z ^ dz)
            continue
        if op.kind == H_LAYER:
            release(list(held))
        else:
            release([q for q in op.qubits if q in held])
        out.append(op)
    release(list(held))
    return out


def twirl_circuit(circuit: Circuit, paulis: np.ndarray, flip_mask=None, fuse: bool = True) -> Circuit:
    """Sandwich every coupling gate between a sampled two-qubit Pauli.

    P exp(i t XX) P = exp(-i t XX) when P anticommutes with XX, so the angle is
    negated in that case and the composed gate is unchanged.
    """
    body = circuit.body
    tail = list(circuit.ops[len(body):])
    ops: list[GateOp] = []
    k = 0
    for op in body:
        if op.kind != COUP:
            ops.append(op)
            continue
        if op.kind == COUP and (op.qubit < 0 or op.qubit + 1 >= circuit.n_qubits):
            raise DomainError(f"coupling gate {op} is not nearest-neighbour")
        idx = int(paulis[k])
        k += 1
        a, b = divmod(idx, 4)
        pre = []
        if a:
            pre.append(pauli(_LABELS[a], op.qubit))
        if b:
            pre.append(pauli(_LABELS[b], op.qubit + 1))
        angle = -op.angle if anticommutes_with_xx(idx) else op.angle
        ops += pre
        ops.append(GateOp(COUP, op.qubit, angle))
        ops += pre
    if fuse:
        ops = _fuse_paulis(ops)
    if flip_mask is not None:
        tail = [t for t in tail if t.kind != "X"]
        tail += [pauli("X", q) for q in np.flatnonzero(flip_mask)]
    return circuit.with_ops(ops + tail)


def balanced_masks(n: int, N: int, rng) -> np.ndarray:
    """Random readout flip masks drawn in complementary pairs, so that with an
    even count every qubit is flipped in exactly half of the twirls and the
    asymmetric part of the readout error cancels rather than averaging out."""
    masks = rng.integers(0, 2, size=(n, N))
    masks[1::2] = 1 - masks[0:n - n % 2:2]
    return masks


def twirl(circuit: Circuit, n_twirls: int = 50, seed=0, readout: bool = True, fuse: bool = True):
    """Return ``n_twirls`` randomly compiled copies of ``circuit`` and the plan.

    Each copy also carries a random pre-measurement X mask (readout twirling)
    unless ``readout`` is False.
    """
    for op in circuit.body:
        if op.is_two_qubit and op.kind != COUP:
            raise DomainError(f"cannot twirl gate {op}")
    rng = make_rng(seed)
    n_gates = circuit.n_coupling_gates
    plan = TwirlPlan(n_twirls, seed)
    circuits = []
    masks = balanced_masks(n_twirls, circuit.n_qubits, rng)
    for t in range(n_twirls):
        paulis = rng.integers(0, 16, size=n_gates)
        mask = masks[t] if readout else np.zeros(circuit.n_qubits, dtype=int)
        plan.paulis.append(paulis)
        plan.sign_flips.append(np.array([anticommutes_with_xx(int(p)) for p in paulis], dtype=bool))
        plan.flip_masks.append(mask)
        c = twirl_circuit(circuit, paulis, mask if readout else None, fuse=fuse)
        circuits.append(c.with_ops(c.ops, twirl_id=t))
    return circuits, plan


def split_shots(shots: int, n: int) -> list[int]:
    base, extra = divmod(shots, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def run_twirled(circuit: Circuit, noise: NoiseModel, shots: int, n_twirls: int, seed=0, readout: bool = True,
                runner: Optional[Callable] = None) -> BitstringBatch:
    """Spread ``shots`` over ``n_twirls`` compiled copies and pool the records."""
    runner = runner or run_noisy
    if n_twirls <= 0:
        return runner(circuit, noise, shots, seed)
    seq = np.random.SeedSequence(_seed_int(seed))
    twirl_seed, *shot_seeds = seq.spawn(n_twirls + 1)
    circuits, _ = twirl(circuit, n_twirls, int(twirl_seed.generate_state(1)[0]), readout=readout)
    batches = []
    for c, s, ss in zip(circuits, split_shots(shots, n_twirls), shot_seeds):
        if s == 0:
            continue
        batches.append(runner(c, noise, s, int(ss.generate_state(1)[0])))
    return BitstringBatch.concat(batches)


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(make_rng(seed).integers(0, 2**63))


# --- readout calibration and correction -----------------------------------------


@dataclass
class ConfusionMatrix:
    """Per-qubit 2x2 row-stochastic matrices, P[k][i, j] = Pr(read j | prepared i)."""

    matrices: np.ndarray  # shape (N, 2, 2)
    shots_per_state: int = 0

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        rows = self.matrices.sum(axis=2)
        if not np.allclose(rows, 1.0, atol=1e-12):
            raise DomainError("confusion matrix rows must sum to 1")
        if np.any(self.matrices[:, [0, 1], [0, 1]] < 0.5):
            warnings.warn("confusion matrix diagonal below 0.5; inversion is unreliable", stacklevel=2)

    @classmethod
    def identity(cls, N: int) -> "ConfusionMatrix":
        return cls(np.tile(np.eye(2), (N, 1, 1)))

    @classmethod
    def from_rates(cls, rates) -> "ConfusionMatrix":
        rates = np.asarray(rates, dtype=float)
        p01, p10 = rates[:, 0], rates[:, 1]
        m = np.stack([np.stack([1 - p01, p01], -1), np.stack([p10, 1 - p10], -1)], 1)
        return cls(m)

    @property
    def n_qubits(self) -> int:
        return self.matrices.shape[0]

    @property
    def p01(self) -> np.ndarray:
        return self.matrices[:, 0, 1]

    @property
    def p10(self) -> np.ndarray:
        return self.matrices[:, 1, 0]

    @property
    def symmetric_flip(self) -> np.ndarray:
        return (self.p01 + self.p10) / 2

    def parity_weights(self, twirled: bool) -> np.ndarray:
        """Per-qubit corrected +-1 observable, shape (N, 2): entry [k, b] replaces
        (-1)^b so that averaging the product over shots yields P_k^{-1}-corrected
        parities. The twirled path uses the symmetrized flip rate."""
        N = self.n_qubits
        if twirled:
            q = self.symmetric_flip
            scale = 1 - 2 * q
            if np.any(np.abs(scale) < ILL_CONDITIONED):
                raise IllConditionedCorrectionError(f"|1 - 2q| below {ILL_CONDITIONED} on some qubit")
            return np.stack([1 / scale, -1 / scale], axis=1)
        z = np.array([1.0, -1.0])
        det = np.linalg.det(self.matrices)
        if np.any(np.abs(det) < ILL_CONDITIONED):
            raise IllConditionedCorrectionError("confusion matrix nearly singular")
        return np.array([np.linalg.solve(self.matrices[k], z) for k in range(N)])

    def summary(self) -> dict:
        return {"p01_mean": float(self.p01.mean()), "p10_mean": float(self.p10.mean()),
                "p01": self.p01.tolist(), "p10": self.p10.tolist()}


def calibration_circuits(N: int) -> tuple[Circuit, Circuit]:
    zero = Circuit(N, (), "Z", {"variant": "cal0"})
    one = Circuit(N, tuple(pauli("X", q) for q in range(N)), "Z", {"variant": "cal1"})
    return zero, one


def calibrate_readout(N: int, shots_per_state: int = 2000, noise: NoiseModel = NOISELESS, seed=0,
                      n_twirls: int = 0, runner: Optional[Callable] = None) -> ConfusionMatrix:
    """Prepare |0...0> and |1...1>, tally per-qubit flips.

    With ``n_twirls`` > 0 each preparation is measured under random X masks,
    so the recovered matrices are the symmetrized (twirled) readout channel.
    """
    if shots_per_state < 1:
        raise DomainError("calibration needs at least one shot per state")
    runner = runner or run_noisy
    rng = make_rng(seed)
    counts = np.zeros((N, 2, 2))
    for prep, circ in enumerate(calibration_circuits(N)):
        if n_twirls > 0:
            batches = []
            masks = balanced_masks(n_twirls, N, rng)
            for s, mask in zip(split_shots(shots_per_state, n_twirls), masks):
                if s == 0:
                    continue
                c = circ.with_ops(circ.ops + tuple(pauli("X", q) for q in np.flatnonzero(mask)))
                b = runner(c, noise, s, int(rng.integers(0, 2**63)))
                # the simulator undoes masks only for X-basis tails; here undo explicitly
                b.bits ^= mask.astype(np.uint8)
                batches.append(b)
            batch = BitstringBatch.concat(batches)
        else:
            batch = runner(circ, noise, shots_per_state, int(rng.integers(0, 2**63)))
        ones = batch.bits.sum(axis=0)
        counts[:, prep, 1] += ones
        counts[:, prep, 0] += batch.n_rows - ones
    mats = counts / counts.sum(axis=2, keepdims=True)
    return ConfusionMatrix(mats, shots_per_state)


# --- correlator sets --------------------------------------------------------------


@dataclass
class CorrelatorSet:
    """Estimated <prod X> over qubit supports, with per-shot samples for error bars."""

    supports: list
    values: np.ndarray
    stderr: np.ndarray
    samples: Optional[np.ndarray] = None  # (shots, terms)
    weights: Optional[np.ndarray] = None

    def __getitem__(self, support):
        return self.values[self.supports.index(frozenset(support))]


def _parity_samples(batch: BitstringBatch, support, weights: np.ndarray) -> np.ndarray:
    sup = sorted(support)
    if not sup:
        return np.ones(batch.n_rows)
    vals = weights[sup, :][np.arange(len(sup))[:, None], batch.bits[:, sup].T]
    return np.prod(vals, axis=0)


def estimate_correlators(batch: BitstringBatch, supports: Sequence, confusion: Optional[ConfusionMatrix] = None,
                         twirled: bool = True) -> CorrelatorSet:
    """Shot averages of X-string parities, readout-corrected when a confusion
    matrix is supplied."""
    N = batch.n_qubits
    if confusion is None:
        pw = np.tile(np.array([1.0, -1.0]), (N, 1))
    else:
        pw = confusion.parity_weights(twirled)
    w = batch.weights
    S = w.sum()
    supports = [frozenset(s) for s in supports]
    samples = np.column_stack([_parity_samples(batch, s, pw) for s in supports]) if supports else np.zeros((batch.n_rows, 0))
    vals = (w @ samples) / S
    var = (w @ (samples - vals) ** 2) / max(S - 1, 1)
    return CorrelatorSet(supports, vals, np.sqrt(var / S), samples, w)


def correct_readout(estimates: CorrelatorSet, confusion: ConfusionMatrix, twirled: bool = True) -> CorrelatorSet:
    """Correct already-estimated parities.

    On the twirled path every parity over support S is divided by
    prod_{k in S} (1 - 2 q_k). The untwirled path needs per-shot data since
    the tensor-product inverse mixes in lower-weight marginals; it is
    available through :func:`estimate_correlators`.
    """
    if not twirled:
        raise DomainError("untwirled correction needs raw shots; use estimate_correlators(batch, ..., confusion)")
    q = confusion.symmetric_flip
    scale = 1 - 2 * q
    if np.any(np.abs(scale) < ILL_CONDITIONED):
        raise IllConditionedCorrectionError(f"|1 - 2q| below {ILL_CONDITIONED} on some qubit")
    factors = np.array([np.prod(scale[sorted(s)]) if s else 1.0 for s in estimates.supports])
    samples = None if estimates.samples is None else estimates.samples / factors
    return CorrelatorSet(list(estimates.supports), estimates.values / factors, estimates.stderr / np.abs(factors),
                         samples, estimates.weights)


# --- renormalization ----------------------------------------------------------------


@dataclass
class RenormFactor:
    value: float
    stderr: float
    variant: str = "mean_kink"
    circuit_hash: str = ""
    floor: float = RENORM_FLOOR
    bond_values: Optional[np.ndarray] = None

    @property
    def usable(self) -> bool:
        return self.value > self.floor

    def check(self):
        if not self.usable:
            raise UnusableRenormError(
                f"renormalization factor {self.value:.4f} at or below floor {self.floor}; circuit too deep"
            )
        return self

    def to_dict(self) -> dict:
        return {"renorm_value": self.value, "renorm_stderr": self.stderr, "variant": self.variant,
                "circuit": self.circuit_hash, "usable": self.usable}


UNIT_RENORM = RenormFactor(1.0, 0.0, "none")


def renorm_from_batch(batch: BitstringBatch, confusion: Optional[ConfusionMatrix] = None, variant: str = "mean_kink",
                      twirled: bool = True, circuit_hash: str = "", floor: float = RENORM_FLOOR,
                      strict: bool = True) -> RenormFactor:
    N = batch.n_qubits
    corr = estimate_correlators(batch, [(i, i + 1) for i in range(N - 1)], confusion, twirled)
    if variant == "mean_kink":
        per_shot = corr.samples.mean(axis=1)
        w = corr.weights
        S = w.sum()
        value = float(w @ per_shot / S)
        stderr = float(np.sqrt((w @ (per_shot - value) ** 2) / max(S - 1, 1) / S))
    elif variant == "max_bond":
        k = int(np.argmax(corr.values))
        value, stderr = float(corr.values[k]), float(corr.stderr[k])
    else:
        raise DomainError(f"unknown renormalization variant {variant!r}")
    rf = RenormFactor(value, stderr, variant, circuit_hash, floor, corr.values)
    if strict:
        rf.check()
    return rf


def estimate_renorm(reference_circuit: Circuit, noise: NoiseModel = NOISELESS, shots: int = 2000, n_twirls: int = 0,
                    variant: str = "mean_kink", confusion: Optional[ConfusionMatrix] = None, seed=0,
                    runner: Optional[Callable] = None, floor: float = RENORM_FLOOR, strict: bool = True) -> RenormFactor:
    """Run the reference circuit and turn its bond correlators into (1 - p).

    ``mean_kink`` averages the readout-corrected bond correlators, ``max_bond``
    takes the largest one.
    """
    batch = run_twirled(reference_circuit, noise, shots, n_twirls, seed, readout=n_twirls > 0, runner=runner)
    return renorm_from_batch(batch, confusion, variant, twirled=n_twirls > 0, circuit_hash=reference_circuit.hash,
                             floor=floor, strict=strict)


# --- mitigated cumulants --------------------------------------------------------------


def _term_scale(term: BondTerm, renorm: RenormFactor, weight_dependent: bool) -> float:
    if term.is_identity:
        return 1.0
    if weight_dependent:
        return renorm.value ** (term.weight / 2)
    return renorm.value


def mitigated_moment_samples(batch: BitstringBatch, N: int, confusion: Optional[ConfusionMatrix] = None,
                             renorm: RenormFactor = UNIT_RENORM, twirled: bool = True,
                             weight_dependent: bool = False) -> np.ndarray:
    """Per-shot values y_m whose shot average is the mitigated <n^m>, m = 1..3.

    Returns shape (rows, 3). Every traceless term of the expansion gets its own
    readout correction (by support) and the renormalization division.
    """
    if batch.basis != "X":
        raise DomainError("mitigation expects X-basis records")
    pw = np.tile(np.array([1.0, -1.0]), (N, 1)) if confusion is None else confusion.parity_weights(twirled)
    cache: dict = {}
    out = np.zeros((batch.n_rows, 3))
    for m in (1, 2, 3):
        acc = np.zeros(batch.n_rows)
        for term in moment_expansion(m, N):
            c = float(term.coefficient)
            if term.is_identity:
                acc += c
                continue
            sup = term.qubit_support
            if sup not in cache:
                cache[sup] = _parity_samples(batch, sup, pw)
            acc += c * cache[sup] / _term_scale(term, renorm, weight_dependent)
        out[:, m - 1] = acc
    return out


def cumulants_with_errors(y: np.ndarray, w: np.ndarray) -> CumulantSet:
    """Cumulants from per-shot moment samples, with delta-method standard errors."""
    S = w.sum()
    mu = (w @ y) / S
    d = y - mu
    cov = (d.T * w) @ d / max(S - 1, 1) / S
    g1 = np.array([1.0, 0.0, 0.0])
    g2 = np.array([-2 * mu[0], 1.0, 0.0])
    g3 = np.array([-3 * mu[1] + 6 * mu[0] ** 2, -3 * mu[0], 1.0])
    se = [float(np.sqrt(max(g @ cov @ g, 0.0))) for g in (g1, g2, g3)]
    cs = cumulants_from_moments(*mu)
    cs.stderr1, cs.stderr2, cs.stderr3 = se
    cs.metadata["moments"] = mu.tolist()
    return cs


def mitigate_cumulants(raw: BitstringBatch, N: int, confusion: Optional[ConfusionMatrix] = None,
                       renorm: RenormFactor = UNIT_RENORM, twirled: bool = True,
                       weight_dependent: bool = False) -> CumulantSet:
    """Readout-correct and renormalize every correlator, then rebuild cumulants.

    Standard errors come from the shot-to-shot spread of the corrected
    per-shot moments, so they already include the 1/(1-p) amplification;
    the renormalization factor's own uncertainty is added to kappa_1 in
    quadrature.
    """
    if renorm is not UNIT_RENORM:
        renorm.check()
    y = mitigated_moment_samples(raw, N, confusion, renorm, twirled, weight_dependent)
    cs = cumulants_with_errors(y, raw.weights)
    if renorm.value != 1.0 and renorm.stderr > 0:
        # traceless part of kappa_1 scales as 1/(1-p)
        traceless = (N - 1) / (2 * N) - cs.kappa1
        extra = abs(traceless) * renorm.stderr / renorm.value
        cs.stderr1 = float(np.hypot(cs.stderr1, extra))
    cs.metadata.update({"renorm": renorm.value, "readout_corrected": confusion is not None, "estimator": "mitigated"})
    return cs


def mitigation_report(tau_Q: float, r: int, renorm: RenormFactor, n_twirls: int, shots_total: int,
                      confusion: Optional[ConfusionMatrix]) -> dict:
    return {
        "tau_Q": tau_Q,
        "r": r,
        "renorm_value": renorm.value,
        "renorm_stderr": renorm.stderr,
        "variant": renorm.variant,
        "n_twirls": n_twirls,
        "shots_total": shots_total,
        "confusion_summary": None if confusion is None else confusion.summary(),
    }


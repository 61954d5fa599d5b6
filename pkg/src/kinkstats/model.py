"""Transverse-field Ising quench: schedule, kink observable and moment algebra.

Qubits are indexed 0..N-1 and bond ``i`` denotes the pair (i, i+1), so an open
chain of N spins has bonds 0..N-2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import DomainError, InconsistentMomentsError

MAX_ORDER = 3


@dataclass(frozen=True)
class QuenchSchedule:
    """Linear ramp J(t) = J0 t/tau_Q, h(t) = h0 (1 - t/tau_Q)."""

    tau_Q: float
    J0: float = 1.0
    h0: float = 1.0

    def __post_init__(self):
        if not self.tau_Q > 0:
            raise DomainError(f"tau_Q must be positive, got {self.tau_Q}")


def couplings_at(schedule: QuenchSchedule, t: float) -> tuple[float, float]:
    """Return ``(J(t), h(t))`` for ``0 <= t <= tau_Q``."""
    tau = schedule.tau_Q
    if not 0.0 <= t <= tau:
        raise DomainError(f"t={t} outside [0, {tau}]")
    s = t / tau
    return schedule.J0 * s, schedule.h0 * (1.0 - s)


def hamiltonian_coefficients(schedule: QuenchSchedule, t: float) -> tuple[float, float]:
    """Like :func:`couplings_at` but without the range check (for ODE solvers
    that may probe slightly past the endpoint)."""
    s = t / schedule.tau_Q
    return schedule.J0 * s, schedule.h0 * (1.0 - s)


def _as_bit_array(bits) -> np.ndarray:
    if isinstance(bits, str):
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(bits, dtype=np.uint8)


def kink_count(bits):
    """Number of adjacent unequal pairs in an X-basis outcome.

    ``bits`` may be a string such as ``"0101"``, a 1-D array (one outcome) or a
    2-D array of shape (shots, N), in which case an array of counts is returned.
    """
    b = _as_bit_array(bits)
    k = np.count_nonzero(b[..., 1:] != b[..., :-1], axis=-1)
    if b.ndim == 1:
        return int(k)
    return k


def kink_density(bits, N: Optional[int] = None):
    b = _as_bit_array(bits)
    N = b.shape[-1] if N is None else N
    return kink_count(b) / N


@dataclass(frozen=True)
class BondTerm:
    """A signed product of bond operators X_i X_{i+1}.

    ``bonds`` is the canonical bond set after X^2 = 1 cancellation (bonds that
    appear an even number of times drop out).
    """

    bonds: tuple[int, ...]
    coefficient: Fraction

    @property
    def qubit_support(self) -> frozenset[int]:
        support: set[int] = set()
        for i in self.bonds:
            support ^= {i, i + 1}
        return frozenset(support)

    @property
    def is_identity(self) -> bool:
        return not self.bonds

    @property
    def traceless(self) -> bool:
        return bool(self.bonds)

    @property
    def weight(self) -> int:
        return len(self.qubit_support)


def moment_expansion(m: int, N: int) -> list[BondTerm]:
    """Expand n^m into identity plus traceless bond products.

    Uses n = (1/2N) sum_i (1 - X_i X_{i+1}) and the fact that the bond operators
    commute and square to one. Terms are returned sorted, identity first.
    """
    if m not in (1, 2, 3):
        raise DomainError(f"unsupported moment order {m}; only 1..{MAX_ORDER}")
    if N < 2:
        raise DomainError("moment expansion needs N >= 2")
    base = {frozenset(): Fraction(N - 1, 2 * N)}
    for i in range(N - 1):
        base[frozenset([i])] = Fraction(-1, 2 * N)

    acc: dict[frozenset, Fraction] = {frozenset(): Fraction(1)}
    for _ in range(m):
        nxt: dict[frozenset, Fraction] = {}
        for s1, c1 in acc.items():
            for s2, c2 in base.items():
                key = s1 ^ s2
                nxt[key] = nxt.get(key, Fraction(0)) + c1 * c2
        acc = nxt
    terms = [BondTerm(tuple(sorted(s)), c) for s, c in acc.items() if c != 0]
    terms.sort(key=lambda t: (len(t.bonds), t.bonds))
    return terms


@dataclass
class CumulantSet:
    kappa1: float
    kappa2: float
    kappa3: float
    stderr1: float = float("nan")
    stderr2: float = float("nan")
    stderr3: float = float("nan")
    ci95_1: Optional[tuple[float, float]] = None
    ci95_2: Optional[tuple[float, float]] = None
    ci95_3: Optional[tuple[float, float]] = None
    metadata: dict = field(default_factory=dict)

    @property
    def kappas(self) -> tuple[float, float, float]:
        return (self.kappa1, self.kappa2, self.kappa3)

    @property
    def stderrs(self) -> tuple[float, float, float]:
        return (self.stderr1, self.stderr2, self.stderr3)

    def kappa(self, m: int) -> float:
        return self.kappas[m - 1]

    def to_dict(self) -> dict:
        return {
            "kappa": list(self.kappas),
            "stderr": list(self.stderrs),
            "ci95": [
                None if c is None else list(c) for c in (self.ci95_1, self.ci95_2, self.ci95_3)
            ],
            "metadata": self.metadata,
        }


def cumulants_from_moments(mu1: float, mu2: float, mu3: float, tol: float = 1e-9) -> CumulantSet:
    """Convert raw moments of the kink density into its first three cumulants.

    A variance below ``-tol`` cannot come from a real distribution and raises
    :class:`InconsistentMomentsError`; tiny negative values are clipped to 0.
    """
    k1 = mu1
    k2 = mu2 - mu1 * mu1
    if k2 < -tol:
        raise InconsistentMomentsError(f"negative variance {k2:.3e} from moments")
    k2 = max(k2, 0.0)
    k3 = mu3 - 3.0 * k1 * k2 - k1**3
    return CumulantSet(k1, k2, k3)

from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from kinkstats import oracle
from kinkstats.errors import DomainError, InconsistentMomentsError
from kinkstats.model import (
    BondTerm,
    QuenchSchedule,
    couplings_at,
    cumulants_from_moments,
    kink_count,
    moment_expansion,
)


def test_couplings_endpoints_and_midpoint():
    s = QuenchSchedule(2.0)
    assert couplings_at(s, 0.0) == (0.0, 1.0)
    assert couplings_at(s, 1.0) == (0.5, 0.5)
    assert couplings_at(s, 2.0) == (1.0, 0.0)


@pytest.mark.parametrize("t", [-1e-9, 2.0 + 1e-9, 5.0])
def test_couplings_out_of_range(t):
    with pytest.raises(DomainError):
        couplings_at(QuenchSchedule(2.0), t)


def test_schedule_rejects_nonpositive_tau():
    with pytest.raises(DomainError):
        QuenchSchedule(0.0)


@given(st.floats(0.01, 50.0), st.floats(0.0, 1.0))
def test_crossing_at_half_quench(tau, frac):
    J, h = couplings_at(QuenchSchedule(tau), frac * tau)
    assert J + h == pytest.approx(1.0)
    if frac == 0.5:
        assert J == pytest.approx(h)


@pytest.mark.parametrize("bits, k", [("0000", 0), ("0011", 1), ("0101", 3), ("1", 0), ("10", 1)])
def test_kink_count_examples(bits, k):
    assert kink_count(bits) == k


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_kink_count_z2_symmetric_and_bounded(bits):
    b = np.array(bits)
    k = kink_count(b)
    assert k == kink_count(1 - b)
    assert 0 <= k <= len(bits) - 1
    assert k == sum(bits[i] != bits[i + 1] for i in range(len(bits) - 1))


def test_kink_count_vectorized():
    bits = np.array([[0, 0, 1, 1], [0, 1, 0, 1]])
    assert kink_count(bits).tolist() == [1, 3]


def _dense_coefficients(N, m):
    """Pauli-X-string decomposition of the dense n^m: c_S = Tr(n^m X_S) / 2^N."""
    nm = np.linalg.matrix_power(oracle.kink_operator(N), m)
    out = {}
    for mask in product([0, 1], repeat=N):
        label = "".join("X" if b else "I" for b in mask)
        c = np.trace(nm @ oracle.pauli_string(label)).real / 2**N
        if abs(c) > 1e-12:
            out[frozenset(q for q in range(N) if mask[q])] = c
    return out


def test_expansion_first_order_two_sites():
    terms = moment_expansion(1, 2)
    assert terms == [BondTerm((), Fraction(1, 4)), BondTerm((0,), Fraction(-1, 4))]


def test_expansion_second_order_identity_coefficient():
    terms = moment_expansion(2, 3)
    assert terms[0].is_identity and terms[0].coefficient == Fraction(1, 6)


@pytest.mark.parametrize("N", range(2, 7))
@pytest.mark.parametrize("m", [1, 2, 3])
def test_expansion_matches_dense_matrix(N, m):
    dense = _dense_coefficients(N, m)
    got = {t.qubit_support: float(t.coefficient) for t in moment_expansion(m, N)}
    assert set(got) == set(dense)
    for k in dense:
        assert got[k] == pytest.approx(dense[k], abs=1e-12)


def test_bond_term_support_cancels_shared_qubits():
    t = BondTerm((0, 1), Fraction(1))
    assert t.qubit_support == frozenset({0, 2})
    assert t.traceless and not BondTerm((), Fraction(1)).traceless


def test_expansion_rejects_unsupported_order():
    with pytest.raises(DomainError):
        moment_expansion(4, 5)


def test_cumulants_trivial_cases():
    assert cumulants_from_moments(0, 0, 0).kappas == (0, 0, 0)
    c = 0.3
    k = cumulants_from_moments(c, c**2, c**3).kappas
    assert k == pytest.approx((c, 0, 0), abs=1e-15)


def test_cumulants_binomial_reference():
    N = 19
    k = np.arange(N)
    p = binom.pmf(k, N - 1, 0.5)
    n = k / N
    cs = cumulants_from_moments(*(p @ n**m for m in (1, 2, 3)))
    assert cs.kappa1 == pytest.approx(18 / 38, abs=1e-14)
    assert cs.kappa2 == pytest.approx(18 / (4 * 361), abs=1e-14)
    assert cs.kappa3 == pytest.approx(0.0, abs=1e-14)


def test_negative_variance_rejected():
    with pytest.raises(InconsistentMomentsError):
        cumulants_from_moments(0.5, 0.1, 0.1)

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from kinkstats import oracle
from kinkstats import statevector as sv
from kinkstats.errors import ConstructionError, DomainError
from kinkstats.model import QuenchSchedule
from kinkstats.trotter import (
    COUP,
    FIELD,
    Circuit,
    TrotterPlan,
    build_quench_circuit,
    build_reference_circuit,
    dumps,
    inverse_ops,
    loads,
    midpoint_times,
    quench_circuit,
)


@pytest.mark.parametrize(
    "r, t, expected",
    [(1, 2.0, [1.0]), (4, 2.0, [0.25, 0.75, 1.25, 1.75])],
)
def test_midpoints(r, t, expected):
    assert midpoint_times(TrotterPlan(r, t)) == pytest.approx(expected)


def test_midpoints_twenty_steps():
    assert midpoint_times(TrotterPlan(20, 20.0)) == pytest.approx(np.arange(20) + 0.5)


def test_plan_rejects_zero_steps():
    with pytest.raises((DomainError, ConstructionError)):
        TrotterPlan(0, 1.0)


def test_two_site_single_step_against_matrix_exponentials():
    c = quench_circuit(2, 1.0, 1)
    Z = oracle.field_sum(2)
    XX = oracle.coupling_sum(2)
    half = scipy.linalg.expm(1j * 0.5 * 0.5 * Z)
    U = half @ scipy.linalg.expm(1j * 0.5 * 1.0 * XX) @ half
    assert np.abs(oracle.circuit_unitary(c) - U).max() < 1e-12


def test_vanishing_quench_is_identity():
    c = quench_circuit(4, 1e-6, 1)
    assert np.abs(oracle.circuit_unitary(c) - np.eye(16)).max() < 1e-5
    k1 = sv.kink_moments(sv.final_state(c), (1,))[0]
    assert k1 == pytest.approx(3 / 8, abs=1e-9)


def test_fine_trotter_matches_ode():
    N, tau = 4, 2.0
    exact = oracle.exact_kink_moments(QuenchSchedule(tau), N, (1,))[0]
    k1 = sv.kink_moments(sv.final_state(quench_circuit(N, tau, 2000)), (1,))[0]
    assert abs(k1 - exact) <= 1e-6


@pytest.mark.parametrize("N", [2, 3, 5])
@pytest.mark.parametrize("tau", [1.0, 2.0, 5.0])
def test_second_order_convergence(N, tau):
    exact = oracle.exact_kink_moments(QuenchSchedule(tau), N, (1,))[0]
    errs = [abs(sv.kink_moments(sv.final_state(quench_circuit(N, tau, r)), (1,))[0] - exact)
            for r in (100, 200, 400)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3) & (ratios <= 5)), ratios


@given(st.integers(2, 9), st.integers(1, 30))
def test_coupling_gate_count(N, r):
    c = quench_circuit(N, 1.0, r)
    assert c.n_coupling_gates == r * (N - 1)


def test_split_variants_agree_to_second_order():
    a = sv.final_state(quench_circuit(4, 2.0, 400))
    b = sv.final_state(quench_circuit(4, 2.0, 400, split="coupling_outer"))
    assert abs(sv.kink_moments(a, (1,))[0] - sv.kink_moments(b, (1,))[0]) < 1e-5


def test_merged_fields_same_unitary():
    a = oracle.circuit_unitary(quench_circuit(3, 2.0, 5))
    b = oracle.circuit_unitary(quench_circuit(3, 2.0, 5, merge_fields=True))
    assert np.abs(a - b).max() < 1e-12


def test_reversal_restores_initial_state():
    c = quench_circuit(8, 3.0, 20)
    st_ = sv.evolve(sv.initial_state(8), list(c.body) + inverse_ops(c.body))
    assert sv.kink_moments(st_, (1,))[0] == pytest.approx(7 / 16, abs=1e-12)
    assert abs(abs(st_.amplitudes[0]) - 1) < 1e-12


def test_sublayer_reordering():
    c = quench_circuit(5, 2.0, 3)
    ops = list(c.body)
    # reverse each maximal run of coupling gates on same-parity bonds
    out, i = [], 0
    while i < len(ops):
        j = i
        while j < len(ops) and ops[j].kind == COUP and ops[j].qubit % 2 == ops[i].qubit % 2:
            j += 1
        if j > i:
            out += ops[i:j][::-1]
            i = j
        else:
            out.append(ops[i])
            i += 1
    assert np.abs(oracle.ops_unitary(ops, 5) - oracle.ops_unitary(out, 5)).max() <= 1e-13


def test_text_roundtrip():
    c = quench_circuit(5, 2.5, 7)
    back = loads(dumps(c))
    assert back.ops == c.ops and back.hash == c.hash


def test_plan_must_cover_quench():
    with pytest.raises(ConstructionError):
        build_quench_circuit(QuenchSchedule(2.0), TrotterPlan(4, 1.0), 4)


def test_zero_field_reference_has_unit_correlators():
    ref = build_reference_circuit(quench_circuit(6, 3.0, 8))
    assert all(op.kind != FIELD or op.angle == 0 for op in ref.body)
    assert np.allclose(sv.bond_correlators(sv.final_state(ref)), 1.0, atol=1e-12)


def test_pi_field_reference_against_dense_oracle():
    ref = build_reference_circuit(quench_circuit(2, 1.0, 1), "pi_field")
    field_total = sum(op.angle for op in ref.body if op.kind == FIELD and op.qubit == 0)
    assert field_total == pytest.approx(math.pi)
    U = oracle.circuit_unitary(ref)
    psi = U @ oracle.zero_state(2)
    dense = oracle.expectation(psi, oracle.embed(2, {0: oracle.X, 1: oracle.X}))
    assert sv.bond_correlators(sv.final_state(ref))[0] == pytest.approx(dense, abs=1e-12)


def test_circuit_rejects_out_of_range_qubits():
    with pytest.raises((ConstructionError, DomainError, ValueError)):
        Circuit(2, (quench_circuit(3, 1.0, 1).ops[0].__class__(COUP, 1, 0.1),))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.floats(0.1, 5.0), st.integers(1, 6))
def test_unitarity(N, tau, r):
    U = oracle.circuit_unitary(quench_circuit(N, tau, r))
    assert np.abs(U.conj().T @ U - np.eye(2**N)).max() < 1e-12

import numpy as np
import pytest
from scipy.stats import chisquare

from kinkstats import mps
from kinkstats import statevector as sv
from kinkstats.errors import TruncationOverflowError
from kinkstats.model import moment_expansion
from kinkstats.trotter import Circuit, coupling_rotation, field_rotation, hadamard_layer, quench_circuit


def _k1(state):
    N = state.n_qubits
    return (N - 1 - mps.bond_correlators(state).sum()) / (2 * N)


def test_plus_and_zero_correlators():
    assert np.allclose(mps.bond_correlators(mps.MPSState.product_plus(8)), 1.0)
    assert np.allclose(mps.bond_correlators(mps.MPSState.product_zero(8)), 0.0)


def test_field_only_circuit_stays_product():
    ops = tuple(field_rotation(q, 0.3 * (q + 1)) for q in range(6)) + (hadamard_layer(),)
    st = mps.run_circuit(Circuit(6, ops, "X"))
    assert st.max_bond_dim == 1


@pytest.mark.parametrize("N, tau, r", [(6, 2.0, 10), (9, 1.0, 20)])
def test_amplitudes_match_statevector(N, tau, r):
    c = quench_circuit(N, tau, r)
    st = mps.run_circuit(c, 0.0)
    st.move_center(0)
    full = st.site_tensors[0]
    for a in st.site_tensors[1:]:
        full = np.tensordot(full, a, axes=(-1, 0))
    psi = full.reshape(-1)
    ref = sv.final_state(c).amplitudes
    assert np.abs(psi - ref).max() < 1e-12


def test_equivalence_n12_tight_tolerance():
    c = quench_circuit(12, 2.0, 50)
    ref = sv.kink_moments(sv.final_state(c), (1,))[0]
    assert abs(_k1(mps.run_circuit(c, 1e-16)) - ref) <= 1e-8


@pytest.mark.xfail(strict=True, reason="trunc_tol bounds discarded weight, whose effect on <n> is first order "
                                       "in the dropped amplitude: about 3e-6 at 1e-10, not 1e-8")
def test_equivalence_n12_at_default_tolerance():
    c = quench_circuit(12, 2.0, 50)
    ref = sv.kink_moments(sv.final_state(c), (1,))[0]
    assert abs(_k1(mps.run_circuit(c, 1e-10)) - ref) <= 1e-8


def test_correlators_n14():
    c = quench_circuit(14, 3.0, 100)
    ref = sv.bond_correlators(sv.final_state(c))
    assert np.abs(mps.bond_correlators(mps.run_circuit(c, 1e-16)) - ref).max() <= 1e-8


def test_bond_terms_match_statevector():
    N = 7
    c = quench_circuit(N, 2.0, 12)
    terms = moment_expansion(2, N)
    a = mps.expectation_bond_terms(mps.run_circuit(c, 1e-16), terms)
    b = sv.expectation_bond_terms(sv.final_state(c), terms)
    assert np.allclose(a, b, atol=1e-10)


def test_large_chain_runs_and_reports():
    st = mps.run_circuit(quench_circuit(100, 5.0, 300), 1e-10)
    assert 1 < st.max_bond_dim < 64
    assert 0 < st.cumulative_discarded < 1e-6
    assert 0 < _k1(st) < 0.5


def test_norm_and_discarded_bookkeeping():
    st = mps.MPSState.product_zero(10, trunc_tol=1e-8)
    history = []
    for op in quench_circuit(10, 4.0, 20).body:
        mps.evolve_circuit(st, [op])
        history.append(st.cumulative_discarded)
    assert np.all(np.diff(history) >= 0)
    n = len(st.discarded)
    assert 1 - 10 * 1e-8 * n <= st.retained_norm2 <= 1
    assert st.norm() == pytest.approx(1.0, abs=1e-12)


def test_canonical_form_in_debug_mode():
    st = mps.run_circuit(quench_circuit(8, 3.0, 10), 1e-12, debug=True)
    assert st.isometry_residual() <= 1e-10
    st.canonicalize(4)
    assert st.isometry_residual() <= 1e-10


def test_bond_cap_overflow():
    with pytest.raises(TruncationOverflowError) as exc:
        mps.run_circuit(quench_circuit(12, 5.0, 30), 1e-10, max_bond=2)
    assert exc.value.discarded_weight > 1e-10


def test_plus_state_samples_all_zero():
    b = mps.sample(mps.MPSState.product_plus(6), 200, "X", seed=1)
    assert not b.bits.any()


def test_ghz_z_basis():
    N = 5
    tensors = []
    for j in range(N):
        l = 1 if j == 0 else 2
        r = 1 if j == N - 1 else 2
        a = np.zeros((l, 2, r), dtype=complex)
        for s in (0, 1):
            a[min(s, l - 1), s, min(s, r - 1)] = 1.0
        tensors.append(a)
    tensors[0] /= np.sqrt(2)
    st = mps.MPSState(N, tensors, 0)
    b = mps.sample(st, 2000, "Z", seed=2)
    rows = {tuple(r) for r in b.bits}
    assert rows <= {(0,) * N, (1,) * N} and len(rows) == 2


def test_sampled_kink_density_n10():
    N, S = 10, 100_000
    c = quench_circuit(N, 2.0, 20)
    exact = sv.kink_moments(sv.final_state(c), (1,))[0]
    n = mps.sample(mps.run_circuit(c), S, "X", seed=3).kink_counts() / N
    assert abs(n.mean() - exact) <= 3 * n.std(ddof=1) / np.sqrt(S)


def test_sampler_marginals_chi_square():
    N, S = 8, 100_000
    st = mps.run_circuit(quench_circuit(N, 2.0, 10))
    bits = mps.sample(st.copy(), S, "X", seed=4).bits
    for sites in ([0], [3], [7], [2, 3], [0, 7]):
        p = mps.marginals(st, sites).reshape(-1)
        idx = bits[:, sites] @ (1 << np.arange(len(sites))[::-1])
        obs = np.bincount(idx, minlength=len(p))
        assert chisquare(obs, S * p).pvalue > 0.01


def test_checkpoint_roundtrip(tmp_path):
    st = mps.run_circuit(quench_circuit(8, 2.0, 10))
    mps.save_checkpoint(st, tmp_path / "s.mps")
    back = mps.load_checkpoint(tmp_path / "s.mps")
    assert all(np.array_equal(a, b) for a, b in zip(st.site_tensors, back.site_tensors))
    assert np.allclose(mps.bond_correlators(back), mps.bond_correlators(st))


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "x.mps"
    p.write_bytes(b"nope\n")
    with pytest.raises(ValueError):
        mps.load_checkpoint(p)


def test_coupling_gate_single_bond():
    st = mps.MPSState.product_zero(2)
    st.apply_coupling(0, np.pi / 4)
    full = np.tensordot(st.site_tensors[0], st.site_tensors[1], axes=(2, 0)).reshape(-1)
    ref = sv.apply(sv.prepare(2), coupling_rotation(0, np.pi / 4)).amplitudes
    assert np.allclose(full, ref, atol=1e-14)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import beta, binom, kstest

from kinkstats import statevector as sv
from kinkstats.analysis.bayes import PosteriorConfig, bayesian_intervals
from kinkstats.analysis.estimators import estimate_cumulants, plugin_cumulants
from kinkstats.analysis.fitting import SweepPoint, find_tau_f, fit_decay
from kinkstats.analysis.maxent import maxent_pmf, moments_of_pmf
from kinkstats.batch import BitstringBatch
from kinkstats.errors import DomainError, FeasibilityError, FitError, SolverError
from kinkstats.model import CumulantSet
from kinkstats.trotter import quench_circuit


# --- estimators ---------------------------------------------------------------


def test_identical_shots_have_no_spread():
    b = BitstringBatch.from_bits(np.tile([0, 1, 1, 0, 1], (50, 1)))
    cs = estimate_cumulants(b)
    assert cs.kappa1 == pytest.approx(3 / 5) and cs.kappa2 == 0 and cs.kappa3 == 0


def test_binomial_kink_counts():
    # independent uniform bits give Binomial(N - 1, 1/2) kink counts
    N, S = 19, 1_000_000
    rng = np.random.default_rng(0)
    b = BitstringBatch.from_bits(rng.integers(0, 2, size=(S, N)))
    cs = estimate_cumulants(b)
    assert abs(cs.kappa1 - 18 / 38) <= 3 * cs.stderr1
    assert abs(cs.kappa2 - 18 / (4 * 361)) <= 3 * cs.stderr2
    assert abs(cs.kappa3) <= 3 * cs.stderr3


def test_vanishing_quench_plateau():
    N = 12
    b = sv.sample(sv.final_state(quench_circuit(N, 1e-3, 1)), 20_000, seed=1)
    cs = estimate_cumulants(b)
    assert abs(cs.kappa1 - (N - 1) / (2 * N)) <= 3 * cs.stderr1


def test_k_statistic_is_unbiased():
    # average of k3 over many small samples of a skewed law approaches kappa_3
    rng = np.random.default_rng(1)
    N = 10
    p = binom.pmf(np.arange(N), N - 1, 0.15)
    n = np.arange(N) / N
    mu = p @ n
    k3_true = p @ (n - mu) ** 3
    vals = []
    for _ in range(4000):
        k = rng.choice(N, size=12, p=p)
        bits = np.zeros((12, N), dtype=np.uint8)
        for row, kk in zip(bits, k):
            row[: kk + 1] = np.arange(kk + 1) % 2  # alternating prefix gives kk kinks
            row[kk + 1 :] = kk % 2
        vals.append(estimate_cumulants(BitstringBatch.from_bits(bits), N).kappa3)
    vals = np.array(vals)
    assert abs(vals.mean() - k3_true) <= 4 * vals.std() / np.sqrt(len(vals))


@given(st.lists(st.integers(0, 2**6 - 1), min_size=3, max_size=60), st.integers(2, 6))
def test_merged_batches_pool_linearly(rows, parts):
    N = 6
    bits = ((np.array(rows)[:, None] >> np.arange(N)[::-1]) & 1).astype(np.uint8)
    chunks = [c for c in np.array_split(bits, parts) if len(c)]
    batches = [BitstringBatch.from_bits(c, twirl_id=i) for i, c in enumerate(chunks)]
    merged = estimate_cumulants(BitstringBatch.concat(batches))
    pooled = sum(len(c) * estimate_cumulants(b).kappa1 for c, b in zip(chunks, batches)) / len(bits)
    assert merged.kappa1 == pytest.approx(pooled, abs=1e-14)


def test_plugin_matches_numpy():
    x = np.random.default_rng(2).random(100)
    m, v, t = plugin_cumulants(x)
    assert (m, v) == pytest.approx((x.mean(), x.var()))
    assert t == pytest.approx(((x - x.mean()) ** 3).mean())


def test_z_basis_rejected():
    with pytest.raises(DomainError):
        estimate_cumulants(BitstringBatch.from_bits(np.zeros((2, 3)), basis="Z"))


# --- bayes ------------------------------------------------------------------------


def test_two_outcome_interval_straddles_quarter():
    res = bayesian_intervals({"00": 50, "01": 50}, config=PosteriorConfig(n_replicas=500, resample_size=100), seed=1)
    lo, hi = res.interval(1)
    assert lo < 0.25 < hi and hi > lo


def test_single_string_degenerate():
    with pytest.warns(UserWarning):
        res = bayesian_intervals({"0110": 30})
    assert res.degenerate and res.interval(1)[0] == res.interval(1)[1] == pytest.approx(0.5)


def test_dirichlet_reduces_to_beta():
    a, b = 30, 70  # counts of "00" (no kink) and "01" (one kink)
    cfg = PosteriorConfig(prior_pseudocount=1.0, n_replicas=2000, resample_size=10**7)
    res = bayesian_intervals({"00": a, "01": b}, config=cfg, seed=3)
    p = 2 * res.replicas[:, 0]  # kappa_1 = p / 2 for N = 2
    assert kstest(p, beta(b + 1, a + 1).cdf).pvalue > 0.01


def test_interval_width_scales_with_shots():
    st_ = sv.final_state(quench_circuit(4, 2.0, 10))
    widths = {}
    for S in (1000, 2000):
        w = []
        for e in range(30):
            batch = sv.sample(st_, S, seed=100 + e)
            lo, hi = bayesian_intervals(batch, config=PosteriorConfig(n_replicas=300), seed=e).interval(1)
            w.append(hi - lo)
        widths[S] = np.mean(w)
    assert 1.3 <= widths[1000] / widths[2000] <= 1.5


def test_custom_estimator_and_attach():
    batch = sv.sample(sv.final_state(quench_circuit(5, 1.0, 5)), 500, seed=4)
    calls = []

    def est(b):
        calls.append(b.shots)
        return estimate_cumulants(b)

    res = bayesian_intervals(batch, est, PosteriorConfig(n_replicas=100), seed=5)
    assert len(calls) == 100 and set(calls) == {500}
    cs = res.attach(estimate_cumulants(batch))
    assert cs.ci95_1 == res.interval(1)


def test_posterior_config_validation():
    with pytest.raises(ValueError):
        PosteriorConfig(prior_pseudocount=0)


def test_bayes_reproducible():
    batch = sv.sample(sv.final_state(quench_circuit(5, 1.0, 5)), 300, seed=6)
    a = bayesian_intervals(batch, config=PosteriorConfig(n_replicas=100), seed=9)
    b = bayesian_intervals(batch, config=PosteriorConfig(n_replicas=100), seed=9)
    assert np.array_equal(a.replicas, b.replicas)


# --- fitting -----------------------------------------------------------------------


def _points(taus, vals):
    return [SweepPoint(t, 1, CumulantSet(v, v / 10, v / 100, v / 50, 0.1, 0.1)) for t, v in zip(taus, vals)]


@pytest.mark.parametrize("window", [(1, 10), (2, 50), (0.5, 100)])
def test_exact_power_law(window):
    taus = np.geomspace(0.5, 100, 15)
    fit = fit_decay(_points(taus, 0.4 * taus**-0.5), window_override=window)
    assert fit.alpha == pytest.approx(0.5, abs=1e-10)


@settings(max_examples=30)
@given(st.floats(1e-3, 1e3), st.lists(st.floats(-0.2, 0.2), min_size=8, max_size=8))
def test_scale_equivariance(c, noise):
    taus = np.geomspace(1, 20, 8)
    vals = 0.3 * taus**-0.6 * np.exp(noise)
    a = fit_decay(_points(taus, vals), window_override=(1, 20))
    b = fit_decay(_points(taus, c * vals), window_override=(1, 20))
    assert b.alpha == pytest.approx(a.alpha, abs=1e-12)
    assert b.intercept - a.intercept == pytest.approx(np.log(c), abs=1e-9)


def test_tau_f_interpolation_exact_for_power_law():
    N = 10
    taus = np.geomspace(1, 100, 9)
    tau_f, crossed = find_tau_f(taus, 0.5 * taus**-0.5, N)
    assert crossed and tau_f == pytest.approx((0.5 * N) ** 2, rel=1e-12)


def test_tau_f_not_crossed_uses_sweep_end():
    taus = np.geomspace(1, 10, 5)
    tau_f, crossed = find_tau_f(taus, 0.4 * taus**-0.5, 100)
    assert not crossed and tau_f == 10


def test_fit_uses_tau_f_window():
    N = 20
    taus = np.geomspace(0.5, 400, 20)
    fit = fit_decay(_points(taus, 0.5 * taus**-0.5), N=N)
    assert fit.window == (1.0, pytest.approx(100.0))
    assert all(1 <= t <= 100 + 1e-9 for t in fit.points_used)


def test_fit_needs_three_points():
    with pytest.raises(FitError):
        fit_decay(_points([1, 2, 30], [0.3, 0.2, 0.05]), window_override=(1, 5))


def test_weighted_fit():
    taus = np.geomspace(1, 10, 6)
    fit = fit_decay(_points(taus, 0.4 * taus**-0.7), window_override=(1, 10), weighted=True)
    assert fit.alpha == pytest.approx(0.7, abs=1e-10)


def test_fit_record():
    taus = np.geomspace(1, 10, 6)
    d = fit_decay(_points(taus, 0.4 * taus**-0.7), window_override=(1, 10)).to_dict()
    assert {"cumulant", "alpha", "stderr", "window", "points_used"} <= set(d)


# --- maxent ----------------------------------------------------------------------------


def test_uniform_recovered():
    N = 15
    x = np.arange(N) / N
    sol = maxent_pmf([x.mean(), (x**2).mean(), (x**3).mean()], N)
    assert np.abs(sol.pmf - 1 / N).max() <= 1e-8


def test_binomial_roundtrip():
    N = 20
    p = binom.pmf(np.arange(N), N - 1, 0.3)
    target = moments_of_pmf(p, N)
    sol = maxent_pmf(target, N)
    assert np.abs(sol.moments() - target).max() <= 1e-6
    assert sol.pmf.min() >= 0 and abs(sol.pmf.sum() - 1) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 40), st.floats(0.05, 0.95), st.floats(0.3, 3.0))
def test_dual_decreases_monotonically(N, theta, temp):
    p = binom.pmf(np.arange(N), N - 1, theta) ** (1 / temp)
    p /= p.sum()
    sol = maxent_pmf(moments_of_pmf(p, N), N)
    assert np.all(np.diff(sol.dual_history) <= 1e-13)
    assert np.abs(sol.moment_residuals).max() <= 1e-8


def test_infeasible_moments():
    with pytest.raises(FeasibilityError):
        maxent_pmf([0.3, 0.05, 0.01], 10)  # variance negative
    with pytest.raises(FeasibilityError):
        maxent_pmf([0.95, 0.95**2 + 0.001, 0.9], 10)  # mean beyond support


def test_solver_reports_residuals():
    N = 20
    p = binom.pmf(np.arange(N), N - 1, 0.1)
    with pytest.raises(SolverError) as exc:
        maxent_pmf(moments_of_pmf(p, N), N, max_iter=1)
    assert exc.value.residuals is not None


def test_maxent_record():
    sol = maxent_pmf([0.2, 0.05, 0.015], 10)
    d = sol.to_dict()
    assert set(d) == {"N", "moments_in", "lambda", "pmf"} and len(d["pmf"]) == 10


def test_fit_reports_replica_spread():
    taus = np.geomspace(1, 10, 6)
    pts = [SweepPoint(float(t), 10, CumulantSet(0.4 * t**-0.6, 0.0, 0.0, 0.4 * t**-0.6 * 0.01, 0, 0))
           for t in taus]
    fit = fit_decay(pts, 1, window_override=(1, 10))
    assert abs(fit.alpha - 0.6) < 1e-12
    # 1% relative errors on a decade of tau -> spread of order 0.01
    assert 0.003 < fit.replica_stderr < 0.03
    assert fit.to_dict()["replica_stderr"] == fit.replica_stderr
    exact = [SweepPoint(p.tau_Q, p.r, CumulantSet(p.cumulants.kappa1, 0, 0, 0.0, 0, 0)) for p in pts]
    assert fit_decay(exact, 1, window_override=(1, 10)).replica_stderr is None

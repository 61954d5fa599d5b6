"""Acceptance checks, runnable from the test suite or ``kinkstats verify``.

Each check returns a :class:`Check` with a pass flag, the measured numbers and
its wall time; runtime limits are part of the pass condition.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import binom

from . import mitigation, mps, oracle
from . import statevector as sv
from .analysis.bayes import PosteriorConfig, bayesian_intervals
from .analysis.estimators import estimate_cumulants
from .analysis.fitting import SweepPoint, fit_decay
from .analysis.maxent import maxent_pmf
from .model import CumulantSet, QuenchSchedule, cumulants_from_moments
from .statevector import NoiseModel
from .trotter import build_reference_circuit, quench_circuit


@dataclass
class Check:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float = float("inf")
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} {self.name}: {self.detail} ({self.seconds:.1f}s / limit {self.limit:.0f}s)"


def _timed(number, name, limit, fn: Callable[[], tuple[bool, str, dict]]) -> Check:
    t0 = time.perf_counter()
    ok, detail, values = fn()
    dt = time.perf_counter() - t0
    return Check(number, name, bool(ok) and dt < limit, detail, dt, limit, values)


def _kappa1_sv(N, tau, r):
    st = sv.final_state(quench_circuit(N, tau, r))
    return sv.kink_moments(st, (1,))[0]


# 1 ------------------------------------------------------------------------------


def plateau(N=19, taus=(0.1, 0.05, 0.01), shots=2000, seed=1) -> Check:
    def run():
        target = (N - 1) / (2 * N)
        worst, rows = 0.0, []
        for i, tau in enumerate(taus):
            st = sv.final_state(quench_circuit(N, tau, 1))
            exact = sv.kink_moments(st, (1,))[0]
            sampled = estimate_cumulants(sv.sample(st, shots, "X", seed + i)).kappa1
            worst = max(worst, abs(exact - target), abs(sampled - target))
            rows.append((tau, exact, sampled))
        detail = f"max |k1 - {target:.4f}| = {worst:.4f} (<= 0.02) over tau_Q {list(taus)}"
        return worst <= 0.02, detail, {"rows": rows, "worst": worst}
    return _timed(1, "plateau", 10, run)


# 2 ------------------------------------------------------------------------------


def finite_size_rate(N=19, r=100, n_points=8, window=(1.0, 10.0)) -> Check:
    def run():
        taus = np.geomspace(window[0], window[1], n_points)
        pts = [SweepPoint(t, r, CumulantSet(_kappa1_sv(N, t, r), 0.0, 0.0)) for t in taus]
        fit = fit_decay(pts, 1, N, window_override=window)
        ok = abs(fit.alpha - 0.68) <= 0.05
        return ok, f"alpha = {fit.alpha:.4f} +- {fit.alpha_stderr:.4f} (target 0.68 +- 0.05)", {"alpha": fit.alpha}
    return _timed(2, "finite-size decay rate", 300, run)


# 3 ------------------------------------------------------------------------------

KZ_TAUS = tuple(float(t) for t in np.geomspace(1.0, 40.0, 8))


def mps_sweep(N, taus=KZ_TAUS, r=300, shots=10_000, trunc_tol=1e-10, seed=0) -> list[SweepPoint]:
    pts = []
    for i, tau in enumerate(taus):
        st = mps.run_circuit(quench_circuit(N, tau, r), trunc_tol)
        cs = estimate_cumulants(mps.sample(st, shots, "X", seed + 1000 * N + i), N)
        pts.append(SweepPoint(tau, r, cs, shots, "mps", extra={"chi": st.max_bond_dim}))
    return pts


def thermodynamic_trend(sizes=(25, 50, 100), shots=None, long: bool = False) -> Check:
    shots = shots or (100_000 if long else 10_000)

    def run():
        alphas, notes, extra = {}, [], {}
        for N in sizes:
            pts = mps_sweep(N, shots=shots)
            fit = fit_decay(pts, 1, N)
            alphas[N] = fit.alpha
            flag = "" if fit.tau_f_crossed else " (tau_f = sweep end)"
            notes.append(f"a({N})={fit.alpha:.3f}+-{fit.alpha_stderr:.3f} on [1, {fit.tau_f:.1f}]{flag}")
            if long:
                for m in (2, 3):
                    try:
                        f = fit_decay(pts, m, N)
                        extra[(N, m)] = f.alpha
                        notes.append(f"k{m}: a={f.alpha:.3f}")
                    except Exception as exc:  # reported, not gated
                        notes.append(f"k{m}: {exc}")
        a = [alphas[N] for N in sizes]
        decreasing = all(x > y for x, y in zip(a, a[1:]))
        last = a[-1]
        ok = decreasing and 0.5 <= last <= 0.62
        return ok, "; ".join(notes) + f"; decreasing={decreasing}", {"alphas": alphas, "long": extra}
    return _timed(3, "thermodynamic trend", 1800 if not long else float("inf"), run)


# 4 ------------------------------------------------------------------------------


def backend_equivalence(N=12, n_points=10, trunc_tol=1e-16, report_tol=1e-10) -> Check:
    def run():
        taus = np.geomspace(0.5, 8.0, n_points)
        gaps, loose = [], []
        for tau in taus:
            c = quench_circuit(N, float(tau), max(4, int(np.ceil(10 * tau))))
            ref = sv.kink_moments(sv.final_state(c), (1,))[0]
            for tol, out in ((trunc_tol, gaps), (report_tol, loose)):
                st = mps.run_circuit(c, tol)
                k1 = (N - 1 - mps.bond_correlators(st).sum()) / (2 * N)
                out.append(abs(k1 - ref))
        worst = max(gaps)
        detail = (f"max gap {worst:.2e} at trunc_tol {trunc_tol:g} (<= 1e-8); "
                  f"for reference {max(loose):.2e} at trunc_tol {report_tol:g}")
        return worst <= 1e-8, detail, {"gaps": gaps, "loose": loose}
    return _timed(4, "backend equivalence", 60, run)


# 5 ------------------------------------------------------------------------------


def trotter_order(N=6, tau=2.0, steps=(25, 50, 100, 200, 400)) -> Check:
    def run():
        psi = oracle.evolve_exact(QuenchSchedule(tau), N)
        exact = oracle.expectation(psi, oracle.kink_operator(N))
        errs = np.array([abs(_kappa1_sv(N, tau, r) - exact) for r in steps])
        ratios = errs[:-1] / errs[1:]
        asym = ratios[-2:]
        ok = bool(np.all((asym >= 3) & (asym <= 5)))
        detail = "error ratios per halving " + ", ".join(f"{x:.3f}" for x in ratios) + " (last two in [3, 5])"
        return ok, detail, {"errors": errs.tolist(), "ratios": ratios.tolist()}
    return _timed(5, "Trotter order", 60, run)


# 6 ------------------------------------------------------------------------------


def global_depolarizing(N=6, tau=2.0, r=10, p=0.4, shots=100_000, seed=6) -> Check:
    def run():
        circ = quench_circuit(N, tau, r)
        truth = cumulants_from_moments(*sv.kink_moments(sv.final_state(circ)))
        noise = NoiseModel(global_depol=p)
        raw = sv.run_noisy(circ, noise, shots, seed)
        rf = mitigation.estimate_renorm(build_reference_circuit(circ), noise, shots, seed=seed + 1)
        mit = mitigation.mitigate_cumulants(raw, N, renorm=rf, twirled=False)
        unm = estimate_cumulants(raw, N)
        z1 = abs(mit.kappa1 - truth.kappa1) / mit.stderr1
        z2 = abs(mit.kappa2 - truth.kappa2) / mit.stderr2
        zu = abs(unm.kappa1 - truth.kappa1) / unm.stderr1
        ok = z1 <= 3 and z2 <= 3 and zu >= 10
        detail = (f"renorm {rf.value:.4f}; mitigated k1 off {z1:.2f} sigma, k2 off {z2:.2f} sigma (<= 3); "
                  f"unmitigated k1 off {zu:.1f} sigma (>= 10)")
        return ok, detail, {"z1": z1, "z2": z2, "z_unmitigated": zu}
    return _timed(6, "mitigation exactness", 120, run)


# 7 ------------------------------------------------------------------------------


def renorm_decay(N=10, lam=0.005, steps=range(2, 21, 2), tau_per_step=0.5, shots=10_000, seed=7) -> Check:
    def run():
        noise = NoiseModel(two_qubit_depol=lam)
        rs, vals = [], []
        for i, r in enumerate(steps):
            ref = build_reference_circuit(quench_circuit(N, tau_per_step * r, r))
            rf = mitigation.estimate_renorm(ref, noise, shots, seed=seed + i, strict=False)
            rs.append(r)
            vals.append(rf.value)
        x, y = np.array(rs, float), np.log(vals)
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        r2 = 1 - resid @ resid / ((y - y.mean()) @ (y - y.mean()))
        detail = f"log renorm slope {slope:.4f} per step, R^2 = {r2:.4f} (>= 0.95)"
        return r2 >= 0.95, detail, {"r": rs, "renorm": vals, "r2": r2}
    return _timed(7, "renorm decay trend", 300, run)


# 8 ------------------------------------------------------------------------------


def readout_correction(N=8, tau=2.0, r=10, rates=(0.02, 0.05), shots=100_000, cal_shots=1_000_000,
                       n_twirls=50, seed=8) -> Check:
    def run():
        circ = quench_circuit(N, tau, r)
        truth = sv.kink_moments(sv.final_state(circ), (1,))[0]
        noise = NoiseModel(readout_flip=rates)
        conf = mitigation.calibrate_readout(N, cal_shots, noise, seed, n_twirls=n_twirls)
        raw = mitigation.run_twirled(circ, noise, shots, n_twirls, seed + 1, readout=True)
        cs = mitigation.mitigate_cumulants(raw, N, conf, twirled=True)
        unc = estimate_cumulants(raw, N)
        z = abs(cs.kappa1 - truth) / cs.stderr1
        detail = (f"corrected k1 {cs.kappa1:.5f} vs {truth:.5f}, {z:.2f} sigma (<= 3); "
                  f"uncorrected off {abs(unc.kappa1 - truth) / unc.stderr1:.1f} sigma")
        return z <= 3, detail, {"z": z}
    return _timed(8, "readout correction", 120, run)


# 9 ------------------------------------------------------------------------------


def maxent_roundtrip(N150=150, taus=(1.0, 2.0, 5.0, 10.0), r=300, shots=10_000, seed=9) -> Check:
    def run():
        k = np.arange(20)
        p = binom.pmf(k, 19, 0.3)
        target = [p @ (k / 20) ** m for m in (1, 2, 3)]
        sol = maxent_pmf(target, 20)
        resid = float(np.max(np.abs(sol.moments() - target)))
        k1s, k2s = [], []
        for i, tau in enumerate(taus):
            st = mps.run_circuit(quench_circuit(N150, tau, r), 1e-10)
            cs = estimate_cumulants(mps.sample(st, shots, "X", seed + i), N150)
            m1 = cs.kappa1
            moments = (m1, cs.kappa2 + m1**2, cs.kappa3 + 3 * m1 * cs.kappa2 + m1**3)
            c = maxent_pmf(moments, N150).cumulants()
            k1s.append(c[0])
            k2s.append(c[1])
        dec = all(a > b for a, b in zip(k1s, k1s[1:])) and all(a > b for a, b in zip(k2s, k2s[1:]))
        ok = resid <= 1e-6 and dec
        detail = (f"binomial moment residual {resid:.1e} (<= 1e-6); N={N150} k1 "
                  + ", ".join(f"{x:.4f}" for x in k1s) + "; k2 " + ", ".join(f"{x:.2e}" for x in k2s)
                  + f"; strictly decreasing={dec}")
        return ok, detail, {"residual": resid, "k1": k1s, "k2": k2s}
    return _timed(9, "maxent roundtrip", 60 + 1200, run)


# 10 -----------------------------------------------------------------------------


def bayes_coverage(N=4, tau=2.0, r=20, experiments=200, shots=2000, replicas=200, seed=10,
                   stress_N: int | None = 10, stress_experiments=40) -> Check:
    """Synthetic truth: the exact X-basis distribution of a small quench, whose
    support is fully observed at this shot count. The optional stress case
    (many strings seen once) is printed but not gated."""

    def coverage(n, experiments, base):
        st = sv.final_state(quench_circuit(n, tau, r))
        truth = sv.kink_moments(st, (1,))[0]
        hits = 0
        for e in range(experiments):
            b = sv.sample(st, shots, "X", base + e)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lo, hi = bayesian_intervals(b, None, PosteriorConfig(n_replicas=replicas), seed=base + 7919 * e).interval(1)
            hits += lo <= truth <= hi
        return hits / experiments

    def run():
        cov = coverage(N, experiments, seed * 100_000)
        detail = f"coverage {cov:.3f} over {experiments} experiments at N={N} (>= 0.90)"
        vals = {"coverage": cov}
        if stress_N:
            sc = coverage(stress_N, stress_experiments, seed * 100_000 + 50_000)
            vals["stress"] = sc
            detail += f"; ungated N={stress_N} coverage {sc:.2f}"
        return cov >= 0.90, detail, vals
    return _timed(10, "Bayesian coverage", 300, run)


CHECKS = {
    1: plateau,
    2: finite_size_rate,
    3: thermodynamic_trend,
    4: backend_equivalence,
    5: trotter_order,
    6: global_depolarizing,
    7: renorm_decay,
    8: readout_correction,
    9: maxent_roundtrip,
    10: bayes_coverage,
}


def run_all(selected=None, long: bool = False, echo=print) -> list[Check]:
    out = []
    for n, fn in CHECKS.items():
        if selected and n not in selected:
            continue
        chk = fn(long=True) if (long and n == 3) else fn()
        echo(chk.line())
        out.append(chk)
    return out

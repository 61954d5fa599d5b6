"""Config-driven quench sweeps written as newline-delimited JSON.

The first line of a result file is the run manifest (the only place holding
timestamps and library versions); each further line is one sweep point.
Records are serialized with sorted keys, so a rerun with the same config and
seed reproduces them byte for byte.
"""

from __future__ import annotations

import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, mitigation, mps, statevector
from .analysis.bayes import PosteriorConfig, bayesian_intervals
from .analysis.estimators import estimate_cumulants
from .analysis.fitting import SweepPoint
from .config import ExperimentConfig
from .errors import KinkStatsError
from .model import CumulantSet, cumulants_from_moments
from .trotter import build_reference_circuit, quench_circuit

SCHEMA_VERSION = 1


def point_seed(seed: int, index: int) -> int:
    """Per-point seed, independent of worker scheduling."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _exact_cumulants(state, backend: str) -> CumulantSet:
    if backend == "statevector":
        return cumulants_from_moments(*statevector.kink_moments(state))
    N = state.n_qubits
    # mean only; higher moments would need the full expansion
    k1 = float((N - 1 - mps.bond_correlators(state).sum()) / (2 * N))
    return CumulantSet(k1, float("nan"), float("nan"))


def _noiseless_batch(cfg: ExperimentConfig, circuit, seed: int):
    if cfg.backend == "mps":
        st = mps.run_circuit(circuit, cfg.trunc_tol, cfg.max_bond or None)
        extra = {"max_bond_dim": st.max_bond_dim, "discarded_weight": st.cumulative_discarded}
        return mps.sample(st, cfg.shots, "X", seed), st, extra
    st = statevector.final_state(circuit)
    return statevector.sample(st, cfg.shots, "X", seed), st, {}


def run_point(cfg: ExperimentConfig, index: int) -> dict:
    """Execute one sweep point; numerical and resource failures are recorded, not raised."""
    tau, r = cfg.sweep[index]
    seed = point_seed(cfg.seed, index)
    rec = {
        "type": "point",
        "schema": SCHEMA_VERSION,
        "index": index,
        "N": cfg.N,
        "tau_Q": tau,
        "r": r,
        "backend": cfg.backend,
        "shots": cfg.shots,
        "provenance": {"config_hash": cfg.hash, "seed": cfg.seed, "point_seed": seed},
    }
    try:
        res = _execute(cfg, tau, r, seed)
        rec["provenance"]["circuit_hash"] = res.pop("circuit_hash")
        rec.update(res)
        rec["status"] = "ok"
    except (KinkStatsError, MemoryError, ArithmeticError) as exc:
        rec["status"] = "error"
        rec["error"] = {"type": type(exc).__name__, "message": str(exc)}
    return rec


def _execute(cfg: ExperimentConfig, tau: float, r: int, seed: int) -> dict:
    circuit = quench_circuit(cfg.N, tau, r)
    seq = np.random.SeedSequence(seed)
    s_run, s_cal, s_ref, s_bayes = (int(s.generate_state(1, np.uint64)[0]) for s in seq.spawn(4))
    m = cfg.mitigation
    out: dict = {"circuit_hash": circuit.hash}
    extra: dict = {}
    exact = None
    if cfg.noise.is_noiseless and not m.twirl:
        batch, state, extra = _noiseless_batch(cfg, circuit, s_run)
        if cfg.exact_moments:
            exact = _exact_cumulants(state, cfg.backend)
    else:
        n_tw = m.n_twirls if m.twirl else 0
        batch = mitigation.run_twirled(circuit, cfg.noise, cfg.shots, n_tw, s_run, readout=m.twirl)
        if cfg.exact_moments:
            exact = _exact_cumulants(statevector.final_state(circuit), "statevector")

    report = None
    if m.active:
        twirled = m.twirl
        n_tw = m.n_twirls if twirled else 0
        confusion = None
        if m.readout:
            confusion = mitigation.calibrate_readout(cfg.N, m.calibration_shots, cfg.noise, s_cal, n_twirls=n_tw)
        renorm = mitigation.UNIT_RENORM
        if m.renorm:
            ref = build_reference_circuit(circuit, m.reference)
            renorm = mitigation.estimate_renorm(ref, cfg.noise, cfg.shots, n_tw, m.renorm_variant, confusion, s_ref)

        def estimator(b):
            return mitigation.mitigate_cumulants(b, cfg.N, confusion, renorm, twirled, m.weight_dependent)

        report = mitigation.mitigation_report(tau, r, renorm, n_tw, cfg.shots, confusion)
        report["reference_circuit"] = renorm.circuit_hash or None
    else:
        def estimator(b):
            return estimate_cumulants(b, cfg.N)

    cs = estimator(batch)
    if cfg.analysis.bayes:
        pc = PosteriorConfig(cfg.analysis.prior_pseudocount, cfg.analysis.n_replicas,
                             cfg.analysis.resample_size or None)
        bayesian_intervals(batch, estimator, pc, s_bayes).attach(cs)
    out["cumulants"] = cs.to_dict()
    out["mitigation"] = report
    if exact is not None:
        out["exact_cumulants"] = exact.to_dict()
    if extra:
        out["extra"] = extra
    return out


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "type": "manifest",
        "schema": SCHEMA_VERSION,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "n_points": len(cfg.sweep),
        "versions": {
            "kinkstats": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, allow_nan=True)


def run_sweep(cfg: ExperimentConfig, out: Optional[Path] = None, workers: int = 1) -> Path:
    """Run every point of ``cfg`` and write the result file; returns its path.

    Points run in a process pool when ``workers`` > 1 but are written by this
    process, in sweep order. Failed points are recorded with their error and
    the sweep carries on.
    """
    path = Path(out) if out is not None else cfg.output_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    idx = range(len(cfg.sweep))
    with path.open("w") as fh:
        fh.write(dumps_record(manifest(cfg)) + "\n")
        fh.flush()
        if workers > 1 and len(cfg.sweep) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                records = pool.map(run_point, [cfg] * len(idx), idx)
                for rec in records:
                    fh.write(dumps_record(rec) + "\n")
                    fh.flush()
        else:
            for i in idx:
                rec = run_point(cfg, i)
                fh.write(dumps_record(rec) + "\n")
                fh.flush()
    return path


def read_results(path) -> tuple[dict, list[dict]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")
    head = json.loads(lines[0])
    if head.get("type") != "manifest":
        raise ValueError(f"{path} does not start with a manifest")
    return head, [json.loads(ln) for ln in lines[1:]]


def _cumulant_set(d: dict, exact: bool = False) -> CumulantSet:
    k = [float("nan") if v is None else v for v in d["kappa"]]
    se = [0.0 if v is None else v for v in d.get("stderr", [0.0] * 3)]
    if exact:
        se = [0.0] * 3  # state-derived values carry no sampling error
    return CumulantSet(*k, *se)


def sweep_points(records, source: str = "sampled") -> list[SweepPoint]:
    """Successful records as :class:`SweepPoint`; ``source='exact'`` uses the
    state-derived moments when present."""
    key = "exact_cumulants" if source == "exact" else "cumulants"
    pts = []
    for rec in records:
        if rec.get("status") != "ok" or key not in rec:
            continue
        pts.append(SweepPoint(rec["tau_Q"], rec["r"], _cumulant_set(rec[key], source == "exact"), rec["shots"], rec["backend"],
                              rec.get("mitigation"), rec.get("extra", {})))
    return pts


__all__ = ["run_sweep", "run_point", "read_results", "sweep_points", "manifest", "point_seed", "SCHEMA_VERSION"]

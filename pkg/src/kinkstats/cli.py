"""Command-line entry point: ``kinkstats <subcommand> ...``.

Exit codes: 0 success, 2 configuration or usage error, 3 resource error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .errors import ConfigError, KinkStatsError, ResourceError

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NUMERICAL = 0, 2, 3, 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_quench(args) -> int:
    from .sweep import read_results, run_sweep

    cfg = config_mod.load(args.config)
    cfg = cfg.with_overrides(seed=args.seed, backend=args.backend)
    path = run_sweep(cfg, args.out, workers=args.workers)
    _, recs = read_results(path)
    failed = [r for r in recs if r.get("status") != "ok"]
    print(f"{path}: {len(recs) - len(failed)} ok, {len(failed)} failed")
    for r in failed:
        print(f"  point {r['index']} (tau_Q={r['tau_Q']}, r={r['r']}): {r['error']['type']}: {r['error']['message']}",
              file=sys.stderr)
    if any(r["error"]["type"] == "ResourceError" for r in failed):
        return EXIT_RESOURCE
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_fit(args) -> int:
    from .analysis.fitting import fit_decay
    from .sweep import read_results, sweep_points

    out = []
    for p in args.results:
        head, recs = read_results(p)
        N = head["config"]["N"]
        pts = sweep_points(recs, args.source)
        window = tuple(args.window) if args.window else None
        for m in args.cumulant:
            fit = fit_decay(pts, m, N, window_override=window, weighted=args.weighted)
            out.append({"file": str(p), "N": N, **fit.to_dict()})
    _emit(out if len(out) > 1 else out[0], args.out)
    return EXIT_OK


def cmd_maxent(args) -> int:
    from .analysis.maxent import maxent_pmf
    from .sweep import read_results

    head, recs = read_results(args.results)
    N = head["config"]["N"]
    out = []
    for rec in recs:
        if rec.get("status") != "ok" or (args.index is not None and rec["index"] not in args.index):
            continue
        k1, k2, k3 = rec["cumulants"]["kappa"]
        moments = (k1, k2 + k1 * k1, k3 + 3 * k1 * k2 + k1**3)
        sol = maxent_pmf(moments, N)
        out.append({"index": rec["index"], "tau_Q": rec["tau_Q"], **sol.to_dict()})
    _emit(out, args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .mitigation import calibrate_readout
    from .statevector import NoiseModel

    noise = NoiseModel(readout_flip=(args.p01, args.p10))
    conf = calibrate_readout(args.N, args.shots, noise, args.seed or 0, n_twirls=args.twirls)
    rep = {"N": args.N, "shots_per_state": args.shots, "n_twirls": args.twirls, "injected": [args.p01, args.p10],
           **conf.summary()}
    _emit(rep, args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from . import oracle
    from . import statevector as sv
    from .model import QuenchSchedule, cumulants_from_moments
    from .trotter import quench_circuit

    if args.N > 12:
        raise ConfigError("the dense oracle is limited to N <= 12")
    out = []
    for tau in args.tau:
        exact = oracle.exact_kink_moments(QuenchSchedule(tau), args.N)
        row = {"N": args.N, "tau_Q": tau, "ode_moments": exact,
               "ode_cumulants": list(cumulants_from_moments(*exact).kappas)}
        if args.r:
            c = quench_circuit(args.N, tau, args.r)
            tm = sv.kink_moments(sv.final_state(c))
            row.update({"r": args.r, "trotter_moments": tm,
                        "trotter_error": float(np.max(np.abs(np.subtract(tm, exact))))})
        out.append(row)
    _emit(out, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_all

    checks = run_all(set(args.only) if args.only else None, long=args.long)
    n_ok = sum(c.passed for c in checks)
    print(f"{n_ok}/{len(checks)} criteria passed")
    return EXIT_OK if n_ok == len(checks) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinkstats", description="Kink statistics of Trotterized Ising quenches.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="TOML experiment config")
        p.add_argument("--seed", type=_u64, help="override the config seed")
        p.add_argument("--out", help="output path")
        p.add_argument("--workers", type=int, default=1, help="parallel sweep points")
        p.add_argument("--backend", choices=("statevector", "mps"), help="override the config backend")

    p = sub.add_parser("quench", help="run a configured sweep")
    common(p, config_required=True)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("fit", help="power-law fit of a result file")
    common(p)
    p.add_argument("results", nargs="+")
    p.add_argument("--cumulant", type=int, nargs="+", default=[1], choices=(1, 2, 3))
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--source", choices=("sampled", "exact"), default="sampled")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("maxent", help="max-entropy PMFs from a result file")
    common(p)
    p.add_argument("results")
    p.add_argument("--index", type=int, nargs="+")
    p.set_defaults(func=cmd_maxent)

    p = sub.add_parser("calibrate", help="readout calibration report")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--shots", type=int, default=2000)
    p.add_argument("--p01", type=float, default=0.0)
    p.add_argument("--p10", type=float, default=0.0)
    p.add_argument("--twirls", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("oracle", help="dense ODE reference values")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--tau", type=float, nargs="+", required=True)
    p.add_argument("--r", type=int, help="also report the Trotter circuit with r steps")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run the acceptance checks")
    common(p)
    p.add_argument("--long", action="store_true", help="10^5 shots and ungated k2/k3 fits for the MPS trend")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (KinkStatsError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

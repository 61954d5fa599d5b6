"""Experiment configuration files.

A config is a TOML document with the sections below; every key is optional
except ``experiment.N`` and a sweep definition.

    [experiment]
    N = 19
    backend = "statevector"        # or "mps"
    shots = 2000
    seed = 7
    output = "runs/fig2.jsonl"
    trunc_tol = 1e-10              # mps only
    max_bond = 0                   # 0 = unbounded
    exact_moments = false          # also store noiseless moments from the state

    [sweep]
    tau_Q = [0.1, 0.5, 1.0, 2.0]
    r = [1, 2, 3, 4]               # explicit pairs, or one of:
    # r_rule = "index"             # r = k + 1 for the k-th point
    # r_rule = "ceil"              # r = ceil(r_scale * tau_Q)
    # r_rule = "fixed"             # r = r_fixed
    r_scale = 1.0
    r_fixed = 100

    [noise]
    two_qubit_depol = 0.0
    global_depol = 0.0
    readout_flip = [0.0, 0.0]      # (p01, p10)

    [mitigation]
    twirl = false
    n_twirls = 50
    readout = false                # calibrate and correct readout
    calibration_shots = 2000
    renorm = false
    reference = "zero_field"       # or "pi_field"
    renorm_variant = "mean_kink"   # or "max_bond"
    weight_dependent = false

    [analysis]
    bayes = true
    n_replicas = 500
    prior_pseudocount = 1.0
    resample_size = 0              # 0 = observed shot count

The only environment override is ``KINKSTATS_OUTPUT_DIR``, which relocates a
relative ``experiment.output``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .statevector import NoiseModel

MAX_STATEVECTOR_N = 24
OUTPUT_DIR_ENV = "KINKSTATS_OUTPUT_DIR"


@dataclass(frozen=True)
class MitigationConfig:
    twirl: bool = False
    n_twirls: int = 50
    readout: bool = False
    calibration_shots: int = 2000
    renorm: bool = False
    reference: str = "zero_field"
    renorm_variant: str = "mean_kink"
    weight_dependent: bool = False

    @property
    def active(self) -> bool:
        return self.twirl or self.readout or self.renorm


@dataclass(frozen=True)
class AnalysisConfig:
    bayes: bool = True
    n_replicas: int = 500
    prior_pseudocount: float = 1.0
    resample_size: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    sweep: tuple  # ((tau_Q, r), ...)
    backend: str = "statevector"
    shots: int = 2000
    seed: int = 0
    output: str = "results.jsonl"
    trunc_tol: float = 1e-10
    max_bond: int = 0
    exact_moments: bool = False
    noise: NoiseModel = field(default_factory=NoiseModel)
    mitigation: MitigationConfig = field(default_factory=MitigationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = [list(p) for p in self.sweep]
        d["noise"] = self.noise.to_dict()
        return d

    @property
    def hash(self) -> str:
        # output location is not part of the experiment's identity
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def output_path(self) -> Path:
        p = Path(self.output)
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base and not p.is_absolute():
            p = Path(base) / p
        return p


def validate(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.N, int) or cfg.N < 2:
        raise ConfigError(f"N must be an integer >= 2, got {cfg.N!r}")
    if cfg.backend not in ("statevector", "mps"):
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    if cfg.backend == "statevector" and cfg.N > MAX_STATEVECTOR_N:
        raise ConfigError(f"statevector backend limited to N <= {MAX_STATEVECTOR_N}")
    if cfg.backend == "mps" and not cfg.noise.is_noiseless:
        raise ConfigError("noisy runs need the statevector backend")
    if cfg.shots < 1:
        raise ConfigError("shots must be positive")
    for tau, r in cfg.sweep:
        if not (isinstance(tau, (int, float)) and tau > 0 and math.isfinite(tau)):
            raise ConfigError(f"sweep tau_Q must be positive, got {tau!r}")
        if not isinstance(r, int) or r < 1:
            raise ConfigError(f"Trotter steps must be a positive integer, got {r!r}")
    m = cfg.mitigation
    if m.reference not in ("zero_field", "pi_field"):
        raise ConfigError(f"unknown reference circuit {m.reference!r}")
    if m.renorm_variant not in ("mean_kink", "max_bond"):
        raise ConfigError(f"unknown renorm variant {m.renorm_variant!r}")
    if m.twirl and m.n_twirls < 1:
        raise ConfigError("twirling needs n_twirls >= 1")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")


def sweep_pairs(tau_Q, r=None, r_rule=None, r_scale=1.0, r_fixed=None) -> tuple:
    taus = [float(t) for t in tau_Q]
    if r is not None:
        if r_rule is not None:
            raise ConfigError("give either explicit r values or r_rule, not both")
        if len(r) != len(taus):
            raise ConfigError("sweep.r and sweep.tau_Q differ in length")
        return tuple(zip(taus, [int(x) for x in r]))
    rule = r_rule or "index"
    if rule == "index":
        rs = list(range(1, len(taus) + 1))
    elif rule == "ceil":
        if not r_scale > 0:
            raise ConfigError("r_scale must be positive")
        rs = [max(1, math.ceil(r_scale * t)) for t in taus]
    elif rule == "fixed":
        if r_fixed is None:
            raise ConfigError("r_rule = 'fixed' needs r_fixed")
        rs = [int(r_fixed)] * len(taus)
    else:
        raise ConfigError(f"unknown r_rule {rule!r}")
    return tuple(zip(taus, rs))


def _section(doc: dict, name: str, known: set) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return sec


def from_dict(doc: dict) -> ExperimentConfig:
    unknown = set(doc) - {"experiment", "sweep", "noise", "mitigation", "analysis"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    exp = _section(doc, "experiment", {"N", "backend", "shots", "seed", "output", "trunc_tol", "max_bond",
                                       "exact_moments"})
    sw = _section(doc, "sweep", {"tau_Q", "r", "r_rule", "r_scale", "r_fixed"})
    nz = _section(doc, "noise", {"two_qubit_depol", "global_depol", "readout_flip"})
    mit = _section(doc, "mitigation", set(MitigationConfig.__dataclass_fields__))
    an = _section(doc, "analysis", set(AnalysisConfig.__dataclass_fields__))
    if "N" not in exp:
        raise ConfigError("experiment.N is required")
    try:
        noise = NoiseModel(
            float(nz.get("two_qubit_depol", 0.0)),
            float(nz.get("global_depol", 0.0)),
            tuple(float(x) for x in nz.get("readout_flip", (0.0, 0.0))),
        )
        sweep = sweep_pairs(sw.get("tau_Q", []), sw.get("r"), sw.get("r_rule"), sw.get("r_scale", 1.0),
                            sw.get("r_fixed"))
        return ExperimentConfig(
            N=exp["N"],
            sweep=sweep,
            noise=noise,
            mitigation=MitigationConfig(**mit),
            analysis=AnalysisConfig(**an),
            **{k: v for k, v in exp.items() if k != "N"},
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def loads(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)

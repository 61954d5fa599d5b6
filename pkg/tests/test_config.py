import pytest

from kinkstats import config
from kinkstats.errors import ConfigError

BASE = """
[experiment]
N = 6
shots = 500
seed = 3

[sweep]
tau_Q = [0.5, 1.0, 2.0]
"""


def test_defaults_and_index_rule():
    cfg = config.loads(BASE)
    assert cfg.sweep == ((0.5, 1), (1.0, 2), (2.0, 3))
    assert cfg.backend == "statevector" and cfg.noise.is_noiseless
    assert not cfg.mitigation.active and cfg.analysis.bayes


@pytest.mark.parametrize("extra, expected", [
    ('r_rule = "ceil"\nr_scale = 3.0', (2, 3, 6)),
    ('r_rule = "fixed"\nr_fixed = 7', (7, 7, 7)),
    ("r = [4, 5, 6]", (4, 5, 6)),
])
def test_r_rules(extra, expected):
    cfg = config.loads(BASE + extra)
    assert tuple(r for _, r in cfg.sweep) == expected


@pytest.mark.parametrize("text", [
    BASE + "r = [1]",
    BASE + 'r_rule = "bogus"',
    BASE + 'r_rule = "fixed"',
    BASE + "r = [1, 2, 3]\nr_rule = \"index\"",
    BASE.replace("N = 6", "N = 30"),
    BASE.replace("seed = 3", "seed = -1"),
    BASE.replace("[0.5, 1.0, 2.0]", "[0.5, -1.0]"),
    BASE + "\n[noise]\nglobal_depol = 0.1\n[experiment2]\n",
    BASE + "\n[mitigation]\nreference = \"half_field\"\n",
    BASE + "\n[mitigation]\nrenorm_variant = \"median\"\n",
    BASE + "\n[analysis]\nreplicas = 3\n",
    "[sweep]\ntau_Q = [1.0]\n",
    "[experiment\nN = 3",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        config.loads(text)


def test_mps_rejects_noise():
    with pytest.raises(ConfigError):
        config.loads(BASE.replace("N = 6", 'N = 6\nbackend = "mps"') + "\n[noise]\ntwo_qubit_depol = 0.01\n")


def test_hash_ignores_output_and_tracks_seed(tmp_path, monkeypatch):
    a = config.loads(BASE)
    b = a.with_overrides(output="elsewhere.jsonl")
    assert a.hash == b.hash
    assert a.with_overrides(seed=4).hash != a.hash
    assert a.with_overrides(seed=None) is a
    monkeypatch.setenv(config.OUTPUT_DIR_ENV, str(tmp_path))
    assert b.output_path() == tmp_path / "elsewhere.jsonl"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "nope.toml")


def test_noise_and_mitigation_sections():
    cfg = config.loads(BASE + """
[noise]
two_qubit_depol = 0.01
readout_flip = [0.02, 0.05]

[mitigation]
twirl = true
n_twirls = 10
readout = true
renorm = true
reference = "pi_field"
""")
    assert cfg.noise.readout_flip == (0.02, 0.05)
    assert cfg.mitigation.active and cfg.mitigation.reference == "pi_field"
    assert cfg.to_dict()["noise"]["two_qubit_depol"] == 0.01

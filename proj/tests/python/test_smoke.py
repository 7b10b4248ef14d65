import json
import math

import pytest

import mdc


def test_random_distribution_is_a_valid_cdf():
    arch = mdc.JdanArch(2, n_components=3, n_blocks=1, width=4, location=[0.5, 0.5], scale=[0.2, 0.2])
    d = mdc.Distribution.random(arch, seed=3)
    assert d.dims == 2
    assert math.isclose(sum(d.mixture_weights), 1.0)
    lo, hi = d.joint_cdf([0.3, 0.4]), d.joint_cdf([0.6, 0.7])
    assert 0.0 <= lo <= hi <= 1.0
    assert d.joint_density([0.5, 0.5]) >= 0.0
    assert math.isclose(d.joint_cdf([math.inf, math.inf]), 1.0, abs_tol=1e-12)


def test_params_round_trip_and_quantile():
    arch = mdc.JdanArch(2, n_components=2, n_blocks=1, width=3)
    d = mdc.Distribution.random(arch, seed=1)
    again = mdc.Distribution(arch, d.params)
    assert again.joint_cdf([0.1, -0.2]) == d.joint_cdf([0.1, -0.2])
    q = d.quantile(0, [0.0, 0.3], 0.25)
    assert math.isclose(d.conditional_cdf(0, [q, 0.3]), 0.25, abs_tol=1e-7)


def test_omega_matches_sampling():
    arch = mdc.JdanArch(3, n_components=2, n_blocks=1, width=4, location=[0.5] * 3, scale=[0.2] * 3)
    d = mdc.Distribution.random(arch, seed=5)
    gamma = [0.7, 0.65, 0.6]
    om = d.omega(gamma)
    draws = d.sample(20000, seed=2)
    inside = sum(all(x >= 1 - g for x, g in zip(row, gamma)) for row in draws) / len(draws)
    assert abs(om - inside) < 4.5 * math.sqrt(om * (1 - om) / len(draws)) + 1e-9


def test_paper_literal_needs_one_component():
    with pytest.raises(mdc.ConfigError):
        mdc.JdanArch(2, n_components=2, coupling="paper-literal")


def test_copula_uniform_margin():
    assert math.isclose(mdc.copula_cdf([0.3, 1.0], "frank", 1.5), 0.3, rel_tol=1e-12)


def test_cli_round_trip(tmp_path):
    cfg = {
        "seed": 3,
        "output_dir": str(tmp_path / "run"),
        "data": {"synth": {"n_gates": 2}, "length": 300, "delta_minutes": 30},
        "arch": {"nfn_blocks": 1, "nfn_width": 4, "jdan_blocks": 1, "jdan_width": 3, "components": 2},
        "train": {"max_epochs": 1},
        "thresholds": [0.7, 0.65],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    for command in ("generate", "train", "index"):
        code, out, err = mdc.run(command, str(path))
        assert code == 0, err
    index = json.loads((tmp_path / "run" / "index.json").read_text())
    assert 0.0 <= index["omega"] <= 1.0
    ck = mdc.Checkpoint.load(str(tmp_path / "run" / "checkpoint.json"))
    assert json.loads(ck.run_config)["seed"] == 3
    window = [[0.0] * (2 + 2)] * 2
    assert ck.distribution(window).dims == 2
    with pytest.raises(mdc.ConfigError):
        mdc.run("forecast", str(tmp_path / "missing.json"))


def test_unknown_config_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(mdc.ConfigError):
        mdc.run("generate", str(path))


def test_synth_margins_shape():
    m = mdc.synth_margins(2, 50, seed=1)
    assert len(m) == 100
    assert all(math.isfinite(v) for v in m)

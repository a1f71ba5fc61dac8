import math

import pytest

import rholab

BUMP = {"kind": "gaussian_bump", "center": 1, "width": 1, "amplitude": 1}
COARSE = {"x_min": -6, "x_max": 6, "nx": 301}


def test_pde_matches_monte_carlo():
    v = rholab.pde_value(BUMP, grid={"nx": 1201})
    est, se = rholab.log_mean_exp({"kind": "terminal_value", "f": BUMP}, n=1, steps=1, paths=200000, seed=5)
    assert abs(v - est) <= 3 * se + 2e-3


def test_hopf_lax_against_grid_search():
    hl = rholab.hopf_lax(BUMP, y_step=1e-4)
    best = max(math.exp(-((y - 1) ** 2)) - y * y / 2 for y in (i * 1e-4 - 6 for i in range(120001)))
    assert abs(hl - best) <= 1e-12


def test_sweep_gaps_shrink():
    rep = rholab.vanishing_viscosity_sweep(BUMP, n_list=[1, 4, 16], grid=COARSE, y_step=1e-4)
    gaps = [r["gap"] for r in rep["rows"]]
    assert gaps[0] > gaps[1] > gaps[2]


def test_action_closed_forms():
    assert rholab.action([0, 1], [0, 1.3]) == pytest.approx(0.5 * 1.3 ** 2, rel=1e-14)
    assert math.isinf(rholab.action([0, 1], [0, 2], {"variant": "indicator", "K": 1}))


def test_schilder_maximizer():
    F = {"kind": "running_max", "transform": {"kind": "clipped_linear", "slope": 1, "hi": 1}}
    res = rholab.maximize_schilder(F, knots=16, restarts=2, seed=1)
    assert res["value"] == pytest.approx(0.5, abs=1e-3)
    assert len(res["times"]) == len(res["values"])


def test_generators():
    clauses = rholab.check_ti({"variant": "power_law", "r": 1.5})
    assert all(c["pass"] for c in clauses)
    assert rholab.growth_exponent({"variant": "power_law", "r": 1.5}) == pytest.approx(1.5, abs=1e-2)
    assert rholab.eval_g({"variant": "quadratic", "c": 2}, 3.0) == pytest.approx(9.0)
    with pytest.raises(rholab.ValidationError):
        rholab.eval_g({"variant": "power_law", "r": 0.5}, 1.0)
    with pytest.raises(ValueError):
        rholab.growth_exponent({"variant": "nope"})


def test_bridge_constant_closed_form():
    r = 1.5
    a = r / 2
    closed = 2 ** (r - 1) * 2 ** a * math.gamma((r + 1) / 2) / math.sqrt(math.pi) * (math.pi * a / math.sin(math.pi * a))
    assert rholab.bridge_constant(r) == pytest.approx(closed, rel=1e-10)


def test_sanov_telescoping():
    F = {"phi": {"kind": "tanh"}, "Phi": "identity"}
    grid = {"x": {"x_min": -5, "x_max": 5, "nx": 121}, "s_per_stage": 16}
    values = [rholab.iterate_L(F, n, grid=grid) for n in (1, 2, 4)]
    assert max(values) - min(values) <= 1e-10


def test_transport():
    mu = {"support": [0, 2], "weights": [0.5, 0.5]}
    nu = {"support": [1, 3], "weights": [0.5, 0.5]}
    assert rholab.ot_oracle(mu, nu, {"variant": "power_law", "r": 1.5}) == pytest.approx(1.0)
    rep = rholab.small_noise_sweep({"support": [0], "weights": [1]}, {"support": [1], "weights": [1]}, [0.01],
                                   mollified=False)
    assert rep["rows"][0]["aux"]["feasible"] is False


def test_run_and_compare(tmp_path):
    cfg = {"kind": "mc-estimate", "functional": {"kind": "terminal_value", "f": BUMP}, "paths": 5000, "steps": 4,
           "n_list": [1, 2], "oracle_grid": {"nx": 241}}
    missing = rholab.run(cfg, tmp_path / "a")
    assert missing["exit_code"] == 2 and "seed" in missing["message"]
    a = rholab.run(cfg, tmp_path / "a", seed=3)
    b = rholab.run(cfg, tmp_path / "b", seed=3)
    assert a["exit_code"] == 0
    assert a["report_csv"] == b["report_csv"]
    assert a["manifest"]["config_hash"] == rholab.config_hash(dict(cfg, seed=3))
    diff = rholab.compare(tmp_path / "a" / "mc-estimate.csv", tmp_path / "b" / "mc-estimate.csv")
    assert diff["exit_code"] == 0
    assert rholab.resolve_config(dict(cfg, seed=1))["oracle"] is True

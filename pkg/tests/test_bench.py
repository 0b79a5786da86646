import json
import math

import numpy as np
import pytest

from geoest import cli
from geoest.bench import (
    CompletionConfig,
    ExperimentConfig,
    compute_widths,
    evaluate_bounds,
    gen_signal,
    resolve_threads,
    run_completion_experiment,
    run_experiment,
    run_trial,
    trials_csv_text,
    validate_config,
)
from geoest.errors import ConfigError, ContractError
from geoest.types import (
    EuclideanBall,
    FullSpace,
    GaussianNoise,
    Identity,
    L1Ball,
    LowRankCone,
    ModelParams,
    ObservationModel,
    Sign,
    SparseCone,
    contains,
)


def _sparse_sign_config(**overrides):
    base = dict(
        n=30,
        feasible_set=SparseCone(30, 3),
        model=ObservationModel(Sign()),
        norm_x=1.0,
        m_grid=(40, 80),
        trials=10,
        master_seed=77,
        metrics=("linear_error", "projected_error", "direction_error", "scaled_error"),
        width_samples=100,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_run_trial_deterministic():
    config = _sparse_sign_config()
    a = run_trial(config, 40, 3)
    b = run_trial(config, 40, 3)
    assert a == b
    assert set(a) == {
        "linear_error",
        "linear_error_sq",
        "projected_error",
        "direction_error",
        "scaled_error",
    }
    with pytest.raises(ConfigError):
        run_trial(config, 41, 0)


def test_full_space_projected_equals_linear():
    config = _sparse_sign_config(
        feasible_set=FullSpace(30), model=ObservationModel(Identity()),
        metrics=("linear_error", "projected_error"),
    )
    for trial in range(5):
        row = run_trial(config, 80, trial)
        assert row["projected_error"] == row["linear_error"]


def test_doubling_trials_reproduces_prefix():
    short = run_experiment(_sparse_sign_config(trials=6), threads=1)
    long = run_experiment(_sparse_sign_config(trials=12), threads=1)
    for key, vals in short.trial_values.items():
        assert long.trial_values[key][: len(vals)] == vals


def test_single_trial_has_no_stderr():
    result = run_experiment(_sparse_sign_config(trials=1, m_grid=(40,)), threads=1)
    agg = result.per_m[0]["metrics"]["linear_error"]
    assert agg["stderr"] is None
    assert agg["n"] == 1
    assert result.fits == {}  # a one-point grid has no slope either


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(m_grid=()))
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(metrics=("nope",)))
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(norm_x=0.0))
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(n=31))
    # fixed signal must match norm_x and satisfy the feasibility convention
    bad_norm = tuple(np.ones(30))
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(fixed_signal=bad_norm))
    dense = tuple(np.ones(30) / math.sqrt(30))
    with pytest.raises(ConfigError):
        validate_config(_sparse_sign_config(fixed_signal=dense))
    ok = np.zeros(30)
    ok[:3] = [0.6, 0.8, 0.0]
    validate_config(_sparse_sign_config(fixed_signal=tuple(ok)))


class _EvenSquare:
    def terms(self):
        return {2: 1.0}, 0.0


def test_degenerate_mu_rejected():
    config = _sparse_sign_config(model=ObservationModel(_EvenSquare()))
    with pytest.raises(ConfigError):
        validate_config(config)


def test_l1_ball_feasibility_guard():
    config = _sparse_sign_config(
        feasible_set=L1Ball(30, 0.05), model=ObservationModel(Identity()),
        metrics=("projected_error",),
    )
    with pytest.raises(ConfigError):
        validate_config(config)


@pytest.mark.parametrize(
    "fs,mu",
    [
        (SparseCone(40, 4), 0.8),
        (LowRankCone(8, 5, 2), 0.8),
        (L1Ball(40, 1.5), 1.0),
        (EuclideanBall(12, 2.0), 1.0),
        (FullSpace(9), 0.5),
    ],
)
def test_gen_signal_feasible(fs, mu):
    for seed in range(30):
        x = gen_signal(fs, 1.0, mu, seed)
        assert np.linalg.norm(x) == pytest.approx(1.0)
        assert contains(fs, mu * x, 1e-9)


def test_evaluate_bounds_zero_noise_collapses_to_grid_min():
    config = _sparse_sign_config(t_grid=(0.25, 0.5, 1.0))
    params = ModelParams(mu=1.0, sigma=0.0, eta=0.0)
    widths = {"t_grid": [0.25, 0.5, 1.0], "w_t": [1.0, 2.0, 4.0], "w1": 4.0}
    bounds = evaluate_bounds(config, params, widths)
    for m in config.m_grid:
        assert bounds[m]["two_step"] == pytest.approx(0.25)
        assert bounds[m]["cone_simplified"] == 0.0


def test_evaluate_bounds_cone_grid_collapse():
    config = _sparse_sign_config()
    ctx = validate_config(config)
    widths = compute_widths(config)
    bounds = evaluate_bounds(config, ctx.params, widths)
    ratios = np.array(widths["w_t"]) / np.array(widths["t_grid"])
    t_min = widths["t_grid"][0]
    p = ctx.params
    for m in config.m_grid:
        lo = t_min + (2 / math.sqrt(m)) * (p.sigma + p.eta * ratios.min())
        hi = t_min + (2 / math.sqrt(m)) * (p.sigma + p.eta * ratios.max())
        assert lo - 1e-12 <= bounds[m]["two_step"] <= hi + 1e-12
        assert "binary_cone" in bounds[m]
        assert "binary_direction" in bounds[m]
        assert "whp_q95" in bounds[m]


def test_evaluate_bounds_requires_widths():
    config = _sparse_sign_config()
    params = ModelParams(mu=1.0, sigma=1.0, eta=1.0)
    with pytest.raises(ContractError):
        evaluate_bounds(config, params, {"t_grid": [], "w_t": []})


def test_bound_dominance_moderate_scale():
    config = _sparse_sign_config(
        n=100, feasible_set=SparseCone(100, 3), m_grid=(50, 100, 200), trials=150,
        metrics=("linear_error", "projected_error"), width_samples=300, master_seed=11,
    )
    result = run_experiment(config)
    for entry in result.per_m:
        agg = entry["metrics"]["projected_error"]
        slack = 4 * agg["stderr"]
        assert agg["mean"] <= entry["bounds"]["two_step"] + slack
        assert agg["mean"] <= entry["bounds"]["cone_simplified"] + slack
        assert agg["q95"] <= entry["bounds"]["whp_q95"]


def test_noisy_linear_bound_dominates():
    # the experiment itself is the oracle: the linear-model corollary bound
    # must sit above the observed projected error
    config = ExperimentConfig(
        n=50,
        feasible_set=SparseCone(50, 5),
        model=ObservationModel(Identity(), pre_noise=GaussianNoise(1.0)),
        norm_x=1.0,
        m_grid=(200,),
        trials=500,
        master_seed=13,
        metrics=("projected_error",),
        width_samples=300,
    )
    result = run_experiment(config)
    entry = result.per_m[0]
    agg = entry["metrics"]["projected_error"]
    assert agg["mean"] <= entry["bounds"]["noisy_linear"] + 4 * agg["stderr"]
    assert agg["mean"] <= entry["bounds"]["noisy_linear_cone"] + 4 * agg["stderr"]
    assert entry["bounds"]["noisy_linear"] >= entry["bounds"]["two_step"]


def test_config_json_round_trip():
    config = _sparse_sign_config()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again == config
    assert again.experiment_id == config.experiment_id


def test_csv_formatting():
    text = trials_csv_text("abc", {(10, "linear_error"): [0.1, 1.0 / 3.0]})
    lines = text.strip().split("\n")
    assert lines[0] == "experiment_id,m,trial,metric,value"
    assert lines[1] == "abc,10,0,linear_error,0.10000000000000001"
    assert lines[2] == "abc,10,1,linear_error,0.33333333333333331"


def test_resolve_threads_env_override(monkeypatch):
    monkeypatch.delenv("GEOEST_THREADS", raising=False)
    assert resolve_threads(3) == 3
    monkeypatch.setenv("GEOEST_THREADS", "5")
    assert resolve_threads(3) == 5
    monkeypatch.setenv("GEOEST_THREADS", "x")
    with pytest.raises(ConfigError):
        resolve_threads(3)


def test_completion_experiment_exact_at_full_sampling():
    cfg = CompletionConfig(
        d=25, r=2, p_grid=(1.0,), zeta=1.0, noise_nu=0.0, trials=3, master_seed=5
    )
    result = run_completion_experiment(cfg, threads=1)
    assert result["per_p"][0]["error"]["mean"] <= 1e-9
    assert result["per_p"][0]["m_ge_dlogd"]


def test_completion_warns_below_sampling_regime():
    cfg = CompletionConfig(
        d=40, r=1, p_grid=(0.05,), zeta=1.0, noise_nu=0.0, trials=2, master_seed=6
    )
    with pytest.warns(UserWarning):
        result = run_completion_experiment(cfg, threads=1)
    assert not result["per_p"][0]["m_ge_dlogd"]


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_params_sign(tmp_path, capsys):
    cfg = tmp_path / "params.json"
    cfg.write_text(json.dumps({"model": {"link": {"kind": "sign"}}, "norm_x": 1.0}))
    assert cli.main(["params", "--config", str(cfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mu"] == pytest.approx(0.7978845608, abs=1e-9)
    assert payload["method"] == "closed_form"
    assert payload["c_f"]["c_f"] == pytest.approx(8.2952, abs=1e-3)


def test_cli_malformed_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"model": ')
    assert cli.main(["params", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "bad.json:1:" in err  # line-anchored message


def test_cli_simulate_byte_identical(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("GEOEST_THREADS", raising=False)
    cfg = tmp_path / "sim.json"
    cfg.write_text(
        json.dumps(
            {
                "n": 12,
                "set": {"kind": "sparse", "n": 12, "s": 2},
                "model": {"link": {"kind": "sign"}},
                "norm_x": 1.0,
                "m_grid": [20, 40],
                "trials": 8,
                "master_seed": 3,
                "metrics": ["linear_error", "projected_error"],
                "width_samples": 100,
            }
        )
    )
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--threads", "2"]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    capsys.readouterr()
    a_json, a_csv = sorted((tmp_path / "a").iterdir())
    b_json, b_csv = sorted((tmp_path / "b").iterdir())
    assert a_json.read_bytes() == b_json.read_bytes()
    assert a_csv.read_bytes() == b_csv.read_bytes()
    payload = json.loads(a_json.read_text())
    assert payload["valid"] and payload["code_version"]
    assert payload["config"]["master_seed"] == 3  # provenance echo


def test_cli_matcomp_exact(tmp_path, capsys):
    cfg = tmp_path / "mc.json"
    cfg.write_text(
        json.dumps(
            {"d": 20, "r": 2, "p_grid": [1.0], "zeta": 1.0, "noise_nu": 0.0, "trials": 2, "master_seed": 4}
        )
    )
    assert cli.main(["matcomp", "--config", str(cfg), "--out", str(tmp_path / "mc")]) == 0
    capsys.readouterr()
    result = json.loads(next((tmp_path / "mc").glob("*.result.json")).read_text())
    assert result["per_p"][0]["error"]["mean"] <= 1e-9


def test_cli_width_and_lowerbound(tmp_path, capsys):
    wcfg = tmp_path / "w.json"
    wcfg.write_text(
        json.dumps({"set": {"kind": "l1_ball", "n": 50, "radius": 1.0}, "t": [1.0], "global": True, "samples": 100})
    )
    assert cli.main(["width", "--config", str(wcfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["estimates"]) == 2 and payload["formula_bound"] > 0

    lcfg = tmp_path / "l.json"
    lcfg.write_text(
        json.dumps({"set": {"kind": "sparse", "n": 20, "s": 2}, "nu": 1.0, "m": 50, "samples": 100, "n_candidates": 100})
    )
    assert cli.main(["lowerbound", "--config", str(lcfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["delta_upper"] > 0 and payload["delta_lower"] > 0
    assert payload["diam"] is None

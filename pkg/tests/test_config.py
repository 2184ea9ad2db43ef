"""Config parsing: fail-closed validation, lossless round-trips, presets."""

import json

import pytest

from predmod import (
    EXPERIMENTS,
    PRESETS,
    ExperimentConfig,
    ValidationError,
    from_dict,
    load_config,
    preset_config,
    to_dict,
    validate_config,
)


def test_empty_config_uses_defaults():
    cfg = from_dict({})
    assert cfg == ExperimentConfig()
    assert cfg.experiment == "decompose"
    assert cfg.seed == 20240801


def test_round_trip_is_lossless_for_defaults():
    cfg = from_dict({})
    assert from_dict(to_dict(cfg)) == cfg


def test_round_trip_is_lossless_for_a_full_config():
    raw = {
        "experiment": "optimal-shift",
        "seed": 7,
        "world": {
            "true_coeffs": [0.0, 1.0, 0.5],
            "noise_sd": 0.1,
            "noise_law": "uniform",
            "feature_law": {"kind": "gaussian", "mean": [0.0], "cov": [[2.0]]},
            "dose_response": {"kind": "tanh", "scale": 0.3, "noise_mult_slope": 0.2},
            "sensitivity_law": {"kind": "uniform", "low": 0.5, "high": 1.5},
        },
        "model": {"family": "polynomial", "degree": 3, "ridge": 1e-06},
        "policy": {
            "variant": "sequential_agent",
            "agent": {
                "action_grid": [-0.1, 0.0, 0.1],
                "horizon_steps": 30,
                "explore_steps": 6,
                "step_noise_sd": 0.02,
            },
        },
        "n_train": 123,
        "reps": 456,
        "probes": [0.2, [0.9]],
        "shift_grid": [-0.1, 0.0, 0.1],
        "n_showcase": 77,
        "horizon_steps": 30,
        "customer_effect": 0.05,
        "ab_replicates": 111,
        "figures": False,
    }
    cfg = from_dict(raw)
    assert from_dict(to_dict(cfg)) == cfg
    assert cfg.probes == ((0.2,), (0.9,))
    assert cfg.policy.agent.horizon_steps == 30


def test_unknown_keys_fail_closed_at_every_level():
    raw = {
        "experimnt": "decompose",
        "world": {"sigma": 0.1},
        "model": {"family": "linear", "kernel": "rbf"},
        "policy": {"variant": "idle", "agent": {"greed": 1}},
    }
    with pytest.raises(ValidationError) as exc:
        from_dict(raw)
    v = exc.value.violations
    assert "experimnt: unknown key" in v
    assert "world.sigma: unknown key" in v
    assert "model.kernel: unknown key" in v
    assert "policy.agent.greed: unknown key" in v


def test_all_violations_are_collected_with_dotted_paths():
    raw = {
        "experiment": "teleport",
        "world": {"noise_sd": -1},
        "policy": {"variant": "shrinkage", "lam": 1.5},
        "reps": 1,
    }
    with pytest.raises(ValidationError) as exc:
        from_dict(raw)
    v = exc.value.violations
    assert any(s.startswith("experiment:") for s in v)
    assert "world.noise_sd: must be >= 0.0, got -1" in v
    assert "policy.lam: must be in [0.0, 1.0], got 1.5" in v
    assert any(s.startswith("reps:") for s in v)
    assert len(v) == 4


def test_shift_grid_accepts_both_forms():
    listed = from_dict({"shift_grid": [-0.1, 0.0, 0.1]})
    assert listed.shift_grid == (-0.1, 0.0, 0.1)
    spanned = from_dict({"shift_grid": {"start": -0.1, "stop": 0.1, "num": 5}})
    assert spanned.shift_grid == (-0.1, -0.05, 0.0, 0.05, 0.1)
    with pytest.raises(ValidationError, match="shift_grid"):
        from_dict({"shift_grid": "fine"})
    with pytest.raises(ValidationError, match="stop"):
        from_dict({"shift_grid": {"start": 0.1, "stop": -0.1, "num": 5}})


def test_probes_must_match_world_dimension():
    raw = {
        "world": {"feature_law": {"kind": "uniform", "low": [0, 0], "high": [1, 1]}},
        "probes": [0.5],
    }
    with pytest.raises(ValidationError, match="probes"):
        from_dict(raw)
    raw["probes"] = [[0.5, 0.5]]
    cfg = from_dict(raw)
    assert cfg.probes == ((0.5, 0.5),)


def test_boolean_is_not_a_number():
    with pytest.raises(ValidationError, match="n_train"):
        from_dict({"n_train": True})


def test_presets_are_all_valid():
    for name in PRESETS:
        cfg = preset_config(name)
        assert cfg.experiment == name
        assert from_dict(to_dict(cfg)) == cfg
    assert set(PRESETS) == {"scenario1", "scenario2", "scenario3"}


def test_preset_pins():
    s1 = preset_config("scenario1")
    assert s1.spec.family == "polynomial" and s1.spec.degree == 2
    assert s1.n_train == 100_000
    s2 = preset_config("scenario2")
    assert s2.spec.family == "linear" and s2.n_train == 100_000
    assert (0.35,) in s2.probes and (0.95,) in s2.probes
    s3 = preset_config("scenario3")
    assert s3.spec.family == "linear" and s3.n_train == 30
    assert (0.5,) in s3.probes


def test_unknown_preset_lists_alternatives():
    with pytest.raises(ValidationError, match="scenario1, scenario2, scenario3"):
        preset_config("scenario9")


def test_experiment_catalog_is_fixed():
    assert EXPERIMENTS == (
        "decompose", "optimal-shift", "showcase", "generalization", "ab-test",
        "scenario1", "scenario2", "scenario3",
    )


def test_load_config_reports_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_config(p)
    assert validate_config(p)


def test_validate_config_round_trip_on_disk(tmp_path):
    p = tmp_path / "ok.json"
    p.write_text(json.dumps(to_dict(ExperimentConfig())), encoding="utf-8")
    assert validate_config(p) == []
    assert load_config(p) == ExperimentConfig()

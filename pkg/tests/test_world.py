"""Ground-truth worlds: sampling laws, outcome process, reproducibility."""

import math

import numpy as np
import pytest

from predmod import (
    ConfigurationError,
    DoseResponse,
    FeatureLaw,
    GroundTruth,
    InputError,
    SensitivityLaw,
    default_world,
    eval_true_f,
    realize_outcome,
    sample_population,
    stream,
    true_mean,
)


def test_default_world_is_unit_quadratic():
    w = default_world()
    assert eval_true_f(w, 0.5) == pytest.approx(0.25)
    assert eval_true_f(w, (0.9,)) == pytest.approx(0.81)
    assert w.noise_sd == 0.05
    assert w.dim == 1


def test_true_mean_additive_over_coordinates():
    w = GroundTruth(
        true_fn=(1.0, 2.0, 3.0),
        feature_law=FeatureLaw(low=(0.0, 0.0), high=(1.0, 1.0)),
    )
    # f(x) = 1 + 2(x1 + x2) + 3(x1^2 + x2^2)
    got = true_mean(w, np.array([[0.5, 1.0]]))[0]
    assert got == pytest.approx(1 + 2 * 1.5 + 3 * (0.25 + 1.0))


def test_eval_true_f_rejects_batches():
    with pytest.raises(InputError):
        eval_true_f(default_world(), np.zeros((2, 1)))


def test_dimension_mismatch_is_an_error():
    with pytest.raises(InputError, match="dimension mismatch"):
        true_mean(default_world(), np.zeros((3, 2)))


def test_uniform_features_stay_in_box():
    law = FeatureLaw(low=(-1.0, 2.0), high=(1.0, 3.0))
    draws = law.draw(500, stream(0, "box"))
    assert draws.shape == (500, 2)
    assert draws[:, 0].min() >= -1.0 and draws[:, 0].max() <= 1.0
    assert draws[:, 1].min() >= 2.0 and draws[:, 1].max() <= 3.0


def test_gaussian_feature_law_validates_cov():
    with pytest.raises(ConfigurationError):
        FeatureLaw(kind="gaussian", mean=(0.0, 0.0), cov=((1.0, 2.0), (2.0, 1.0)))
    ok = FeatureLaw(kind="gaussian", mean=(0.0, 0.0), cov=((1.0, 0.5), (0.5, 1.0)))
    assert ok.dim == 2


def test_uniform_noise_law_matches_requested_sd():
    w = default_world(noise_law="uniform", noise_sd=0.2)
    eps = w.noise(200_000, stream(3, "eps"))
    assert abs(eps.mean()) < 0.002
    assert eps.std() == pytest.approx(0.2, rel=0.01)
    assert np.abs(eps).max() <= 0.2 * math.sqrt(3.0)


def test_zero_noise_world_is_deterministic():
    w = default_world(noise_sd=0.0)
    assert realize_outcome(w, 0.5, seed=1) == pytest.approx(0.25)


def test_sample_population_reproducible_and_labeled():
    w = default_world()
    a = sample_population(w, 50, seed=9)
    b = sample_population(w, 50, seed=9)
    c = sample_population(w, 50, seed=10)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)
    assert a.n == 50
    assert a.seed_manifest == ((9, "features"), (9, "noise"))


def test_outcomes_center_on_f():
    w = default_world()
    s = sample_population(w, 100_000, seed=2)
    resid = s.y - true_mean(w, s.X)
    assert abs(resid.mean()) < 0.001
    assert resid.std() == pytest.approx(0.05, rel=0.02)


def test_dose_response_shift_and_noise_mult():
    lin = DoseResponse()
    assert lin.shift(0.2, 1.5) == pytest.approx(0.3)
    assert lin.noise_mult(0.7) == 1.0
    sat = DoseResponse(kind="tanh", scale=0.2, noise_mult_slope=0.5)
    assert sat.shift(10.0, 1.0) == pytest.approx(0.2, abs=1e-9)  # saturates at scale
    assert sat.shift(0.0, 1.0) == 0.0
    assert sat.noise_mult(-0.2) == pytest.approx(1.1)
    assert sat.noise_mult(0.0) == 1.0


def test_sensitivity_law_mean_and_support():
    point = SensitivityLaw()
    assert point.mean() == 1.0
    assert np.all(point.draw(5, stream(0, "u")) == 1.0)
    unif = SensitivityLaw(kind="uniform", low=0.5, high=1.5)
    u = unif.draw(10_000, stream(0, "u"))
    assert unif.mean() == 1.0
    assert u.min() >= 0.5 and u.max() <= 1.5
    assert u.mean() == pytest.approx(1.0, abs=0.02)


def test_world_validation_errors():
    with pytest.raises(ConfigurationError):
        GroundTruth(noise_sd=-0.1)
    with pytest.raises(ConfigurationError):
        GroundTruth(true_fn=())
    with pytest.raises(ConfigurationError):
        GroundTruth(noise_law="poisson")
    with pytest.raises(ConfigurationError):
        DoseResponse(kind="cubic")
    with pytest.raises(ConfigurationError):
        SensitivityLaw(kind="uniform", low=2.0, high=1.0)
    with pytest.raises(ConfigurationError):
        FeatureLaw(low=(0.0,), high=(0.0,))

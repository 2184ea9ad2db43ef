"""Model training and the retraining-based bias/variance estimates."""

import numpy as np
import pytest

from predmod import (
    ConfigurationError,
    GroundTruth,
    InputError,
    ModelSpec,
    TrainingError,
    default_world,
    estimate_bias_variance,
    predict,
    predict_batch,
    prediction_samples,
    sample_population,
    train,
)
from predmod.models import _FHAT_CACHE

# Projection of f(x) = x^2 onto linear functions over U[0, 1]: x - 1/6.
# That makes f - E[fhat] at a probe x equal to x^2 - x + 1/6.
def projected_bias(x: float) -> float:
    return x * x - x + 1.0 / 6.0


def test_spec_validation():
    with pytest.raises(ConfigurationError, match="model.family"):
        ModelSpec(family="forest")
    with pytest.raises(ConfigurationError):
        ModelSpec(family="polynomial", degree=0)
    with pytest.raises(ConfigurationError):
        ModelSpec(family="knn", k=0)
    with pytest.raises(ConfigurationError):
        ModelSpec(ridge=-1.0)


def test_polynomial_recovers_exact_coefficients():
    w = default_world(noise_sd=0.0)
    model = train(ModelSpec(family="polynomial", degree=2), sample_population(w, 200, seed=0))
    for x in (0.0, 0.3, 0.77, 1.0):
        assert predict(model, np.array([x])) == pytest.approx(x * x, abs=1e-9)


def test_linear_fit_matches_projection_oracle():
    w = default_world()
    model = train(ModelSpec(), sample_population(w, 400_000, seed=1))
    assert predict(model, np.array([0.0])) == pytest.approx(-1.0 / 6.0, abs=0.002)
    assert predict(model, np.array([1.0])) == pytest.approx(5.0 / 6.0, abs=0.002)


def test_predict_batch_matches_pointwise():
    w = default_world()
    model = train(ModelSpec(family="polynomial", degree=2), sample_population(w, 500, seed=3))
    X = np.linspace(0, 1, 7).reshape(-1, 1)
    batch = predict_batch(model, X)
    single = [predict(model, row) for row in X]
    assert np.allclose(batch, single)


def test_knn_memorizes_training_users():
    w = default_world()
    s = sample_population(w, 50, seed=4)
    model = train(ModelSpec(family="knn", k=1), s)
    for i in (0, 7, 49):
        assert predict(model, s.X[i]) == pytest.approx(s.y[i])


def test_knn_tie_breaks_toward_lower_id():
    w = default_world()
    s = sample_population(w, 3, seed=0)
    object.__setattr__(s, "X", np.array([[0.4], [0.6], [0.5]]))
    object.__setattr__(s, "y", np.array([1.0, 2.0, 3.0]))
    model = train(ModelSpec(family="knn", k=1), s)
    assert predict(model, np.array([0.5])) == pytest.approx(3.0)
    assert predict(model, np.array([0.6])) == pytest.approx(2.0)
    # 0.45 is equidistant from users 0 and 2; the lower id wins
    assert predict(model, np.array([0.45])) == pytest.approx(1.0)


def test_rank_deficient_design_needs_ridge():
    w = GroundTruth(true_fn=(0.0, 1.0), noise_sd=0.0)
    s = sample_population(w, 30, seed=5)
    object.__setattr__(s, "X", np.full_like(s.X, 0.4))  # one repeated feature value
    object.__setattr__(s, "y", np.full(30, 0.4))
    with pytest.raises(TrainingError, match="rank deficient"):
        train(ModelSpec(family="polynomial", degree=3), s)
    ridged = train(ModelSpec(family="polynomial", degree=3, ridge=1e-6), s)
    assert np.isfinite(predict(ridged, np.array([0.4])))


def test_knn_requires_enough_training_users():
    w = default_world()
    s = sample_population(w, 3, seed=6)
    with pytest.raises(TrainingError):
        train(ModelSpec(family="knn", k=5), s)


def test_prediction_samples_deterministic_and_prefix_stable():
    w = default_world()
    spec = ModelSpec()
    long = prediction_samples(w, spec, 100, (0.5,), 50, seed=77)
    _FHAT_CACHE.clear()
    short = prediction_samples(w, spec, 100, (0.5,), 20, seed=77)
    assert np.array_equal(long[:20], short)
    again = prediction_samples(w, spec, 100, (0.5,), 50, seed=77)
    assert np.array_equal(long, again)


def test_prediction_samples_worker_count_is_invisible():
    w = default_world()
    spec = ModelSpec()
    _FHAT_CACHE.clear()
    serial = prediction_samples(w, spec, 80, (0.5,), 24, seed=13, workers=1)
    _FHAT_CACHE.clear()
    parallel = prediction_samples(w, spec, 80, (0.5,), 24, seed=13, workers=3)
    assert np.array_equal(serial, parallel)


def test_bias_variance_against_projection_oracle():
    w = default_world()
    est = estimate_bias_variance(ModelSpec(), w, 2000, (0.5,), 3000, seed=21)
    assert est.true_value == pytest.approx(0.25)
    assert est.bias == pytest.approx(projected_bias(0.5), abs=4 * est.bias_se)
    assert est.bias == pytest.approx(-1.0 / 12.0, abs=0.005)
    assert est.variance > 0
    # zero-bias roots of the projection: (1 +/- 1/sqrt(3)) / 2
    root = (1 + 1 / np.sqrt(3)) / 2
    est_root = estimate_bias_variance(ModelSpec(), w, 2000, (root,), 3000, seed=21)
    assert est_root.bias == pytest.approx(0.0, abs=4 * est_root.bias_se + 1e-4)


def test_bias_sign_pattern_across_probes():
    w = default_world()
    lo = estimate_bias_variance(ModelSpec(), w, 1500, (0.35,), 2000, seed=22)
    hi = estimate_bias_variance(ModelSpec(), w, 1500, (0.95,), 2000, seed=22)
    assert lo.bias < 0 < hi.bias
    assert lo.bias == pytest.approx(projected_bias(0.35), abs=0.01)
    assert hi.bias == pytest.approx(projected_bias(0.95), abs=0.01)

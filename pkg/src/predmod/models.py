"""Predictive models: least-squares polynomial fits and a k-nearest-mean memorizer.

The model families deliberately include misspecified ones; the interesting
regimes come from fitting a line to a curved world. Bias here is reported as

    bias(x) = f(x) - E[f_hat(x)]

i.e. positive when the model under-predicts on average. This is the sign that
makes the decomposition's (CATE + bias)^2 term match direct measurement and
makes the optimal constant shift equal -bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import ConfigurationError, InputError, TrainingError
from .parallel import map_indices
from .streams import as_path
from .world import GroundTruth, PopulationSample, eval_true_f, sample_population

FAMILIES = ("linear", "polynomial", "knn")


@dataclass(frozen=True)
class ModelSpec:
    """Model family and hyperparameters.

    family: "linear" (affine least squares), "polynomial" (per-coordinate powers
    up to `degree`, additive across coordinates), or "knn" (mean outcome of the
    k nearest users, ties broken toward lower user id).
    ridge: optional L2 penalty on all coefficients. Default 0; it exists solely
    to handle rank deficiency in tiny samples (the penalized solution tends to
    the smallest-norm least-squares solution as ridge -> 0).
    """

    family: str = "linear"
    degree: int = 1
    k: int = 5
    ridge: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"model.family: unknown family {self.family!r}")
        if self.family == "polynomial" and self.degree < 1:
            raise ConfigurationError("model.degree: must be >= 1")
        if self.family == "knn" and self.k < 1:
            raise ConfigurationError("model.k: must be >= 1")
        if self.ridge < 0:
            raise ConfigurationError("model.ridge: must be >= 0")

    @property
    def effective_degree(self) -> int:
        return 1 if self.family == "linear" else self.degree


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted model: polynomial coefficients, or the memorized sample for knn."""

    spec: ModelSpec
    dim: int
    coeffs: tuple[float, ...] | None = None
    memory_X: np.ndarray | None = None
    memory_y: np.ndarray | None = None
    memory_ids: np.ndarray | None = None
    n_train: int = 0


def _design(X: np.ndarray, degree: int) -> np.ndarray:
    cols = [np.ones(X.shape[0])]
    for k in range(1, degree + 1):
        for j in range(X.shape[1]):
            cols.append(X[:, j] ** k)
    return np.column_stack(cols)


def train(spec: ModelSpec, sample: PopulationSample) -> TrainedModel:
    """Fit the spec on a sample. Deterministic: same sample, same parameters."""
    X, y = sample.X, sample.y
    n, p = X.shape
    if spec.family == "knn":
        if n < spec.k:
            raise TrainingError(f"knn needs at least k={spec.k} samples, got {n}")
        return TrainedModel(
            spec=spec, dim=p,
            memory_X=X.copy(), memory_y=y.copy(), memory_ids=sample.ids.copy(),
            n_train=n,
        )
    degree = spec.effective_degree
    n_params = 1 + p * degree
    if n < n_params:
        raise TrainingError(f"need at least {n_params} samples for {n_params} coefficients, got {n}")
    phi = _design(X, degree)
    gram = phi.T @ phi
    if spec.ridge == 0.0:
        rank = int(np.linalg.matrix_rank(gram))
        if rank < n_params:
            raise TrainingError(
                f"design matrix is rank deficient (rank {rank} < {n_params} parameters) "
                "and ridge is 0; set ridge > 0 to select the smallest-norm solution"
            )
        beta = np.linalg.solve(gram, phi.T @ y)
    else:
        beta = np.linalg.solve(gram + spec.ridge * np.eye(n_params), phi.T @ y)
    if not np.all(np.isfinite(beta)):
        raise TrainingError("fit produced non-finite coefficients")
    return TrainedModel(spec=spec, dim=p, coeffs=tuple(float(b) for b in beta), n_train=n)


def _point(model: TrainedModel, x) -> np.ndarray:
    pt = np.asarray(x, dtype=float)
    if pt.ndim == 0:
        pt = pt.reshape(1)
    if pt.ndim != 1 or pt.size != model.dim:
        raise InputError(f"dimension mismatch: point has {pt.size} features, model expects {model.dim}")
    return pt


def predict(model: TrainedModel, x) -> float:
    """Prediction at a single point (scalar or length-p vector)."""
    return float(predict_batch(model, _point(model, x).reshape(1, -1))[0])


def predict_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Predictions over rows of X (n, p)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise InputError(f"dimension mismatch: X must be (n, {model.dim})")
    if model.spec.family != "knn":
        return _design(X, model.spec.effective_degree) @ np.asarray(model.coeffs)
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        d = np.sqrt(((model.memory_X - row) ** 2).sum(axis=1))
        order = np.lexsort((model.memory_ids, d))
        out[i] = model.memory_y[order[: model.spec.k]].mean()
    return out


@dataclass(frozen=True)
class BiasVarianceEstimate:
    """Monte Carlo bias/variance of f_hat(x) over fresh training samples."""

    x: tuple[float, ...]
    true_value: float
    mean_prediction: float
    bias: float          # f(x) - mean_prediction
    bias_se: float
    variance: float      # ddof=1 across retrainings
    variance_se: float
    reps: int


def _fhat_at(truth: GroundTruth, spec: ModelSpec, n_train: int, x_t: tuple, seed_path: tuple, rep: int) -> float:
    sample = sample_population(truth, n_train, seed=seed_path + (rep, "train"))
    return predict(train(spec, sample), np.asarray(x_t))


# Most recently computed prediction-sample arrays, keyed by everything but reps.
# Replication r's value never depends on the total rep count, so a longer run's
# prefix serves a shorter one.
_FHAT_CACHE: dict = {}
_FHAT_CACHE_MAX = 8


def prediction_samples(
    truth: GroundTruth, spec: ModelSpec, n_train: int, x, reps: int,
    seed: int | tuple, workers: int = 1,
) -> np.ndarray:
    """f_hat_r(x) for r = 0..reps-1, each from its own keyed training sample."""
    if reps < 2:
        raise InputError("reps: must be >= 2")
    if n_train < 1:
        raise InputError("n_train: must be >= 1")
    x_t = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
    key = (truth, spec, n_train, x_t, as_path(seed))
    cached = _FHAT_CACHE.get(key)
    if cached is not None and cached.size >= reps:
        return cached[:reps].copy()
    fn = partial(_fhat_at, truth, spec, n_train, x_t, as_path(seed))
    values = np.asarray(map_indices(fn, reps, workers=workers))
    if len(_FHAT_CACHE) >= _FHAT_CACHE_MAX:
        _FHAT_CACHE.pop(next(iter(_FHAT_CACHE)))
    _FHAT_CACHE[key] = values
    return values.copy()


def estimate_bias_variance(
    spec: ModelSpec, truth: GroundTruth, n_train: int, x, reps: int,
    seed: int | tuple, workers: int = 1,
) -> BiasVarianceEstimate:
    """Retrain `reps` times on fresh samples and summarize f_hat(x).

    Per-replication seed streams make the result independent of scheduling;
    the same (seed, rep) pair always yields the same training sample.
    """
    fhat = prediction_samples(truth, spec, n_train, x, reps, seed, workers=workers)
    x_t = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
    f = eval_true_f(truth, np.asarray(x_t))
    mean_pred = float(fhat.mean())
    var = float(fhat.var(ddof=1))
    se_mean = float(fhat.std(ddof=1) / math.sqrt(reps))
    centered = fhat - mean_pred
    m4 = float((centered**4).mean())
    var_of_var = max(m4 - (reps - 3) / (reps - 1) * var**2, 0.0) / reps
    return BiasVarianceEstimate(
        x=x_t, true_value=f, mean_prediction=mean_pred,
        bias=f - mean_pred, bias_se=se_mean,
        variance=var, variance_se=math.sqrt(var_of_var),
        reps=reps,
    )

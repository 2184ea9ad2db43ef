"""Ground-truth worlds: feature laws, outcome noise, dose-response, sensitivity.

A world fixes the natural outcome process y = f(x) + eps and everything an
intervention needs: how an intervention level b shifts the outcome mean for a
user of sensitivity u (the dose-response), how it rescales the noise (the
multiplier m(b), with m(0) = 1), and how sensitivities are distributed.

The default world is the one every headline number in the docs refers to:
x ~ Uniform[0, 1], f(x) = x^2, sigma = 0.05, linear dose-response with unit
sensitivity and m(b) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .streams import as_path, stream


@dataclass(frozen=True)
class FeatureLaw:
    """Sampling law for feature vectors: uniform over a box or Gaussian."""

    kind: str = "uniform"
    low: tuple[float, ...] = (0.0,)
    high: tuple[float, ...] = (1.0,)
    mean: tuple[float, ...] = (0.0,)
    cov: tuple[tuple[float, ...], ...] = ((1.0,),)

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ConfigurationError(f"feature_law.kind: unknown kind {self.kind!r}")
        if self.kind == "uniform":
            if len(self.low) != len(self.high) or not self.low:
                raise ConfigurationError("feature_law: low and high must be same nonempty length")
            if any(h <= l for l, h in zip(self.low, self.high)):
                raise ConfigurationError("feature_law: each high must exceed its low")
        else:
            p = len(self.mean)
            cov = np.asarray(self.cov, dtype=float)
            if cov.shape != (p, p):
                raise ConfigurationError("feature_law: cov must be square and match mean length")
            if not np.allclose(cov, cov.T):
                raise ConfigurationError("feature_law: cov must be symmetric")
            if np.any(np.diag(cov) < 0):
                raise ConfigurationError("feature_law: negative variance on cov diagonal")
            eigmin = float(np.linalg.eigvalsh(cov).min())
            if eigmin < -1e-12:
                raise ConfigurationError("feature_law: cov must be positive semidefinite")

    @property
    def dim(self) -> int:
        return len(self.low) if self.kind == "uniform" else len(self.mean)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=(n, self.dim))
        return rng.multivariate_normal(self.mean, np.asarray(self.cov), size=n, method="cholesky")


@dataclass(frozen=True)
class DoseResponse:
    """Mean shift of the outcome per intervention level b and sensitivity u.

    linear: shift = u * b.
    tanh:   shift = u * scale * tanh(b / scale), a saturating curve that stresses
            agents which assume linearity.
    The noise multiplier is m(b) = 1 + noise_mult_slope * |b| (so m(0) = 1).
    """

    kind: str = "linear"
    scale: float = 0.2
    noise_mult_slope: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "tanh"):
            raise ConfigurationError(f"dose_response.kind: unknown kind {self.kind!r}")
        if self.kind == "tanh" and self.scale <= 0:
            raise ConfigurationError("dose_response.scale: must be positive")
        if self.noise_mult_slope < 0:
            raise ConfigurationError("dose_response.noise_mult_slope: must be >= 0")

    def shift(self, level, sensitivity):
        b = np.asarray(level, dtype=float)
        u = np.asarray(sensitivity, dtype=float)
        if self.kind == "linear":
            out = u * b
        else:
            out = u * self.scale * np.tanh(b / self.scale)
        return out if out.ndim else float(out)

    def noise_mult(self, level):
        b = np.asarray(level, dtype=float)
        out = 1.0 + self.noise_mult_slope * np.abs(b)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SensitivityLaw:
    """Per-user sensitivity u: point mass (default) or uniform over [low, high]."""

    kind: str = "point"
    value: float = 1.0
    low: float = 0.5
    high: float = 1.5

    def __post_init__(self):
        if self.kind not in ("point", "uniform"):
            raise ConfigurationError(f"sensitivity_law.kind: unknown kind {self.kind!r}")
        if self.kind == "uniform" and self.high <= self.low:
            raise ConfigurationError("sensitivity_law: high must exceed low")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "point":
            return np.full(n, self.value)
        return rng.uniform(self.low, self.high, size=n)

    def mean(self) -> float:
        return self.value if self.kind == "point" else 0.5 * (self.low + self.high)


@dataclass(frozen=True)
class GroundTruth:
    """World definition: f as polynomial coefficients, noise, and intervention laws.

    true_fn holds coefficients (c0, c1, ..., cd); for a scalar feature
    f(x) = sum_k ck x^k, and for p-dimensional features the polynomial is applied
    additively, f(x) = c0 + sum_j sum_{k>=1} ck x_j^k.
    """

    true_fn: tuple[float, ...] = (0.0, 0.0, 1.0)
    noise_sd: float = 0.05
    noise_law: str = "gaussian"
    feature_law: FeatureLaw = field(default_factory=FeatureLaw)
    dose_response: DoseResponse = field(default_factory=DoseResponse)
    sensitivity_law: SensitivityLaw = field(default_factory=SensitivityLaw)

    def __post_init__(self):
        if not self.true_fn:
            raise ConfigurationError("true_fn: needs at least one coefficient")
        if not all(math.isfinite(c) for c in self.true_fn):
            raise ConfigurationError("true_fn: coefficients must be finite")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd: must be >= 0")
        if self.noise_law not in ("gaussian", "uniform"):
            raise ConfigurationError(f"noise_law: unknown law {self.noise_law!r}")

    @property
    def dim(self) -> int:
        return self.feature_law.dim

    def noise(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Mean-zero noise with standard deviation noise_sd under either law."""
        if self.noise_law == "gaussian":
            return rng.normal(0.0, self.noise_sd, size=n) if self.noise_sd > 0 else np.zeros(n)
        half = self.noise_sd * math.sqrt(3.0)
        return rng.uniform(-half, half, size=n)


def default_world(**overrides) -> GroundTruth:
    """The canonical world: x ~ U[0,1], f(x) = x^2, sigma = 0.05."""
    return GroundTruth(**overrides)


@dataclass(frozen=True, eq=False)
class PopulationSample:
    """Users with ids, features X (n, p), natural outcomes y, and the streams used."""

    ids: np.ndarray
    X: np.ndarray
    y: np.ndarray
    seed_manifest: tuple[tuple, ...]

    @property
    def n(self) -> int:
        return int(self.ids.size)


def _as_matrix(truth: GroundTruth, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1)
    elif X.ndim != 2:
        raise InputError(f"feature input must be scalar, 1-d, or 2-d; got ndim={X.ndim}")
    if X.shape[1] != truth.dim:
        raise InputError(
            f"dimension mismatch: x has {X.shape[1]} features, world expects {truth.dim}"
        )
    return X


def true_mean(truth: GroundTruth, x) -> np.ndarray:
    """Vectorized f over rows of x (see eval_true_f for the one-point form)."""
    X = _as_matrix(truth, x)
    c = np.asarray(truth.true_fn, dtype=float)
    out = np.full(X.shape[0], c[0])
    for k in range(1, c.size):
        if c[k] != 0.0:
            out = out + c[k] * (X**k).sum(axis=1)
    return out


def eval_true_f(truth: GroundTruth, x) -> float:
    """Evaluate f at a single point (scalar or length-p vector)."""
    X = np.asarray(x, dtype=float)
    if X.ndim > 1:
        raise InputError("eval_true_f takes one point; use true_mean for batches")
    return float(true_mean(truth, X)[0])


def sample_population(truth: GroundTruth, n: int, seed: int | tuple) -> PopulationSample:
    """Draw n users: ids 0..n-1, features from the feature law, y = f(X) + eps."""
    if n < 1:
        raise InputError("n: must be >= 1")
    path = as_path(seed)
    feat_path = path + ("features",)
    noise_path = path + ("noise",)
    X = truth.feature_law.draw(n, stream(*feat_path))
    y = true_mean(truth, X) + truth.noise(n, stream(*noise_path))
    return PopulationSample(
        ids=np.arange(n), X=X, y=y, seed_manifest=(feat_path, noise_path)
    )


def realize_outcome(truth: GroundTruth, x, seed: int | tuple) -> float:
    """One natural outcome y = f(x) + eps at a point x.

    x is expected to lie in the support of the feature law (documented, not
    enforced; f extrapolates as a polynomial).
    """
    mu = eval_true_f(truth, x)
    eps = truth.noise(1, stream(*as_path(seed), "outcome"))[0]
    return float(mu + eps)

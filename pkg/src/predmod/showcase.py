"""End-to-end showcase: train, fix predictions, modify behavior, grade the match.

run_showcase plays the full pipeline for a cohort of users and reports how well
realized (modified) outcomes match the fixed predictions. compare_generalization
contrasts that in-showcase MSE with the same model's MSE on fresh unmodified
users: a policy can make a model look far better than it generalizes.
run_ab_test embeds the pipeline in a two-group experiment and checks that an
orthogonal behavior-modification layer does not distort the test statistic.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import ConfigurationError, InputError
from .models import ModelSpec, predict_batch, train
from .policies import (
    AgentConfig,
    InterventionPolicy,
    ModifiedWorld,
    Trajectory,
    compute_intervention,
    realize_modified_outcome,
    run_sequential_agent,
)
from .stats import ks_critical_value, ks_statistic, welch_t
from .streams import as_path, stream
from .world import GroundTruth, eval_true_f, sample_population, true_mean


@dataclass(frozen=True)
class ShowcaseConfig:
    """Everything one showcase run needs; hashable and reproducible from the seed."""

    truth: GroundTruth = field(default_factory=GroundTruth)
    spec: ModelSpec = field(default_factory=ModelSpec)
    policy: InterventionPolicy = field(default_factory=InterventionPolicy)
    n_train: int = 10_000
    n_showcase: int = 2_000
    horizon_steps: int = 50
    seed: int = 0
    customer_effect: float = 0.0
    ab_replicates: int = 2_000

    def __post_init__(self):
        if self.n_train < 1:
            raise ConfigurationError("n_train: must be >= 1")
        if self.n_showcase < 1:
            raise ConfigurationError("n_showcase: must be >= 1")
        if self.horizon_steps < 1:
            raise ConfigurationError("horizon_steps: must be >= 1")
        if self.ab_replicates < 2:
            raise ConfigurationError("ab_replicates: must be >= 2")
        if not math.isfinite(self.customer_effect):
            raise ConfigurationError("customer_effect: must be finite")


def config_digest(config: ShowcaseConfig) -> str:
    """Stable content hash of a config (repr of frozen dataclasses is canonical)."""
    return hashlib.sha256(repr(config).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class UserRecord:
    user: int
    x: tuple[float, ...]
    y_hat: float
    y_nat: float
    y_mod: float
    error: float
    trajectory: Trajectory | None


@dataclass(frozen=True, eq=False)
class ShowcaseResult:
    """Per-user records plus the headline MSE between outcomes and predictions."""

    records: tuple[UserRecord, ...]
    mse: float
    config_sha256: str
    seed: int

    @property
    def n(self) -> int:
        return len(self.records)


def _effective_agent(config: ShowcaseConfig) -> AgentConfig:
    # the showcase horizon is authoritative for agent trajectories
    return dataclasses.replace(config.policy.agent, horizon_steps=config.horizon_steps)


def run_showcase(config: ShowcaseConfig) -> ShowcaseResult:
    """Train once, fix per-user predictions, apply the policy, realize outcomes.

    The oracle policy's bias context is the single-model estimate
    f(x_i) - f_hat(x_i) (exact as Var(f_hat) -> 0). The showcase MSE equals
    mean(error^2) over the records to machine precision by construction.
    """
    truth, policy = config.truth, config.policy
    seed = config.seed
    model = train(config.spec, sample_population(truth, config.n_train, seed=(seed, "train")))
    cohort = sample_population(truth, config.n_showcase, seed=(seed, "showcase"))
    world = ModifiedWorld(truth)
    y_hat = predict_batch(model, cohort.X)
    records = []
    for i in range(cohort.n):
        x_i = cohort.X[i]
        traj = None
        if policy.variant == "sequential_agent":
            traj = run_sequential_agent(
                _effective_agent(config), world, float(y_hat[i]), x_i,
                seed=(seed, "agent", i), user=i,
            )
            y_mod = traj.final_outcome
        else:
            bias_est = eval_true_f(truth, x_i) - float(y_hat[i])
            intervention = compute_intervention(
                policy, float(y_hat[i]), x_i, float(cohort.y[i]),
                bias_estimate=bias_est, seed=(seed, "policy", i),
                dose_response=truth.dose_response,
            )
            y_mod = realize_modified_outcome(
                world, intervention, x_i, float(y_hat[i]), seed=(seed, "outcome", i), user=i
            )
        records.append(UserRecord(
            user=i, x=tuple(x_i.tolist()), y_hat=float(y_hat[i]), y_nat=float(cohort.y[i]),
            y_mod=float(y_mod), error=float(y_mod - y_hat[i]), trajectory=traj,
        ))
    errors = np.array([r.error for r in records])
    return ShowcaseResult(
        records=tuple(records), mse=float((errors**2).mean()),
        config_sha256=config_digest(config), seed=seed,
    )


@dataclass(frozen=True)
class GeneralizationReport:
    """Fresh-user MSE vs in-showcase MSE for the same trained model."""

    mse_showcase: float
    mse_fresh: float
    ratio: float
    n: int


def compare_generalization(config: ShowcaseConfig) -> GeneralizationReport:
    """Ratio of fresh unmodified MSE to showcase MSE (> 1 means the showcase flatters).

    An Idle policy is the natural control and gives a ratio near 1.
    """
    result = run_showcase(config)
    model = train(config.spec, sample_population(config.truth, config.n_train, seed=(config.seed, "train")))
    fresh = sample_population(config.truth, config.n_showcase, seed=(config.seed, "fresh"))
    resid = fresh.y - predict_batch(model, fresh.X)
    mse_fresh = float((resid**2).mean())
    ratio = math.inf if result.mse == 0 else mse_fresh / result.mse
    return GeneralizationReport(
        mse_showcase=result.mse, mse_fresh=mse_fresh, ratio=ratio, n=config.n_showcase
    )


@dataclass(frozen=True, eq=False)
class ABTestReport:
    """Two-group comparison replicated under BMOD-on and BMOD-off.

    Headline fields describe replicate 0 of the BMOD-on arm; the arrays hold
    the replicate distributions of the Welch t statistic and difference in
    means for both arms.
    """

    n: int
    replicates: int
    customer_effect: float
    group_a: tuple[int, ...]
    group_b: tuple[int, ...]
    mean_a: float
    mean_b: float
    diff: float
    t_stat: float
    dof: float
    p_value: float
    t_on: np.ndarray
    t_off: np.ndarray
    diff_on: np.ndarray
    diff_off: np.ndarray
    rejection_rate_on: float
    rejection_rate_off: float
    alpha: float
    ks_stat: float
    ks_critical: float
    ks_alpha: float


def _modified_outcomes_vector(
    truth: GroundTruth, policy: InterventionPolicy, y_hat: np.ndarray, X: np.ndarray,
    f_x: np.ndarray, base: np.ndarray, seed_path: tuple, horizon: int,
) -> np.ndarray:
    """Vectorized modified outcomes for a user block (agent falls back to a loop)."""
    n = y_hat.size
    if policy.variant == "idle":
        return f_x + base
    if policy.variant == "shrinkage":
        lam = policy.lam
        return (1 - lam) * f_x + lam * y_hat + (1 - lam) * base
    dr = truth.dose_response
    u = truth.sensitivity_law.draw(n, stream(*seed_path, "sensitivity"))
    if policy.variant == "sequential_agent":
        world = ModifiedWorld(truth)
        agent = dataclasses.replace(policy.agent, horizon_steps=horizon)
        out = np.empty(n)
        for i in range(n):
            traj = run_sequential_agent(
                agent, world, float(y_hat[i]), X[i], seed=seed_path + ("agent", i), user=i
            )
            out[i] = traj.final_outcome
        return out
    if policy.variant == "constant_shift":
        levels = np.full(n, policy.delta)
    else:  # oracle_counter_bias on per-user single-model bias estimates
        targets = -(f_x - y_hat)
        if policy.grid is None:
            if dr.kind == "linear":
                levels = targets.copy()
            else:
                if np.any(np.abs(targets) >= dr.scale):
                    raise InputError("dose target outside the saturating response range")
                levels = dr.scale * np.arctanh(targets / dr.scale)
        else:
            grid = np.asarray(policy.grid)
            shifts = dr.shift(grid, 1.0)
            levels = grid[np.argmin(np.abs(shifts[None, :] - targets[:, None]), axis=1)]
    if policy.policy_noise_sd > 0:
        levels = levels + stream(*seed_path, "policy-noise").normal(0, policy.policy_noise_sd, n)
    return f_x + dr.shift(levels, u) + dr.noise_mult(levels) * base


def run_ab_test(config: ShowcaseConfig) -> ABTestReport:
    """Replicate a two-group Welch comparison with and without the BMOD layer.

    Group assignment streams are independent of every BMOD stream by keying;
    group sizes differ by at most one. customer_effect is added to group B's
    outcomes in both arms. The two arms draw independent outcome noise so the
    KS comparison of their t distributions is a valid equal-distribution test.
    """
    truth, policy = config.truth, config.policy
    n, big_r, seed = config.n_showcase, config.ab_replicates, config.seed
    if n < 4:
        raise InputError("n_showcase: must be >= 4 for a two-group test")
    alpha = 0.05
    model = train(config.spec, sample_population(truth, config.n_train, seed=(seed, "train")))
    t_on = np.empty(big_r)
    t_off = np.empty(big_r)
    diff_on = np.empty(big_r)
    diff_off = np.empty(big_r)
    p_on = np.empty(big_r)
    p_off = np.empty(big_r)
    headline = None
    for r in range(big_r):
        users = sample_population(truth, n, seed=(seed, "ab-users", r))
        f_x = true_mean(truth, users.X)
        y_hat = predict_batch(model, users.X)
        perm = stream(seed, "assign", r).permutation(n)
        a_idx, b_idx = perm[: n // 2], perm[n // 2 :]
        arms = {}
        for arm, arm_policy in (("on", policy), ("off", InterventionPolicy(variant="idle"))):
            base = truth.noise(n, stream(seed, "ab", r, f"noise-{arm}"))
            y = _modified_outcomes_vector(
                truth, arm_policy, y_hat, users.X, f_x, base,
                seed_path=(seed, "ab", r, arm), horizon=config.horizon_steps,
            ).copy()
            y[b_idx] += config.customer_effect
            t, dof = welch_t(y[a_idx], y[b_idx])
            arms[arm] = (y, float(t), float(dof), float(y[a_idx].mean()), float(y[b_idx].mean()))
        (y_on, t1, dof1, ma, mb) = arms["on"]
        (_, t0, dof0, ma0, mb0) = arms["off"]
        t_on[r], t_off[r] = t1, t0
        diff_on[r], diff_off[r] = ma - mb, ma0 - mb0
        p_on[r] = 2 * sps.t.sf(abs(t1), dof1)
        p_off[r] = 2 * sps.t.sf(abs(t0), dof0)
        if r == 0:
            headline = (tuple(sorted(a_idx.tolist())), tuple(sorted(b_idx.tolist())),
                        ma, mb, t1, dof1, p_on[0])
    group_a, group_b, mean_a, mean_b, t_stat, dof, p_value = headline
    return ABTestReport(
        n=n, replicates=big_r, customer_effect=config.customer_effect,
        group_a=group_a, group_b=group_b,
        mean_a=mean_a, mean_b=mean_b, diff=mean_a - mean_b,
        t_stat=t_stat, dof=dof, p_value=p_value,
        t_on=t_on, t_off=t_off, diff_on=diff_on, diff_off=diff_off,
        rejection_rate_on=float((p_on < alpha).mean()),
        rejection_rate_off=float((p_off < alpha).mean()),
        alpha=alpha,
        ks_stat=ks_statistic(t_on, t_off),
        ks_critical=ks_critical_value(big_r, big_r, 0.01),
        ks_alpha=0.01,
    )

"""Behavior-modification policies and the post-intervention outcome law.

A policy maps (prediction y_hat, features x, current outcome y_t) to an
intervention: either a numeric level b fed through the world's dose-response,
or a shrinkage marker that realizes the outcome as a convex pull toward the
prediction, y_mod = (1-lam) f(x) + lam y_hat + (1-lam) eps.

Stochastic policies add noise to the level; the sequential agent chooses levels
online over a horizon and commits to the last one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .stats import batch_se
from .streams import as_path, stream
from .world import GroundTruth, eval_true_f

VARIANTS = ("idle", "constant_shift", "oracle_counter_bias", "shrinkage", "sequential_agent")


@dataclass(frozen=True)
class AgentConfig:
    """Sequential agent: forced exploration then certainty-equivalent greedy.

    The agent cycles the two grid extremes (starting at the lowest) for
    explore_steps, fits y' ~ c + u*b by online least squares, then repeatedly
    picks the grid action minimizing (y_hat - (c + u*b))^2; greedy ties break
    toward the lowest action. Interim observations carry gaussian noise with
    sd step_noise_sd.
    """

    action_grid: tuple[float, ...] = (-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2)
    horizon_steps: int = 50
    explore_steps: int = 10
    step_noise_sd: float = 0.01

    def __post_init__(self):
        grid = self.action_grid
        if len(grid) < 2:
            raise ConfigurationError("agent.action_grid: needs at least 2 actions")
        if any(b <= a for b, a in zip(grid[1:], grid)):
            raise ConfigurationError("agent.action_grid: must be strictly ascending (degenerate grids are invalid)")
        if 0.0 not in grid:
            raise ConfigurationError("agent.action_grid: must contain 0")
        if self.horizon_steps < 1:
            raise ConfigurationError("agent.horizon_steps: must be >= 1")
        if not 2 <= self.explore_steps <= self.horizon_steps:
            raise ConfigurationError("agent.explore_steps: must satisfy 2 <= E <= horizon_steps")
        if self.step_noise_sd < 0:
            raise ConfigurationError("agent.step_noise_sd: must be >= 0")


@dataclass(frozen=True)
class InterventionPolicy:
    """One of: idle, constant_shift(delta), oracle_counter_bias, shrinkage(lam),
    sequential_agent(agent).

    policy_noise_sd > 0 adds N(0, sd^2) noise to the level for constant_shift
    and oracle_counter_bias; idle always emits level 0 and shrinkage emits a
    marker, so neither takes noise. oracle_counter_bias targets a dose shift of
    -bias_estimate, exactly in continuous mode (grid=None) or at the nearest
    grid level otherwise.
    """

    variant: str = "idle"
    delta: float = 0.0
    lam: float = 0.5
    grid: tuple[float, ...] | None = None
    policy_noise_sd: float = 0.0
    agent: AgentConfig | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"policy.variant: unknown variant {self.variant!r}")
        if not math.isfinite(self.delta):
            raise ConfigurationError("policy.delta: must be finite")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"policy.lam: must be in [0, 1], got {self.lam}")
        if self.policy_noise_sd < 0:
            raise ConfigurationError("policy.policy_noise_sd: must be >= 0")
        if self.grid is not None:
            if len(self.grid) < 1:
                raise ConfigurationError("policy.grid: must be nonempty when given")
            if any(b <= a for b, a in zip(self.grid[1:], self.grid)):
                raise ConfigurationError("policy.grid: must be strictly ascending")
        if self.variant == "sequential_agent" and self.agent is None:
            object.__setattr__(self, "agent", AgentConfig())


def idle() -> InterventionPolicy:
    return InterventionPolicy(variant="idle")


def constant_shift(delta: float, policy_noise_sd: float = 0.0) -> InterventionPolicy:
    return InterventionPolicy(variant="constant_shift", delta=delta, policy_noise_sd=policy_noise_sd)


def oracle_counter_bias(grid: tuple[float, ...] | None = None, policy_noise_sd: float = 0.0) -> InterventionPolicy:
    return InterventionPolicy(variant="oracle_counter_bias", grid=grid, policy_noise_sd=policy_noise_sd)


def shrinkage(lam: float) -> InterventionPolicy:
    return InterventionPolicy(variant="shrinkage", lam=lam)


def sequential_agent(agent: AgentConfig | None = None) -> InterventionPolicy:
    return InterventionPolicy(variant="sequential_agent", agent=agent or AgentConfig())


@dataclass(frozen=True)
class ShrinkageMarker:
    """Symbolic intervention: realize the outcome shrunk toward the prediction."""

    lam: float


Intervention = float | ShrinkageMarker


@dataclass(frozen=True)
class ModifiedWorld:
    """Post-intervention outcome law over a ground truth."""

    truth: GroundTruth

    def sensitivity(self, seed: int | tuple, user: int = 0) -> float:
        """The user's dose-response sensitivity u, a stable per-(seed, user) draw."""
        rng = stream(*as_path(seed), "sensitivity", user)
        return float(self.truth.sensitivity_law.draw(1, rng)[0])

    def moments(self, intervention, x, y_hat: float, u: float = 1.0) -> tuple[float, float]:
        """Conditional mean and noise sd of the modified outcome."""
        f = eval_true_f(self.truth, x)
        if isinstance(intervention, ShrinkageMarker):
            lam = intervention.lam
            return (1.0 - lam) * f + lam * y_hat, (1.0 - lam) * self.truth.noise_sd
        b = float(intervention)
        dr = self.truth.dose_response
        return f + dr.shift(b, u), dr.noise_mult(b) * self.truth.noise_sd


def compute_intervention(
    policy: InterventionPolicy, y_hat: float, x=None, y_t: float | None = None,
    *, bias_estimate: float | None = None, seed: int | tuple = 0,
    dose_response=None,
):
    """Map (prediction, features, current outcome) to an intervention.

    Returns a numeric level, or a ShrinkageMarker for the shrinkage variant.
    x and y_t are part of the policy interface for context-aware variants; the
    built-in variants ignore them. The sequential agent does not fit this
    one-shot shape; use run_sequential_agent.
    """
    if policy.variant == "idle":
        return 0.0
    noise = 0.0
    if policy.policy_noise_sd > 0:
        noise = float(stream(*as_path(seed), "policy-noise").normal(0.0, policy.policy_noise_sd))
    if policy.variant == "constant_shift":
        return policy.delta + noise
    if policy.variant == "shrinkage":
        return ShrinkageMarker(lam=policy.lam)
    if policy.variant == "oracle_counter_bias":
        if bias_estimate is None:
            raise ConfigurationError("oracle_counter_bias requires bias_estimate")
        target = -bias_estimate
        if policy.grid is None:
            level = _invert_dose(dose_response, target)
        else:
            grid = np.asarray(policy.grid)
            shifts = _dose_shift(dose_response, grid)
            level = float(grid[int(np.argmin(np.abs(shifts - target)))])
        return level + noise
    raise ConfigurationError("sequential_agent interventions come from run_sequential_agent")


def _dose_shift(dose_response, levels):
    if dose_response is None:
        return np.asarray(levels, dtype=float)  # linear with unit sensitivity
    return dose_response.shift(levels, 1.0)


def _invert_dose(dose_response, target: float) -> float:
    if dose_response is None or dose_response.kind == "linear":
        return float(target)
    reach = dose_response.scale
    if abs(target) >= reach:
        raise InputError(f"dose target {target} is outside the saturating response range (+/-{reach})")
    return float(dose_response.scale * math.atanh(target / reach))


def realize_modified_outcome(
    world: ModifiedWorld, intervention, x, y_hat: float, seed: int | tuple,
    user: int = 0,
) -> float:
    """One modified outcome draw under a level or shrinkage marker.

    Numeric levels are expected to lie on or within the hull of the acting
    policy's grid (documented, not enforced). Sensitivity is the stable
    per-(seed, user) draw, so repeated calls for a user share their u.
    """
    path = as_path(seed)
    u = world.sensitivity(path, user)
    mean, sd = world.moments(intervention, x, y_hat, u)
    base = world.truth.noise(1, stream(*path, "modified-noise", user))[0]
    scale = sd / world.truth.noise_sd if world.truth.noise_sd > 0 else 0.0
    return float(mean + scale * base)


@dataclass(frozen=True)
class CateEstimate:
    """E[y_mod - y | x], paired-noise Monte Carlo plus closed form when known."""

    value: float
    se: float
    analytic: float | None
    reps: int


def true_cate(
    world: ModifiedWorld, policy: InterventionPolicy, y_hat: float, x,
    reps: int = 10_000, seed: int | tuple = 0, *, bias_estimate: float | None = None,
) -> CateEstimate:
    """Average treatment effect of the policy at x, by common-random-number pairing.

    Each replication draws one natural outcome and one modified outcome from the
    same base noise; the mean difference estimates the CATE with the noise
    largely cancelled. The analytic value is attached where the dose-response
    makes it exact (idle, constant_shift/oracle under the linear response,
    shrinkage), else None.
    """
    if reps < 2:
        raise InputError("reps: must be >= 2")
    truth = world.truth
    if policy.variant == "sequential_agent":
        return _agent_cate(world, policy, y_hat, x, reps, seed)
    path = as_path(seed)
    f = eval_true_f(truth, x)
    base = truth.noise(reps, stream(*path, "cate-noise"))
    u = truth.sensitivity_law.draw(reps, stream(*path, "cate-sensitivity"))
    y = f + base
    if policy.variant == "shrinkage":
        lam = policy.lam
        y_mod = (1 - lam) * f + lam * y_hat + (1 - lam) * base
        analytic: float | None = lam * (y_hat - f)
    else:
        levels = np.full(reps, 0.0 if policy.variant == "idle" else policy.delta)
        if policy.variant == "oracle_counter_bias":
            lvl = compute_intervention(
                policy, y_hat, x, bias_estimate=bias_estimate, dose_response=truth.dose_response
            )
            levels = np.full(reps, float(lvl))
        if policy.policy_noise_sd > 0 and policy.variant != "idle":
            levels = levels + stream(*path, "cate-policy-noise").normal(0, policy.policy_noise_sd, reps)
        dr = truth.dose_response
        y_mod = f + dr.shift(levels, u) + dr.noise_mult(levels) * base
        if policy.variant == "idle":
            analytic = 0.0
        elif dr.kind != "linear":
            analytic = None
        elif policy.variant == "oracle_counter_bias":
            analytic = truth.sensitivity_law.mean() * float(lvl)
        else:
            analytic = truth.sensitivity_law.mean() * policy.delta
    diff = y_mod - y
    if policy.variant == "idle":
        return CateEstimate(value=0.0, se=0.0, analytic=0.0, reps=reps)
    return CateEstimate(value=float(diff.mean()), se=batch_se(diff), analytic=analytic, reps=reps)


def _agent_cate(world, policy, y_hat, x, reps, seed) -> CateEstimate:
    path = as_path(seed)
    truth = world.truth
    f = eval_true_f(truth, x)
    diffs = np.empty(reps)
    for r in range(reps):
        traj = run_sequential_agent(policy.agent, world, y_hat, x, seed=path + (r, "cate-agent"))
        base = truth.noise(1, stream(*path, r, "cate-agent", "natural"))[0]
        diffs[r] = traj.final_outcome - (f + base)
    return CateEstimate(value=float(diffs.mean()), se=batch_se(diffs), analytic=None, reps=reps)


@dataclass(frozen=True)
class Trajectory:
    """One user's sequential run: (step, action, interim observation) triples,
    per-step rewards -(y_hat - y'_t)^2, the committed final level, and the
    final modified outcome."""

    user: int
    steps: tuple[tuple[int, float, float], ...]
    rewards: tuple[float, ...]
    final_level: float
    final_outcome: float


def run_sequential_agent(
    cfg: AgentConfig, world: ModifiedWorld, y_hat: float, x, seed: int | tuple,
    user: int = 0,
) -> Trajectory:
    """Run the explore-then-greedy agent for one user and realize the final outcome.

    The agent never sees f or u; it only observes noisy interim outcomes at the
    levels it plays. With horizon_steps == explore_steps the final level is the
    last forced-exploration action.
    """
    path = as_path(seed)
    truth = world.truth
    u = world.sensitivity(path, user)
    f = eval_true_f(truth, x)
    grid = np.asarray(cfg.action_grid)
    extremes = (float(grid[0]), float(grid[-1]))
    n = 0
    s_b = s_bb = s_y = s_by = 0.0
    steps: list[tuple[int, float, float]] = []
    rewards: list[float] = []
    level = 0.0
    for t in range(cfg.horizon_steps):
        if t < cfg.explore_steps:
            level = extremes[t % 2]
        else:
            det = n * s_bb - s_b * s_b
            u_hat = (n * s_by - s_b * s_y) / det
            c_hat = (s_y - u_hat * s_b) / n
            preds = c_hat + u_hat * grid
            level = float(grid[int(np.argmin((y_hat - preds) ** 2))])
        obs = f + truth.dose_response.shift(level, u)
        if cfg.step_noise_sd > 0:
            obs += float(stream(*path, "step", t).normal(0.0, cfg.step_noise_sd))
        n += 1
        s_b += level
        s_bb += level * level
        s_y += obs
        s_by += level * obs
        steps.append((t, level, float(obs)))
        rewards.append(-((y_hat - obs) ** 2))
    final_mean, final_sd = world.moments(level, x, y_hat, u)
    base = truth.noise(1, stream(*path, "final", user))[0]
    scale = final_sd / truth.noise_sd if truth.noise_sd > 0 else 0.0
    outcome = float(final_mean + scale * base)
    return Trajectory(
        user=user, steps=tuple(steps), rewards=tuple(rewards),
        final_level=level, final_outcome=outcome,
    )

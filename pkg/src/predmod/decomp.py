"""Expected-prediction-error decompositions with and without behavior modification.

Unmodified, at a probe x over fresh training draws and fresh outcome noise:

    EPE(x) = sigma^2 + bias(x)^2 + Var(f_hat(x)),   bias = f - E[f_hat]

Modified, when a policy pushes realized outcomes toward the fixed predictions:

    EPE_mod(x) = sigma_mod^2 + (CATE(x) + bias(x))^2 + Var(f_hat(x))

Monte Carlo estimates of both sides share their random streams (common random
numbers): the same per-replication training samples and the same base outcome
noise feed the unmodified and modified arms, so identity checks and deltas are
paired and their standard errors reflect the pairing.

For level policies with stochastic pieces (policy noise, random sensitivity)
the noise term is measured around the marginal conditional mean E[y_mod | x],
which is what keeps the three-term identity exact for stochastic interventions.
Shrinkage realizes outcomes around the per-replication mean (1-lam) f + lam
y_hat with noise sd (1-lam) sigma, so its identity holds up to a
(1-(1-lam)^2) Var(f_hat) remainder, far below tolerance at the sample sizes
used here. The sequential agent's level tracks the prediction, so for agent
reports the orthogonality behind the recomposition is only approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import InputError
from .models import ModelSpec, prediction_samples
from .parallel import map_indices
from .policies import (
    InterventionPolicy,
    ModifiedWorld,
    compute_intervention,
    run_sequential_agent,
)
from .stats import batched
from .streams import as_path, stream
from .world import GroundTruth, eval_true_f

_N_BATCHES = 100


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    """Direct and recomposed error estimates at one probe, with standard errors.

    Unmodified reports leave the modified-side fields (sigma2_tilde, cate,
    epe_tilde_*) as None. Per-replication arrays ride along (not serialized) so
    paired checks can be computed downstream.
    """

    probe_x: tuple[float, ...]
    probe_f: float
    spec: ModelSpec
    policy: InterventionPolicy | None
    n_train: int
    reps: int
    seed: tuple
    sigma2_known: float
    sigma2: float
    sigma2_se: float
    bias: float
    bias_se: float
    var_fhat: float
    var_fhat_se: float
    epe_direct: float
    epe_direct_se: float
    epe_recomposed: float
    epe_recomposed_se: float
    cross_term: float
    cross_term_se: float
    resid_mean: float
    resid_mean_se: float
    sigma2_tilde: float | None = None
    sigma2_tilde_se: float | None = None
    cate: float | None = None
    cate_se: float | None = None
    cate_analytic: float | None = None
    epe_tilde_direct: float | None = None
    epe_tilde_direct_se: float | None = None
    epe_tilde_recomposed: float | None = None
    epe_tilde_recomposed_se: float | None = None
    err_samples: np.ndarray | None = None
    resid_samples: np.ndarray | None = None
    gap_samples: np.ndarray | None = None
    fhat_samples: np.ndarray | None = None

    @property
    def modified(self) -> bool:
        return self.policy is not None


def _se(values: np.ndarray) -> float:
    means = np.array([c.mean() for c in batched(values, _N_BATCHES)])
    return float(means.std(ddof=1) / math.sqrt(means.size))


def _var_se(values: np.ndarray) -> float:
    n = values.size
    v = values.var(ddof=1)
    m4 = ((values - values.mean()) ** 4).mean()
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * v**2, 0.0) / n)


def _shared_draws(truth: GroundTruth, spec: ModelSpec, n_train: int, x, reps: int,
                  seed: tuple, workers: int):
    """The CRN backbone: per-rep predictions, base noise, sensitivities, policy noise."""
    fhat = prediction_samples(truth, spec, n_train, x, reps, seed, workers=workers)
    base = truth.noise(reps, stream(*seed, "test"))
    return fhat, base


def _check_args(truth: GroundTruth, x, reps: int, n_train: int) -> float:
    if reps < 100:
        raise InputError("reps: must be >= 100 for decomposition estimates")
    if n_train < 1:
        raise InputError("n_train: must be >= 1")
    return eval_true_f(truth, x)


def epe_unmodified(
    truth: GroundTruth, spec: ModelSpec, n_train: int, x, reps: int,
    seed: int | tuple, workers: int = 1,
) -> DecompositionReport:
    """Measure EPE(x) directly and recompose it from noise, bias, and variance."""
    f = _check_args(truth, x, reps, n_train)
    path = as_path(seed)
    fhat, base = _shared_draws(truth, spec, n_train, x, reps, path, workers)
    y = f + base
    err = (y - fhat) ** 2
    resid = base
    gap = f - fhat
    sigma2 = float(resid.var(ddof=1))
    bias = float(f - fhat.mean())
    var_fhat = float(fhat.var(ddof=1))
    direct = float(err.mean())
    recomposed = sigma2 + bias**2 + var_fhat
    bias_se = float(fhat.std(ddof=1) / math.sqrt(reps))
    recomposed_se = math.sqrt(_var_se(resid) ** 2 + (2 * abs(bias) * bias_se) ** 2 + _var_se(fhat) ** 2)
    cross = resid * gap
    return DecompositionReport(
        probe_x=tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist()), probe_f=f,
        spec=spec, policy=None, n_train=n_train, reps=reps, seed=path,
        sigma2_known=truth.noise_sd**2,
        sigma2=sigma2, sigma2_se=_var_se(resid),
        bias=bias, bias_se=bias_se,
        var_fhat=var_fhat, var_fhat_se=_var_se(fhat),
        epe_direct=direct, epe_direct_se=_se(err),
        epe_recomposed=recomposed, epe_recomposed_se=recomposed_se,
        cross_term=float(cross.mean()), cross_term_se=_se(cross),
        resid_mean=float(resid.mean()), resid_mean_se=_se(resid),
        err_samples=err, resid_samples=resid, gap_samples=gap, fhat_samples=fhat,
    )


def _agent_levels_one(truth: GroundTruth, policy: InterventionPolicy, x_t: tuple,
                      fhat_list: tuple, seed: tuple, rep: int) -> tuple[float, float]:
    world = ModifiedWorld(truth)
    agent_seed = seed + (rep, "agent")
    traj = run_sequential_agent(policy.agent, world, fhat_list[rep], np.asarray(x_t), seed=agent_seed)
    return traj.final_level, world.sensitivity(agent_seed, 0)


def _policy_conditional_means(
    truth: GroundTruth, policy: InterventionPolicy, f: float, x, fhat: np.ndarray,
    seed: tuple, workers: int, bias_estimate: float,
) -> tuple[np.ndarray, np.ndarray, str]:
    """Per-rep conditional outcome means g_r and noise multipliers m_r.

    Returns (g, mult, centering) where centering is "marginal" for level
    policies and "conditional" for shrinkage (see module docstring).
    """
    reps = fhat.size
    dr = truth.dose_response
    if policy.variant == "shrinkage":
        lam = policy.lam
        g = (1 - lam) * f + lam * fhat
        mult = np.full(reps, 1 - lam)
        return g, mult, "conditional"
    if policy.variant == "idle":
        levels = np.zeros(reps)
        u = truth.sensitivity_law.draw(reps, stream(*seed, "sensitivity"))
    elif policy.variant == "sequential_agent":
        x_t = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
        fn = partial(_agent_levels_one, truth, policy, x_t, tuple(fhat.tolist()), seed)
        pairs = map_indices(fn, reps, workers=workers)
        levels = np.array([p[0] for p in pairs])
        u = np.array([p[1] for p in pairs])
    else:
        if policy.variant == "constant_shift":
            center = policy.delta
        else:  # oracle_counter_bias: noise-free center, per-rep noise added below
            quiet = InterventionPolicy(variant="oracle_counter_bias", grid=policy.grid)
            center = float(compute_intervention(
                quiet, float(fhat.mean()), x, bias_estimate=bias_estimate, dose_response=dr
            ))
        levels = np.full(reps, center)
        if policy.policy_noise_sd > 0:
            levels = levels + stream(*seed, "policy-noise").normal(0, policy.policy_noise_sd, reps)
        u = truth.sensitivity_law.draw(reps, stream(*seed, "sensitivity"))
    g = f + dr.shift(levels, u)
    mult = np.asarray(dr.noise_mult(levels), dtype=float)
    if mult.ndim == 0:
        mult = np.full(reps, float(mult))
    return g, mult, "marginal"


def epe_modified(
    truth: GroundTruth, spec: ModelSpec, policy: InterventionPolicy, n_train: int,
    x, reps: int, seed: int | tuple, workers: int = 1,
) -> DecompositionReport:
    """Measure EPE under a policy and recompose it as sigma_mod^2 + (CATE+bias)^2 + Var.

    Each replication trains on unmodified data, fixes y_hat = f_hat(x), applies
    the policy, and realizes one modified outcome from the shared base noise.
    """
    f = _check_args(truth, x, reps, n_train)
    path = as_path(seed)
    fhat, base = _shared_draws(truth, spec, n_train, x, reps, path, workers)
    bias = float(f - fhat.mean())
    bias_se = float(fhat.std(ddof=1) / math.sqrt(reps))
    var_fhat = float(fhat.var(ddof=1))
    g, mult, centering = _policy_conditional_means(
        truth, policy, f, x, fhat, path, workers, bias_estimate=bias,
    )
    y_mod = g + mult * base
    err = (y_mod - fhat) ** 2
    if centering == "marginal":
        f_do = np.full(reps, float(g.mean()))
    else:
        f_do = g
    resid = y_mod - f_do
    gap = f_do - fhat
    sigma2_tilde = float(resid.var(ddof=1))
    cate_samples = g - f
    cate = float(cate_samples.mean())
    cate_se = _se(cate_samples) if cate_samples.std() > 0 else 0.0
    direct = float(err.mean())
    recomposed = sigma2_tilde + (cate + bias) ** 2 + var_fhat
    recomposed_se = math.sqrt(
        _var_se(resid) ** 2
        + (2 * abs(cate + bias) * math.hypot(cate_se, bias_se)) ** 2
        + _var_se(fhat) ** 2
    )
    cross = resid * gap
    analytic = _analytic_cate(truth, policy, f, bias)
    return DecompositionReport(
        probe_x=tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist()), probe_f=f,
        spec=spec, policy=policy, n_train=n_train, reps=reps, seed=path,
        sigma2_known=truth.noise_sd**2,
        sigma2=float(base.var(ddof=1)), sigma2_se=_var_se(base),
        bias=bias, bias_se=bias_se,
        var_fhat=var_fhat, var_fhat_se=_var_se(fhat),
        epe_direct=float(((f + base - fhat) ** 2).mean()),
        epe_direct_se=_se((f + base - fhat) ** 2),
        epe_recomposed=float(base.var(ddof=1)) + bias**2 + var_fhat,
        epe_recomposed_se=recomposed_se,
        cross_term=float(cross.mean()), cross_term_se=_se(cross),
        resid_mean=float(resid.mean()), resid_mean_se=_se(resid),
        sigma2_tilde=sigma2_tilde, sigma2_tilde_se=_var_se(resid),
        cate=cate, cate_se=cate_se, cate_analytic=analytic,
        epe_tilde_direct=direct, epe_tilde_direct_se=_se(err),
        epe_tilde_recomposed=recomposed, epe_tilde_recomposed_se=recomposed_se,
        err_samples=err, resid_samples=resid, gap_samples=gap, fhat_samples=fhat,
    )


def _analytic_cate(truth: GroundTruth, policy: InterventionPolicy, f: float, bias: float) -> float | None:
    if policy.variant == "idle":
        return 0.0
    if truth.dose_response.kind != "linear":
        return None
    u_mean = truth.sensitivity_law.mean()
    if policy.variant == "constant_shift":
        return u_mean * policy.delta
    if policy.variant == "oracle_counter_bias" and policy.grid is None:
        return -u_mean * bias
    return None


@dataclass(frozen=True)
class IdentityCheck:
    """Result of verify_identity: per-term residuals and pass flags at tol * SE."""

    gap: float
    gap_se: float
    identity_ok: bool
    cross_term: float
    cross_term_se: float
    cross_ok: bool
    resid_mean: float
    resid_mean_se: float
    resid_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.cross_ok and self.resid_ok


def verify_identity(report: DecompositionReport, tol: float = 4.0) -> IdentityCheck:
    """Check direct-vs-recomposed agreement, cross-term orthogonality, and E[noise]=0.

    The identity gap compares the report's scalar fields (so a corrupted
    component is caught); its standard error comes from batch means of the
    paired per-replication arrays, which is the CRN-aware combined SE.
    """
    if report.err_samples is None:
        raise InputError("report carries no replication arrays; cannot verify")
    if report.modified:
        direct = report.epe_tilde_direct
        recomposed = report.sigma2_tilde + (report.cate + report.bias) ** 2 + report.var_fhat
    else:
        direct = report.epe_direct
        recomposed = report.sigma2 + report.bias**2 + report.var_fhat
    gap = direct - recomposed
    err_b = batched(report.err_samples, _N_BATCHES)
    resid_b = batched(report.resid_samples, _N_BATCHES)
    fhat_b = batched(report.fhat_samples, _N_BATCHES)
    gap_b = batched(report.gap_samples, _N_BATCHES)
    per_batch = []
    for eb, rb, fb, gb in zip(err_b, resid_b, fhat_b, gap_b):
        rec_b = rb.var(ddof=1) + gb.mean() ** 2 + fb.var(ddof=1)
        per_batch.append(eb.mean() - rec_b)
    per_batch = np.asarray(per_batch)
    gap_se = max(float(per_batch.std(ddof=1) / math.sqrt(per_batch.size)), 1e-15)
    cross_se = max(report.cross_term_se, 1e-15)
    resid_se = max(report.resid_mean_se, 1e-15)
    return IdentityCheck(
        gap=float(gap), gap_se=gap_se, identity_ok=abs(gap) <= tol * gap_se,
        cross_term=report.cross_term, cross_term_se=cross_se,
        cross_ok=abs(report.cross_term) <= tol * cross_se,
        resid_mean=report.resid_mean, resid_mean_se=resid_se,
        resid_ok=abs(report.resid_mean) <= tol * resid_se,
        tol=tol,
    )


@dataclass(frozen=True)
class DeltaReport:
    """EPE_mod - EPE, measured directly and via sigma_mod^2 - sigma^2 + CATE^2 + 2 CATE bias."""

    delta_direct: float
    delta_direct_se: float
    delta_formula: float
    delta_formula_se: float
    gap: float
    gap_se: float


def delta_epe(unmodified: DecompositionReport, modified: DecompositionReport) -> DeltaReport:
    """Paired difference of a matched (unmodified, modified) report pair."""
    if not modified.modified or unmodified.modified:
        raise InputError("delta_epe takes (unmodified, modified) in that order")
    matched = (
        unmodified.probe_x == modified.probe_x
        and unmodified.spec == modified.spec
        and unmodified.n_train == modified.n_train
        and unmodified.reps == modified.reps
        and unmodified.seed == modified.seed
    )
    if not matched:
        raise InputError("mismatched reports: probe, spec, n_train, reps, and seed must agree")
    delta_direct = modified.epe_tilde_direct - unmodified.epe_direct
    delta_formula = (
        modified.sigma2_tilde - unmodified.sigma2
        + modified.cate**2 + 2 * modified.cate * modified.bias
    )
    f = unmodified.probe_f
    d_err = batched(modified.err_samples - unmodified.err_samples, _N_BATCHES)
    m_resid = batched(modified.resid_samples, _N_BATCHES)
    u_resid = batched(unmodified.resid_samples, _N_BATCHES)
    m_gap = batched(modified.gap_samples, _N_BATCHES)
    fhat_b = batched(modified.fhat_samples, _N_BATCHES)
    gaps, formulas = [], []
    for db, mrb, urb, mgb, fb in zip(d_err, m_resid, u_resid, m_gap, fhat_b):
        bias_b = f - fb.mean()
        cate_b = mgb.mean() - bias_b
        formula_b = mrb.var(ddof=1) - urb.var(ddof=1) + cate_b**2 + 2 * cate_b * bias_b
        formulas.append(formula_b)
        gaps.append(db.mean() - formula_b)
    gaps = np.asarray(gaps)
    formulas = np.asarray(formulas)
    b = gaps.size
    return DeltaReport(
        delta_direct=float(delta_direct), delta_direct_se=_se(modified.err_samples - unmodified.err_samples),
        delta_formula=float(delta_formula),
        delta_formula_se=float(formulas.std(ddof=1) / math.sqrt(b)),
        gap=float(delta_direct - delta_formula),
        gap_se=max(float(gaps.std(ddof=1) / math.sqrt(b)), 1e-15),
    )


@dataclass(frozen=True)
class ShiftCurve:
    """EPE_mod over a grid of constant shifts at one probe, with the argmin."""

    shifts: tuple[float, ...]
    epe_tilde: tuple[float, ...]
    se: tuple[float, ...]
    argmin_shift: float
    epe_unmodified: float
    reps: int


def optimal_constant_shift(
    truth: GroundTruth, spec: ModelSpec, n_train: int, x, shift_grid, reps: int,
    seed: int | tuple, workers: int = 1,
) -> ShiftCurve:
    """Evaluate EPE_mod at each constant shift with common random numbers.

    The curve is a quadratic in the shift centered at -bias; callers should
    span at least (-2|bias| - margin, +margin) so the argmin is interior, and
    keep the world's noise multiplier flat over the grid (documented, not
    enforced).
    """
    grid = np.asarray(shift_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InputError("shift_grid: need at least 2 shifts")
    if not np.all(np.isfinite(grid)):
        raise InputError("shift_grid: shifts must be finite")
    f = _check_args(truth, x, reps, n_train)
    path = as_path(seed)
    fhat, base = _shared_draws(truth, spec, n_train, x, reps, path, workers)
    u = truth.sensitivity_law.draw(reps, stream(*path, "sensitivity"))
    dr = truth.dose_response
    means, ses = [], []
    for delta in grid:
        y_mod = f + dr.shift(delta, u) + dr.noise_mult(delta) * base
        err = (y_mod - fhat) ** 2
        means.append(float(err.mean()))
        ses.append(_se(err))
    means_arr = np.asarray(means)
    return ShiftCurve(
        shifts=tuple(grid.tolist()), epe_tilde=tuple(means),
        se=tuple(ses), argmin_shift=float(grid[int(np.argmin(means_arr))]),
        epe_unmodified=float(((f + base - fhat) ** 2).mean()),
        reps=reps,
    )


@dataclass(frozen=True)
class RegionReport:
    """Sign of EPE_mod - EPE over a CATE grid, plus the analytic improving interval."""

    cate_grid: tuple[float, ...]
    delta: tuple[float, ...]
    improving: tuple[bool, ...]
    interval: tuple[float, float] | None


def improvement_region(bias: float, sigma2: float, sigma2_tilde: float, cate_grid) -> RegionReport:
    """Classify each CATE as improving (delta < 0) or not; boundaries count as not.

    delta(c) = sigma2_tilde - sigma2 + c^2 + 2 c bias. With sigma2_tilde ==
    sigma2 the improving set is the open interval between 0 and -2*bias.
    """
    if sigma2 < 0 or sigma2_tilde < 0:
        raise InputError("sigma2 and sigma2_tilde must be >= 0")
    grid = np.asarray(cate_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or not np.all(np.isfinite(grid)):
        raise InputError("cate_grid: must be a nonempty finite 1-d grid")
    delta = sigma2_tilde - sigma2 + grid**2 + 2 * grid * bias
    disc = bias**2 - (sigma2_tilde - sigma2)
    interval = None
    if disc > 0:
        lo, hi = -bias - math.sqrt(disc), -bias + math.sqrt(disc)
        interval = (lo, hi)
    return RegionReport(
        cate_grid=tuple(grid.tolist()), delta=tuple(float(d) for d in delta),
        improving=tuple(bool(d < 0) for d in delta), interval=interval,
    )

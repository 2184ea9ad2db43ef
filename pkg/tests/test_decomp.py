"""Error decompositions: the three-term identity, deltas, shift curves, regions."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from predmod import (
    InputError,
    ModelSpec,
    constant_shift,
    delta_epe,
    epe_modified,
    epe_unmodified,
    improvement_region,
    optimal_constant_shift,
    oracle_counter_bias,
    sequential_agent,
    shrinkage,
    verify_identity,
)
# mirrors the session fixtures in conftest.py so cached reports are reused
PROBE = (0.5,)
N_TRAIN = 500
REPS = 4000
SEED = 123


def test_unmodified_identity_and_components(world, linear_spec, unmod_report):
    r = unmod_report
    check = verify_identity(r)
    assert check.ok, (check.gap, check.gap_se)
    assert r.sigma2 == pytest.approx(0.0025, abs=4 * r.sigma2_se)
    assert r.bias == pytest.approx(-1.0 / 12.0, abs=4 * r.bias_se)
    assert r.sigma2_known == 0.05**2
    assert r.policy is None and not r.modified


def test_epe_requires_enough_reps(world, linear_spec):
    with pytest.raises(InputError, match="reps"):
        epe_unmodified(world, linear_spec, 100, PROBE, 50, 0)


@pytest.mark.parametrize("policy", [
    constant_shift(0.05),
    constant_shift(-0.05),
    shrinkage(0.5),
    oracle_counter_bias(),
])
def test_modified_identity_holds(world, linear_spec, policy):
    r = epe_modified(world, linear_spec, policy, N_TRAIN, PROBE, 2000, SEED)
    check = verify_identity(r)
    assert check.ok, (policy.variant, check)


def test_agent_identity_holds(world, linear_spec):
    r = epe_modified(world, linear_spec, sequential_agent(), 300, PROBE, 400, 17)
    check = verify_identity(r)
    assert check.identity_ok, (check.gap, check.gap_se)


def test_idle_reduces_to_unmodified(world, linear_spec, unmod_report):
    from predmod import idle

    m = epe_modified(world, linear_spec, idle(), N_TRAIN, PROBE, REPS, SEED)
    u = unmod_report
    assert m.sigma2_tilde == pytest.approx(u.sigma2, abs=3 * u.sigma2_se)
    assert m.cate == pytest.approx(0.0, abs=3 * (m.cate_se or 1e-12) + 1e-12)
    assert m.bias == u.bias
    assert m.var_fhat == u.var_fhat
    assert m.epe_tilde_direct == pytest.approx(u.epe_direct, abs=3 * u.epe_direct_se)


def test_constant_shift_cate_is_delta(world, linear_spec, shift_report):
    r = shift_report
    assert r.cate_analytic == pytest.approx(0.1)
    assert r.cate == pytest.approx(0.1, abs=4 * r.cate_se + 1e-12)
    # same noise law on both sides of the intervention
    assert r.sigma2_tilde == pytest.approx(r.sigma2, abs=3 * r.sigma2_se)


def test_delta_epe_matches_formula_and_oracle(world, linear_spec, unmod_report, shift_report):
    d = delta_epe(unmod_report, shift_report)
    assert abs(d.gap) <= 3 * d.gap_se
    # oracle at bias = -1/12: 0.1^2 + 2*0.1*(-1/12) = -1/150
    assert d.delta_direct == pytest.approx(-1.0 / 150.0, abs=0.002)


def test_delta_epe_shrinkage(world, linear_spec, unmod_report):
    m = epe_modified(world, linear_spec, shrinkage(0.5), N_TRAIN, PROBE, REPS, SEED)
    d = delta_epe(unmod_report, m)
    assert abs(d.gap) <= 3 * d.gap_se
    # sigma2 falls by (1-(1-lam)^2) sigma^2; CATE = lam/12 against bias -1/12
    oracle = -0.75 * 0.0025 + (0.5 / 12.0) ** 2 + 2 * (0.5 / 12.0) * (-1.0 / 12.0)
    assert d.delta_direct == pytest.approx(oracle, abs=0.002)


def test_delta_epe_rejects_mismatched_reports(world, linear_spec, unmod_report):
    other = epe_modified(world, linear_spec, constant_shift(0.1), N_TRAIN, (0.35,), REPS, SEED)
    with pytest.raises(InputError, match="mismatched"):
        delta_epe(unmod_report, other)
    with pytest.raises(InputError, match="order"):
        delta_epe(unmod_report, unmod_report)


def test_verify_identity_catches_corruption(world, linear_spec, shift_report):
    r = shift_report
    bad = dataclasses.replace(r, sigma2_tilde=r.sigma2_tilde + 30 * r.sigma2_tilde_se)
    assert verify_identity(r).identity_ok
    assert not verify_identity(bad).identity_ok


def test_optimal_shift_argmin_counteracts_bias(world, linear_spec):
    grid = tuple(round(-0.05 + 0.01 * i, 10) for i in range(26))
    curve = optimal_constant_shift(world, linear_spec, N_TRAIN, PROBE, grid, REPS, SEED)
    assert curve.argmin_shift == pytest.approx(1.0 / 12.0, abs=0.015)
    assert min(curve.epe_tilde) < curve.epe_unmodified
    assert curve.shifts == grid


def test_optimal_shift_curve_is_reproducible(world, linear_spec):
    grid = (-0.1, 0.0, 0.1)
    a = optimal_constant_shift(world, linear_spec, 200, PROBE, grid, 500, 3)
    b = optimal_constant_shift(world, linear_spec, 200, PROBE, grid, 500, 3)
    assert a == b


def test_optimal_shift_rejects_bad_grids(world, linear_spec):
    with pytest.raises(InputError):
        optimal_constant_shift(world, linear_spec, 200, PROBE, (0.1,), 500, 3)
    with pytest.raises(InputError):
        optimal_constant_shift(world, linear_spec, 200, PROBE, (0.0, float("nan")), 500, 3)


def test_workers_do_not_change_decomposition(world, linear_spec):
    from predmod.models import _FHAT_CACHE

    _FHAT_CACHE.clear()
    a = epe_unmodified(world, linear_spec, 150, PROBE, 300, 31, workers=1)
    _FHAT_CACHE.clear()
    b = epe_unmodified(world, linear_spec, 150, PROBE, 300, 31, workers=3)
    assert a.epe_direct == b.epe_direct
    assert a.bias == b.bias
    assert np.array_equal(a.err_samples, b.err_samples)


def test_improvement_region_matches_textbook_interval():
    grid = tuple(round(-0.2 + 0.01 * i, 10) for i in range(41))
    region = improvement_region(bias=-1.0 / 12.0, sigma2=0.0025, sigma2_tilde=0.0025, cate_grid=grid)
    lo, hi = region.interval
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(1.0 / 6.0)
    improving = {c for c, flag in zip(region.cate_grid, region.improving) if flag}
    expected = {round(0.01 * i, 10) for i in range(1, 17)}
    assert improving == expected


def test_improvement_region_closes_when_noise_grows():
    region = improvement_region(bias=0.05, sigma2=0.0025, sigma2_tilde=0.01, cate_grid=(0.0, -0.05))
    assert region.interval is None
    assert not any(region.improving)


@given(
    st.floats(min_value=-0.5, max_value=0.5),
    st.floats(min_value=0.0, max_value=0.02),
    st.floats(min_value=0.0, max_value=0.02),
    st.lists(st.floats(min_value=-1, max_value=1), min_size=1, max_size=20),
)
def test_improvement_region_agrees_with_direct_delta(bias, s2, s2t, grid):
    region = improvement_region(bias, s2, s2t, grid)
    for c, flag in zip(region.cate_grid, region.improving):
        delta = s2t - s2 + c * c + 2 * c * bias
        assert flag == (delta < 0)
        if region.interval is not None and region.interval[0] < c < region.interval[1]:
            assert delta < 0 or math.isclose(delta, 0, abs_tol=1e-12)

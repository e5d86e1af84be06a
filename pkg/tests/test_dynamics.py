"""Online natural-gradient dynamics: stepping, ensembles, variance curves."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wimlab import families
from wimlab.dynamics import (
    DOMAIN_FLOOR,
    ScoreKind,
    TrajectoryState,
    VarianceCurve,
    default_record_grid,
    fit_rate,
    poincare_alpha,
    predict_variance_curve,
    run_ensemble,
    score_sensitivity,
    step,
)
from wimlab.errors import DomainEscape, InsufficientData, QuadratureFailure


def _fresh_state(theta, t=1):
    theta = np.asarray(theta, dtype=float)
    return TrajectoryState(t=t, theta=theta, sens=np.zeros((theta.size, t - 1)))


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def test_step_worked_example(gaussian_fam):
    # theta_1 = (0, 1), x_1 = 1: the Wasserstein score is (1, 0), G_W = I,
    # so theta_2 = theta_1 + (1/1) (1, 0) = (1, 1); the new sensitivity
    # column is G_W^{-1} Phi'(x)/t = (1, (x - mu)/sigma) = (1, 1).
    state = _fresh_state((0.0, 1.0))
    out = step(gaussian_fam, state, (0.0, 1.0), ScoreKind.WASSERSTEIN, 1.0)
    assert out.t == 2
    np.testing.assert_allclose(out.theta, [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(out.sens, [[1.0], [1.0]], atol=1e-9)
    assert not out.clamped


def test_step_fisher_uses_fisher_score(gaussian_fam):
    # Fisher score at theta = (0, 1), x = 1: psi = (x - mu, (x-mu)^2 - 1) = (1, 0)
    # and the update is preconditioned by G_W^{-1} = I, so theta moves by (1, 0).
    state = _fresh_state((0.0, 1.0))
    out = step(gaussian_fam, state, (0.0, 1.0), ScoreKind.FISHER, 1.0)
    np.testing.assert_allclose(out.theta, [1.0, 1.0], atol=1e-12)


def test_step_decreasing_step_size(gaussian_fam):
    # at t = 4 the same score moves theta by a quarter as much
    state = _fresh_state((0.0, 1.0), t=4)
    out = step(gaussian_fam, state, (0.0, 1.0), ScoreKind.WASSERSTEIN, 1.0)
    np.testing.assert_allclose(out.theta, [0.25, 1.0], atol=1e-12)
    assert out.sens.shape == (2, 4)


def test_step_clamps_at_domain_floor(gaussian_fam):
    # the Fisher scale score at x = mu is -1/sigma, which throws the scale
    # far below the floor from a near-floor start: clamp and flag
    state = _fresh_state((0.0, 0.002))
    out = step(gaussian_fam, state, (0.0, 1.0), ScoreKind.FISHER, 0.0)
    assert out.theta[1] == DOMAIN_FLOOR
    assert out.clamped
    # the flag is sticky: a benign follow-up step keeps it set
    nxt = step(gaussian_fam, out, (0.0, 1.0), ScoreKind.WASSERSTEIN, 0.0)
    assert nxt.clamped


def test_step_domain_escape_on_nonfinite(gaussian_fam):
    state = _fresh_state((0.0, 1.0))
    with pytest.raises(DomainEscape):
        step(gaussian_fam, state, (0.0, 1.0), ScoreKind.WASSERSTEIN, math.inf)


def test_trajectory_state_shape_validation():
    with pytest.raises(ValueError):
        TrajectoryState(t=3, theta=np.zeros(2), sens=np.zeros((2, 5)))


def test_sensitivity_columns_match_finite_differences(gaussian_fam):
    # quick 6-step version of the full sensitivity oracle
    rng = np.random.default_rng(11)
    theta_star = (0.5, 1.2)
    xs = families.sample(gaussian_fam, theta_star, 6, rng)

    def run(samples):
        st_ = _fresh_state((1.5, 1.7))
        for t, x in enumerate(samples, start=1):
            st_ = step(gaussian_fam, st_, theta_star, ScoreKind.WASSERSTEIN, float(x))
        return st_

    final = run(xs)
    h = 1e-6
    for s in range(len(xs)):
        bumped_p, bumped_m = xs.copy(), xs.copy()
        bumped_p[s] += h
        bumped_m[s] -= h
        fd = (run(bumped_p).theta - run(bumped_m).theta) / (2 * h)
        np.testing.assert_allclose(final.sens[:, s], fd, rtol=1e-5, atol=1e-9)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def test_run_ensemble_deterministic_and_thread_invariant(gaussian_fam):
    kwargs = dict(
        fam=gaussian_fam,
        theta_star=(2.0, 1.0),
        kind=ScoreKind.WASSERSTEIN,
        t_max=60,
        n=16,
        seed=123,
    )
    a = run_ensemble(**kwargs, threads=1)
    b = run_ensemble(**kwargs, threads=1)
    c = run_ensemble(**kwargs, threads=4)
    np.testing.assert_array_equal(a.v, b.v)
    np.testing.assert_array_equal(a.v, c.v)
    np.testing.assert_array_equal(a.times, c.times)


def test_run_ensemble_seed_changes_output(gaussian_fam):
    base = dict(
        fam=gaussian_fam,
        theta_star=(2.0, 1.0),
        kind=ScoreKind.WASSERSTEIN,
        t_max=60,
        n=16,
    )
    a = run_ensemble(**base, seed=1)
    b = run_ensemble(**base, seed=2)
    assert not np.allclose(a.v, b.v)


def test_run_ensemble_records_on_custom_grid(gaussian_fam):
    grid = np.array([5, 13, 40])
    curve = run_ensemble(
        gaussian_fam,
        (0.0, 1.0),
        kind=ScoreKind.WASSERSTEIN,
        t_max=40,
        n=8,
        seed=0,
        record_grid=grid,
    )
    np.testing.assert_array_equal(curve.times, grid)
    assert curve.v.shape == (3, 2, 2)
    assert curve.ensemble_size == 8
    # V_t = E[S_t S_t^T] is symmetric PSD at every recorded time
    for v in curve.v:
        np.testing.assert_allclose(v, v.T, atol=1e-15)
        assert np.linalg.eigvalsh(v)[0] >= -1e-15


def test_run_ensemble_flags_low_scale_starts(gaussian_fam):
    # with the target scale barely above the positivity floor, early scale
    # fluctuations dip below it for many lanes; those lanes are flagged,
    # excluded from the averages, and the rest stay finite.
    curve = run_ensemble(
        gaussian_fam,
        (0.0, 0.0012),
        theta0=(0.0, 0.0012),
        kind=ScoreKind.WASSERSTEIN,
        t_max=10,
        n=32,
        seed=3,
    )
    assert curve.n_flagged == 22  # deterministic for this seed
    assert np.isfinite(curve.v).all()


def test_default_record_grid_properties():
    grid = default_record_grid(10_000)
    assert grid[0] == 10 and grid[-1] == 10_000
    assert np.all(np.diff(grid) > 0)
    assert grid.dtype.kind == "i"
    small = default_record_grid(7)
    assert small[-1] == 7


# ---------------------------------------------------------------------------
# sensitivity integrals, Poincare constant, variance recursion
# ---------------------------------------------------------------------------

def test_score_sensitivity_closed_values(gaussian_fam, laplacian_fam):
    np.testing.assert_allclose(
        score_sensitivity(gaussian_fam, (0.0, 1.0), ScoreKind.WASSERSTEIN),
        np.eye(2),
        atol=1e-9,
    )
    sig = 2.0
    np.testing.assert_allclose(
        score_sensitivity(gaussian_fam, (0.0, sig), ScoreKind.FISHER),
        np.diag([1 / sig**4, 4 / sig**4]),
        atol=1e-9,
    )
    lam = 1.7
    np.testing.assert_allclose(
        score_sensitivity(laplacian_fam, (0.0, lam), ScoreKind.WASSERSTEIN),
        np.diag([1.0, 2 / lam**4]),
        atol=1e-9,
    )


def test_score_sensitivity_laplacian_fisher_is_distributional(laplacian_fam):
    with pytest.raises(QuadratureFailure):
        score_sensitivity(laplacian_fam, (0.0, 1.0), ScoreKind.FISHER)


def test_poincare_alpha_values(gaussian_fam, laplacian_fam):
    assert poincare_alpha(gaussian_fam, (0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)
    assert poincare_alpha(gaussian_fam, (0.0, 2.0)) == pytest.approx(0.25, rel=1e-12)
    # laplacian: gen-eigs of (diag(l^2, 1/l^2), diag(1, 2/l^4)) are l^2, l^6/2
    assert poincare_alpha(laplacian_fam, (0.0, 1.0)) == pytest.approx(0.5, rel=1e-12)


def test_predict_wasserstein_curve_is_exact_power_law(gaussian_fam):
    # for Wasserstein scores B = I and the recursion solves to V_t = C/(t-1)
    curve = predict_variance_curve(gaussian_fam, (20.0, 1.0), ScoreKind.WASSERSTEIN, 500)
    c = np.eye(2)  # C = G_W^{-1} J G_W^{-1} = I for the standard Gaussian
    for tt, v in zip(curve.times, curve.v):
        if tt < 2:
            continue
        np.testing.assert_allclose(v, c / (tt - 1), rtol=1e-9)


def test_predict_fisher_sigma1_constant(gaussian_fam):
    curve = predict_variance_curve(gaussian_fam, (20.0, 1.0), ScoreKind.FISHER, 20_000)
    tv = curve.v[-1] * curve.times[-1]
    np.testing.assert_allclose(np.diag(tv), [1.0, 4.0 / 3.0], rtol=0.01)
    assert abs(tv[0, 1]) < 1e-6


def test_predict_fisher_sigma2_rate(gaussian_fam):
    curve = predict_variance_curve(gaussian_fam, (20.0, 2.0), ScoreKind.FISHER, 50_000)
    fit = fit_rate(curve, window=(1_000, 50_000))
    # 2 alpha = 0.5: the slow component decays as t^{-1/2}
    assert fit.slope == pytest.approx(-0.5, abs=0.06)
    assert fit.r2 > 0.999


def test_monte_carlo_approaches_recursion_wasserstein(gaussian_fam):
    # moderate-n sanity check away from the small-t transient
    curve = run_ensemble(
        gaussian_fam,
        (20.0, 1.0),
        kind=ScoreKind.WASSERSTEIN,
        t_max=2_000,
        n=300,
        seed=17,
    )
    rec = predict_variance_curve(
        gaussian_fam, (20.0, 1.0), ScoreKind.WASSERSTEIN, 2_000, record_grid=curve.times
    )
    mask = curve.times >= 500
    ratio = curve.trace[mask] / rec.trace[mask]
    assert np.all(ratio > 0.8) and np.all(ratio < 1.25)


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@given(
    slope=st.floats(0.3, 1.5),
    c=st.floats(0.5, 3.0),
)
@settings(max_examples=40, deadline=None)
def test_fit_rate_recovers_exact_power_laws(slope, c):
    times = default_record_grid(10_000)
    v = (c * times.astype(float) ** (-slope))[:, None, None] * np.eye(1)
    curve = VarianceCurve(
        times=times,
        v=v,
        ensemble_size=1,
        seed=0,
        kind=ScoreKind.WASSERSTEIN,
        family="synthetic",
        theta_star=(0.0,),
        theta0=(0.0,),
    )
    fit = fit_rate(curve, window=(10, 10_000))
    assert fit.slope == pytest.approx(-slope, abs=1e-9)
    assert fit.constant[0, 0] == pytest.approx(c, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_insufficient_points(gaussian_fam):
    curve = predict_variance_curve(gaussian_fam, (0.0, 1.0), ScoreKind.WASSERSTEIN, 100)
    with pytest.raises(InsufficientData):
        fit_rate(curve, window=(99.0, 100.0))

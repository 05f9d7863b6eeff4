import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustreg.data_gen import (CorruptionModel, FixedSupport, GaussianCorruption, PointMass,
                                ProblemSpec, SignedBasis, UniformNoise, ZeroNoise, uniform_in_ball)
from robustreg.evaluation import (MetricPoint, aggregate_runs, decomposition_residual,
                                  default_decomposition_spec, demo_decomposition, demo_example_2_1,
                                  demo_indistinguishable, estimation_error, excess_risk_mc,
                                  has_bound, huber_gap_mc, huber_population_loss_mc, mean_ci,
                                  metric_point, random_ball_points, rate_fit, theoretical_bound,
                                  tv_distance)
from robustreg.model_core import BallConstraint, radius_bounded
from robustreg.optimizers import OptimizerConfig, RunResult


def signed_spec(d=4, alpha=0.0, noise=None, w_seed=0):
    return ProblemSpec(uniform_in_ball(d, 1.0, w_seed), 1.0, SignedBasis(d), noise or ZeroNoise(),
                       CorruptionModel(alpha, PointMass(50.0)), rho=1 / d)


def constant_spec(w_star=0.0, alpha=0.0):
    return ProblemSpec(np.array([w_star]), 1.0, FixedSupport([[1.0]], [1.0]), ZeroNoise(),
                       CorruptionModel(alpha, PointMass(3.0)))


@pytest.mark.parametrize("w, w_star, expected", [
    ([0.3, -0.2], [0.3, -0.2], 0.0), ([1.0, 0.0], [0.0, 0.0], 1.0), ([3.0], [-1.0], 16.0)])
def test_estimation_error_examples(w, w_star, expected):
    assert estimation_error(w, w_star) == expected


def test_estimation_error_dimension_mismatch():
    with pytest.raises(ValueError):
        estimation_error([1.0, 2.0], [1.0])


@pytest.mark.parametrize("n_mc", [1000, 12345, 10**5])
def test_excess_risk_zero_at_w_star(n_mc):
    spec = signed_spec(noise=UniformNoise(0.1), alpha=0.4)
    est, se = excess_risk_mc(spec.w_star, spec, n_mc, seed=3)
    assert est == 0.0 and se == 0.0


def test_excess_risk_deterministic_model():
    est, se = excess_risk_mc(np.array([0.25]), constant_spec(-0.5), 1000, 0)
    assert est == pytest.approx(0.75**2 / 2, abs=1e-15) and se == pytest.approx(0.0, abs=1e-15)


def test_excess_risk_signed_basis_closed_form():
    d = 4
    spec = signed_spec(d)
    v = np.array([0.3, -0.1, 0.2, 0.4])
    est, se = excess_risk_mc(spec.w_star + v, spec, 10**5, 1)
    assert abs(est - v @ v / (2 * d)) <= 3 * se


def test_huber_population_loss_examples():
    spec = signed_spec(alpha=0.0)
    est, se = huber_population_loss_mc(spec.w_star, spec, 6.0, 10**4, 0)
    assert est == 0.0
    # every residual is 0.9 with R = 0.1: the linear branch R (|r| - R/2)
    est, se = huber_population_loss_mc(np.array([0.9]), constant_spec(0.0), 0.1, 10**4, 0)
    assert abs(est - 0.1 * (0.9 - 0.05)) <= 3 * se + 1e-15


def test_theoretical_bound_examples():
    assert theoretical_bound("huber_uniform", 1.0, 6.1, 0.0, 0.0, 10**4) == pytest.approx(0.061, rel=1e-12)
    assert theoretical_bound("huber_known_mean", 1.0, 6.1, 0.0, 0.2, 10**4) == pytest.approx(6.6978, rel=1e-12)
    assert theoretical_bound("huber_unknown_mean", 1.0, 6.1, 0.3, 0.2, 1) == \
        theoretical_bound("huber_known_mean", 1.0, 6.1, 0.3, 0.2, 1)
    sub = theoretical_bound("huber_unknown_mean", 2.0, 5.0, 0.1, 0.5, 100, subgaussian=True)
    assert sub == pytest.approx((4 / 14 + 288 * 25 * (2 * math.log(100) + 1) / 0.45**2) / 100, rel=1e-12)


@pytest.mark.parametrize("algo", ["huber_noncentered", "l2_sgd", "huber_streaming_mean"])
def test_no_bound_for_baselines(algo):
    assert not has_bound(algo)
    with pytest.raises(ValueError):
        theoretical_bound(algo, 1.0, 6.1, 0.0, 0.2, 100)


def test_rate_fit_synthetic():
    Ts = [2**k for k in range(10, 17)]
    fit = rate_fit([(T, 3.7 / T) for T in Ts])
    assert abs(fit.slope + 1) <= 1e-9 and fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert abs(rate_fit([(T, 0.2 / math.sqrt(T)) for T in Ts]).slope + 0.5) <= 1e-9
    flat = rate_fit([(T, 0.4) for T in Ts])
    assert abs(flat.slope) <= 1e-12
    with pytest.raises(ValueError):
        rate_fit([(1, 1.0), (2, 0.0), (3, 1.0)])
    with pytest.raises(ValueError):
        rate_fit([(1, 1.0), (2, 1.0)])


@settings(max_examples=50)
@given(st.floats(-2, 1), st.floats(1e-3, 1e3))
def test_rate_fit_recovers_planted_slope(slope, c):
    fit = rate_fit([(T, c * T**slope) for T in (10, 100, 1000, 5000)])
    assert abs(fit.slope - slope) <= 1e-9
    assert 0.0 <= fit.r_squared <= 1.0


def _point(value, algo="a", T=10):
    return MetricPoint(algo, 0.1, T, 0, value, value, 0.0, 0.0)


def test_aggregate_examples():
    g = aggregate_runs([_point(0.7) for _ in range(15)])[("a", 0.1, 10)]
    assert g.mean == pytest.approx(0.7) and g.half_width == pytest.approx(0.0, abs=1e-15)
    g = aggregate_runs([_point(1.0), _point(3.0)])[("a", 0.1, 10)]
    assert g.mean == 2.0 and g.half_width == pytest.approx(1.96)
    single = aggregate_runs([_point(1.0, T=20)])[("a", 0.1, 20)]
    assert not single.ci_defined and math.isnan(single.half_width)


def test_ci_coverage():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(1000):
        lo, hi = mean_ci(rng.normal(2.0, 3.0, size=15)).ci
        hits += lo <= 2.0 <= hi
    # normal quantile with k = 15 undercovers slightly (t quantile would give 95%)
    assert 0.92 <= hits / 1000 <= 0.97


def test_metric_point_bound_column():
    spec = signed_spec(alpha=0.2)
    res = RunResult(spec.w_star.copy(), 100, 0.01)
    c = OptimizerConfig("huber_known_mean", 100, BallConstraint(1.0), radius_bounded(1.0, 0.0), 0.2)
    p = metric_point(res, spec, c, 5, 1000, 1)
    assert p.est_error == 0.0 and p.excess_risk == 0.0
    assert p.bound == theoretical_bound("huber_known_mean", 1.0, 6.0, 0.2, 0.25, 100)
    c2 = OptimizerConfig("l2_sgd", 100, BallConstraint(1.0), lam=0.2)
    assert metric_point(res, spec, c2, 5, 1000, 1).bound is None


def test_demo_biased_least_squares():
    r = demo_example_2_1(C=10.0, alpha=0.5, T=10**5, seeds=range(15))
    assert abs(r["l2_estimate_mean"] - r["predicted_biased_optimum"]) <= 0.5
    assert abs(r["huber_estimate_mean"] - r["w_star"]) <= 0.1
    assert r["predicted_biased_optimum"] == r["w_star"] + 5


def test_demo_biased_least_squares_without_corruption():
    r = demo_example_2_1(C=0.0, alpha=0.5, T=10**4, seeds=range(5))
    assert abs(r["l2_estimate_mean"] - 1.0) <= 0.05
    assert abs(r["huber_estimate_mean"] - 1.0) <= 0.05


@pytest.mark.parametrize("alpha", [0.25, 0.75])
def test_least_squares_bias_independent_of_alpha(alpha):
    r = demo_example_2_1(C=10.0, alpha=alpha, T=10**5, seeds=range(15))
    assert r["predicted_biased_optimum"] == 6.0
    assert abs(r["l2_estimate_mean"] - 6.0) <= 0.5


def test_demo_indistinguishable():
    r = demo_indistinguishable(10**5, 0)
    assert r["tv_distance_empirical"] <= 0.02
    assert r["support"] == [-1.0, 1.0]
    assert 0.0 <= demo_indistinguishable(10, 0)["tv_distance_empirical"] <= 1.0
    assert demo_indistinguishable(1000, 0, alpha=0.0)["tv_distance_empirical"] == 1.0


def test_tv_distance():
    assert tv_distance([1, 1, 2, 2], [1, 2, 2, 1]) == 0.0
    assert tv_distance([1, 1], [2, 2]) == 1.0
    assert tv_distance([1, 1, 1, 2], [1, 2, 2, 2]) == pytest.approx(0.5)


def test_decomposition_holds_on_default_spec():
    r = demo_decomposition(n_points=20, n_mc=10**5, seed=0)
    assert r["passed"] and r["max_abs_z"] <= 4


def test_decomposition_detects_wrong_radius():
    # the identity needs R large enough that clean residuals stay quadratic
    spec = default_decomposition_spec()
    w = np.full(spec.d, 0.4 / math.sqrt(spec.d))
    resid, se = decomposition_residual(w, spec, 0.05, 10**5, 3)
    assert abs(resid) > 4 * se


def test_decomposition_uses_all_three_terms():
    spec = ProblemSpec(uniform_in_ball(3, 1.0, 2), 1.0, SignedBasis(3), UniformNoise(0.1),
                       CorruptionModel(0.5, GaussianCorruption(2.0)), rho=1 / 3)
    R = radius_bounded(1.0, 0.1).radius
    for i, w in enumerate(random_ball_points(3, 1.0, 5, 4)):
        resid, se = decomposition_residual(w, spec, R, 10**5, 50 + i)
        assert abs(resid) <= 4 * se


def test_surrogate_domination():
    d, alpha = 5, 0.3
    spec = ProblemSpec(uniform_in_ball(d, 1.0, 6), 1.0, SignedBasis(d), UniformNoise(0.1),
                       CorruptionModel(alpha, PointMass(1e5)), rho=1 / d)
    R = radius_bounded(1.0, 0.1).radius
    for i, w in enumerate(random_ball_points(d, 1.0, 20, 2)):
        risk, se_r = excess_risk_mc(w, spec, 10**5, 2 * i)
        gap, se_g = huber_gap_mc(w, spec, R, 10**5, 2 * i + 1)
        combined = math.hypot(se_r, se_g / (1 - alpha))
        assert risk <= gap / (1 - alpha) + 4 * combined

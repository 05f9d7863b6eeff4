"""Metrics, Monte-Carlo population losses, rate fits and demonstrations."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .data_gen import (AUX, CORRUPTION, FEATURES, NOISE, CorruptionModel, FixedSupport,
                       GaussianCorruption, ProblemSpec, ScaledPointMass, SignFlipOfClean,
                       UniformNoise, UnitBoxNegative, ZeroNoise, sample_stream, substream,
                       uniform_in_ball)
from .model_core import BallConstraint, huber_loss, radius_bounded
from .optimizers import OptimizerConfig, RunResult, huber_sgd_unknown_mean, l2_sgd

__all__ = [
    "GroupStats",
    "MetricPoint",
    "RateFit",
    "aggregate_runs",
    "clean_loss_mc",
    "corrupted_huber_loss_mc",
    "decomposition_residual",
    "demo_decomposition",
    "demo_example_2_1",
    "demo_indistinguishable",
    "estimation_error",
    "excess_risk_mc",
    "huber_gap_mc",
    "huber_population_loss_mc",
    "mean_ci",
    "metric_point",
    "rate_fit",
    "theoretical_bound",
]

Z95 = 1.96


@dataclass(frozen=True)
class MetricPoint:
    algorithm: str
    alpha: float
    T: int
    seed: int
    est_error: float
    excess_risk: float
    excess_risk_se: float
    wall_time: float
    bound: float | None = None


def estimation_error(w, w_star) -> float:
    """Squared Euclidean distance ``||w - w*||^2``."""
    w = np.asarray(w, dtype=np.float64)
    w_star = np.asarray(w_star, dtype=np.float64)
    if w.shape != w_star.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {w_star.shape}")
    diff = w - w_star
    return float(diff @ diff)


def _mean_se(values):
    n = values.shape[0]
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return float(values.mean()), se


def _check_nmc(n_mc):
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")


def _clean_draws(spec, n, seed):
    X = spec.feature.sample(substream(seed, FEATURES), n)
    eps = spec.noise.sample(substream(seed, NOISE), n)
    return X, eps


def excess_risk_mc(w, spec: ProblemSpec, n_mc: int = 100_000, seed: int = 0):
    """Paired estimate of ``F(w) - F(w*)`` on clean draws.

    Each draw contributes ``(<w - w*, x> - eps)^2/2 - eps^2/2``, so the
    estimate is exactly zero at ``w = w*``.  Returns ``(estimate, std_error)``.
    """
    _check_nmc(n_mc)
    X, eps = _clean_draws(spec, n_mc, seed)
    r = X @ (np.asarray(w, dtype=np.float64) - spec.w_star) - eps
    return _mean_se(0.5 * r * r - 0.5 * eps * eps)


def clean_loss_mc(w, spec: ProblemSpec, n_mc: int = 100_000, seed: int = 0):
    """``F(w) = E[(<w, x> - y)^2 / 2]`` over uncorrupted samples."""
    _check_nmc(n_mc)
    X, eps = _clean_draws(spec, n_mc, seed)
    r = X @ (np.asarray(w, dtype=np.float64) - spec.w_star) - eps
    return _mean_se(0.5 * r * r)


def corrupted_huber_loss_mc(w, spec: ProblemSpec, R: float, n_mc: int = 100_000, seed: int = 0):
    """``H(w)``: expected Huber loss given ``b != 0``, with the gate forced open."""
    _check_nmc(n_mc)
    X, eps = _clean_draws(spec, n_mc, seed)
    b = spec.corruption.sample_conditional(substream(seed, CORRUPTION), n_mc, spec.clean_mean())
    r = X @ (np.asarray(w, dtype=np.float64) - spec.w_star) - eps - b
    return _mean_se(huber_loss(r, R))


def huber_population_loss_mc(w, spec: ProblemSpec, R: float, n_mc: int = 100_000,
                             seed: int = 0, center=None):
    """``L_R(w) = E[h_R(<w, x - center> - y)]`` over the contaminated mixture."""
    _check_nmc(n_mc)
    s = sample_stream(spec, seed, n_mc)
    X = s.x if center is None else s.x - np.asarray(center, dtype=np.float64)
    return _mean_se(huber_loss(X @ np.asarray(w, dtype=np.float64) - s.y, R))


def huber_gap_mc(w, spec: ProblemSpec, R: float, n_mc: int = 100_000, seed: int = 0, center=None):
    """Paired estimate of ``L_R(w) - L_R(w*)`` on common contaminated draws."""
    _check_nmc(n_mc)
    s = sample_stream(spec, seed, n_mc)
    X = s.x if center is None else s.x - np.asarray(center, dtype=np.float64)
    base = X @ spec.w_star - s.y
    shifted = X @ np.asarray(w, dtype=np.float64) - s.y
    return _mean_se(huber_loss(shifted, R) - huber_loss(base, R))


def decomposition_residual(w, spec: ProblemSpec, R: float, n_mc: int = 100_000, seed: int = 0):
    """``L_R(w) - ((1 - alpha) F(w) + alpha H(w))`` from three independent estimates.

    Returns ``(residual, combined_std_error)``.
    """
    a = spec.alpha
    L, se_L = huber_population_loss_mc(w, spec, R, n_mc, seed)
    F, se_F = clean_loss_mc(w, spec, n_mc, seed + 1)
    if a > 0:
        H, se_H = corrupted_huber_loss_mc(w, spec, R, n_mc, seed + 2)
    else:
        H, se_H = 0.0, 0.0
    combined = math.sqrt(se_L**2 + ((1 - a) * se_F) ** 2 + (a * se_H) ** 2)
    return L - ((1 - a) * F + a * H), combined


def theoretical_bound(algorithm: str, D: float, R: float, alpha: float, rho: float, T: int,
                      subgaussian: bool = False) -> float:
    """Closed-form guarantee for the algorithms that have one.

    ``huber_uniform`` bounds expected excess risk; the centered algorithms
    bound expected squared estimation error.  ``T`` is the number of SGD
    steps (the unknown-mean algorithm also spends ``T`` samples on the mean).
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if algorithm == "huber_uniform":
        return R * D / ((1 - alpha) * math.sqrt(T))
    lam = (1 - alpha) * rho
    if algorithm in ("huber_known_mean", "huber_unknown_mean") and not lam > 0:
        raise ValueError("strongly convex bounds need rho > 0")
    if algorithm == "huber_known_mean":
        return 72 * R**2 / (lam**2 * T)
    if algorithm == "huber_unknown_mean":
        log_factor = 2 * math.log(T) + 1
        if subgaussian:
            return (D**2 / 14 + 288 * R**2 * log_factor / lam**2) / T
        return 72 * R**2 * log_factor / (lam**2 * T)
    raise ValueError(f"no theoretical bound for {algorithm!r}")


def has_bound(algorithm: str) -> bool:
    return algorithm in ("huber_uniform", "huber_known_mean", "huber_unknown_mean")


@dataclass(frozen=True)
class RateFit:
    """OLS fit of ``log(error)`` against ``log(T)``."""

    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r_squared: float
    slope_se: float

    def slope_ci(self, z: float = Z95) -> tuple[float, float]:
        return self.slope - z * self.slope_se, self.slope + z * self.slope_se


def rate_fit(points) -> RateFit:
    points = [(float(T), float(e)) for T, e in points]
    if len(points) < 3:
        raise ValueError("rate_fit needs at least 3 points")
    Ts = np.array([p[0] for p in points])
    errs = np.array([p[1] for p in points])
    if len(set(Ts.tolist())) != len(Ts):
        raise ValueError("T values must be distinct")
    if np.any(Ts <= 0) or np.any(errs <= 0):
        raise ValueError("T and errors must be positive")
    lx, ly = np.log(Ts), np.log(errs)
    xc = lx - lx.mean()
    yc = ly - ly.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ yc) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    ss_res = float(resid @ resid)
    ss_tot = float(yc @ yc)
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    slope_se = math.sqrt(ss_res / (len(points) - 2) / sxx)
    return RateFit(tuple(zip(lx.tolist(), ly.tolist())), slope, intercept, r2, slope_se)


@dataclass(frozen=True)
class GroupStats:
    mean: float
    half_width: float
    n: int

    @property
    def ci_defined(self) -> bool:
        return self.n >= 2

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width


def mean_ci(values, z: float = Z95) -> GroupStats:
    """Sample mean with normal-approximation half-width ``z * sd / sqrt(k)``.

    A single value has an undefined interval (``half_width`` is NaN).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    if v.size == 1:
        return GroupStats(float(v[0]), math.nan, 1)
    return GroupStats(float(v.mean()), float(z * v.std(ddof=1) / math.sqrt(v.size)), v.size)


def aggregate_runs(points, metric: str = "est_error") -> dict[tuple[str, float, int], GroupStats]:
    """Group metric points by ``(algorithm, alpha, T)`` and summarize ``metric``."""
    groups: dict[tuple[str, float, int], list[float]] = defaultdict(list)
    for p in points:
        groups[(p.algorithm, p.alpha, p.T)].append(getattr(p, metric))
    return {key: mean_ci(vals) for key, vals in groups.items()}


def metric_point(result: RunResult, spec: ProblemSpec, config: OptimizerConfig, seed: int,
                 n_mc: int = 100_000, mc_seed: int | None = None) -> MetricPoint:
    risk, risk_se = excess_risk_mc(result.estimate, spec, n_mc, seed if mc_seed is None else mc_seed)
    bound = None
    if has_bound(config.algorithm) and (config.algorithm == "huber_uniform" or spec.rho > 0):
        subgaussian = config.huber is not None and config.huber.derivation == "subgaussian"
        bound = theoretical_bound(config.algorithm, config.ball.D, config.huber.radius,
                                  spec.alpha, spec.rho, config.T, subgaussian)
    return MetricPoint(config.algorithm, spec.alpha, config.T, seed,
                       estimation_error(result.estimate, spec.w_star), risk, risk_se,
                       result.wall_time, bound)


# --------------------------------------------------------------------------
# demonstrations


def biased_ls_spec(C: float, alpha: float, w_star: float = 1.0, D: float = 10.0) -> ProblemSpec:
    """One-dimensional problem where least squares is pulled to ``w* + C/2``.

    ``x`` is uniform on ``{0, 2}``, no noise, and ``b = C/alpha`` with
    probability ``alpha`` (so ``E[b] = C``).  ``C = 0`` gives a clean problem.
    """
    corruption = (CorruptionModel(alpha, ScaledPointMass(C)) if C != 0
                  else CorruptionModel(0.0))
    return ProblemSpec(np.array([w_star]), D, FixedSupport([[0.0], [2.0]], [0.5, 0.5]),
                       ZeroNoise(), corruption, rho=1.0)


def demo_example_2_1(C: float = 10.0, alpha: float = 0.5, T: int = 100_000, seeds=range(15),
                     w_star: float = 1.0, D: float = 10.0) -> dict:
    """Least squares versus two-phase centered Huber SGD on matched streams."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    spec = biased_ls_spec(C, alpha, w_star, D)
    lam = (1 - alpha) * spec.rho
    ball = BallConstraint(D)
    l2_cfg = OptimizerConfig("l2_sgd", T, ball, lam=lam)
    hub_cfg = OptimizerConfig("huber_unknown_mean", T, ball, radius_bounded(D, 0.0), lam=lam)
    l2_est, hub_est = [], []
    for seed in seeds:
        stream = sample_stream(spec, seed, 2 * T)
        l2_est.append(l2_sgd(stream, l2_cfg).estimate[0])
        hub_est.append(huber_sgd_unknown_mean(stream, hub_cfg).estimate[0])
    l2_mean, hub_mean = float(np.mean(l2_est)), float(np.mean(hub_est))
    target = w_star + C / 2
    return {
        "w_star": w_star,
        "predicted_biased_optimum": target,
        "l2_estimate_mean": l2_mean,
        "huber_estimate_mean": hub_mean,
        "l2_distance_to_w_star": abs(l2_mean - w_star),
        "l2_distance_to_biased_optimum": abs(l2_mean - target),
        "huber_distance_to_w_star": abs(hub_mean - w_star),
        "huber_distance_to_biased_optimum": abs(hub_mean - target),
        "n_seeds": len(l2_est),
    }


def indistinguishable_pair(alpha: float = 0.5) -> tuple[ProblemSpec, ProblemSpec]:
    """Models with ``w* = -1`` and ``w* = +1``, ``x = 1``, no noise, and
    corruption ``-2 w*`` with probability ``alpha``."""
    feature = FixedSupport([[1.0]], [1.0])
    corruption = CorruptionModel(alpha, SignFlipOfClean(2.0))
    return tuple(ProblemSpec(np.array([w]), 1.0, feature, ZeroNoise(), corruption)
                 for w in (-1.0, 1.0))


def tv_distance(a, b) -> float:
    """Total-variation distance between the empirical laws of two samples."""
    a, b = np.asarray(a), np.asarray(b)
    support = np.union1d(a, b)
    pa = np.array([np.count_nonzero(a == v) for v in support]) / a.size
    pb = np.array([np.count_nonzero(b == v) for v in support]) / b.size
    return 0.5 * float(np.abs(pa - pb).sum())


def demo_indistinguishable(T: int = 100_000, seed: int = 0, alpha: float = 0.5) -> dict:
    """Empirical TV distance between the labels of the two models."""
    m1, m2 = indistinguishable_pair(alpha)
    y1 = sample_stream(m1, seed, T).y
    y2 = sample_stream(m2, seed + 1, T).y
    return {"T": T, "alpha": alpha, "tv_distance_empirical": tv_distance(y1, y2),
            "support": sorted(set(np.union1d(y1, y2).tolist()))}


def random_ball_points(d: int, D: float, k: int, seed: int) -> list[np.ndarray]:
    base = int(substream(seed, AUX).integers(0, 2**62))
    return [uniform_in_ball(d, D, base + i) for i in range(k)]


def demo_decomposition(spec: ProblemSpec | None = None, n_points: int = 20, n_mc: int = 100_000,
                       seed: int = 0, R: float | None = None, n_se: float = 4.0) -> dict:
    """Check ``L_R = (1 - alpha) F + alpha H`` at random points of the ball."""
    if spec is None:
        spec = default_decomposition_spec()
    if R is None:
        R = radius_bounded(spec.D, spec.sigma).radius
    rows = []
    for i, w in enumerate(random_ball_points(spec.d, spec.D, n_points, seed)):
        resid, se = decomposition_residual(w, spec, R, n_mc, seed + 10 * (i + 1))
        rows.append({"residual": resid, "se": se, "z": abs(resid) / se if se > 0 else 0.0})
    worst = max(r["z"] for r in rows)
    return {"R": R, "alpha": spec.alpha, "n_points": n_points, "n_mc": n_mc,
            "max_abs_z": worst, "passed": worst <= n_se, "rows": rows}


def default_decomposition_spec() -> ProblemSpec:
    d, D = 5, 1.0
    return ProblemSpec(uniform_in_ball(d, D, 0), D, UnitBoxNegative(d), UniformNoise(0.1),
                       CorruptionModel(0.3, GaussianCorruption(3.0)), rho=1 / 60)

"""Samplers for the contaminated linear model ``y = <w*, x> + eps + b``.

The corruption ``b`` is drawn by an oblivious adversary: it may depend on
the distributions and on ``w*`` but never on the realized ``(x, eps)``.
Features, noise and corruption each come from their own Philox sub-stream
keyed by ``(seed, role)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator, NamedTuple

import numpy as np

__all__ = [
    "CorruptionModel",
    "FeatureDistribution",
    "GaussianCorruption",
    "GaussianFeatures",
    "GaussianNoise",
    "DiscreteSymmetricNoise",
    "FixedSupport",
    "NoiseDistribution",
    "PointMass",
    "ProblemSpec",
    "Sample",
    "Samples",
    "ScaledPointMass",
    "SignedBasis",
    "SignFlipOfClean",
    "UniformNoise",
    "UnitBoxNegative",
    "ZeroNoise",
    "draw_corruption",
    "population_moments",
    "sample_stream",
    "substream",
    "uniform_in_ball",
]

FEATURES, NOISE, CORRUPTION, AUX = 1, 2, 3, 4


def substream(seed: int, role: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, role)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(role,))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# features


class FeatureDistribution:
    """Base class; subclasses define ``d``, ``sample``, ``mean`` and ``to_dict``."""

    kind: str
    bounded: bool = True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> np.ndarray:
        raise NotImplementedError

    def covariance(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UnitBoxNegative(FeatureDistribution):
    """Each coordinate Uniform[-1/sqrt(d), 0]; ``||x|| <= 1`` surely."""

    d: int
    kind = "unit_box_negative"

    def sample(self, rng, n):
        return rng.uniform(-1.0 / math.sqrt(self.d), 0.0, size=(n, self.d))

    def mean(self):
        return np.full(self.d, -0.5 / math.sqrt(self.d))

    def covariance(self):
        return np.eye(self.d) / (12.0 * self.d)

    def to_dict(self):
        return {"variant": self.kind, "d": self.d}


@dataclass(frozen=True)
class SignedBasis(FeatureDistribution):
    """Uniform over ``{+-e_1, ..., +-e_d}``: zero mean, covariance ``I/d``."""

    d: int
    kind = "signed_basis"

    def sample(self, rng, n):
        idx = rng.integers(0, self.d, size=n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        X = np.zeros((n, self.d))
        X[np.arange(n), idx] = sign
        return X

    def mean(self):
        return np.zeros(self.d)

    def covariance(self):
        return np.eye(self.d) / self.d

    def to_dict(self):
        return {"variant": self.kind, "d": self.d}


@dataclass(frozen=True, eq=False)
class FixedSupport(FeatureDistribution):
    """Arbitrary finite distribution over ``points`` with ``probs``."""

    points: np.ndarray
    probs: np.ndarray
    kind = "fixed_support"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        p = np.asarray(self.probs, dtype=np.float64)
        if pts.shape[0] != p.shape[0]:
            raise ValueError("points and probs must have the same length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "bounded", bool(np.max(np.linalg.norm(pts, axis=1)) <= 1.0))

    @property
    def d(self):
        return self.points.shape[1]

    def sample(self, rng, n):
        if len(self.probs) == 1:
            return np.repeat(self.points, n, axis=0)
        idx = rng.choice(len(self.probs), size=n, p=self.probs)
        return self.points[idx]

    def mean(self):
        return self.probs @ self.points

    def covariance(self):
        Z = self.points - self.mean()
        return (Z.T * self.probs) @ Z

    def to_dict(self):
        return {"variant": self.kind, "points": self.points.tolist(),
                "probs": self.probs.tolist()}

    def __eq__(self, other):
        return (isinstance(other, FixedSupport)
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.probs, other.probs))


@dataclass(frozen=True, eq=False)
class GaussianFeatures(FeatureDistribution):
    mean_vec: np.ndarray
    cov: np.ndarray
    kind = "gaussian"
    bounded = False

    def __post_init__(self):
        m = np.asarray(self.mean_vec, dtype=np.float64).ravel()
        c = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if c.shape != (m.size, m.size) or not np.allclose(c, c.T):
            raise ValueError("covariance must be a symmetric d x d matrix")
        # raises LinAlgError unless positive definite
        chol = np.linalg.cholesky(c)
        object.__setattr__(self, "mean_vec", m)
        object.__setattr__(self, "cov", c)
        object.__setattr__(self, "_chol", chol)

    @property
    def d(self):
        return self.mean_vec.size

    def sample(self, rng, n):
        return self.mean_vec + rng.standard_normal((n, self.d)) @ self._chol.T

    def mean(self):
        return self.mean_vec.copy()

    def covariance(self):
        return self.cov.copy()

    def to_dict(self):
        return {"variant": self.kind, "mean": self.mean_vec.tolist(),
                "covariance": self.cov.tolist()}

    def __eq__(self, other):
        return (isinstance(other, GaussianFeatures)
                and np.array_equal(self.mean_vec, other.mean_vec)
                and np.array_equal(self.cov, other.cov))


def feature_from_dict(data: dict[str, Any]) -> FeatureDistribution:
    variant = data.get("variant")
    if variant == "unit_box_negative":
        return UnitBoxNegative(int(data["d"]))
    if variant == "signed_basis":
        return SignedBasis(int(data["d"]))
    if variant == "fixed_support":
        return FixedSupport(np.asarray(data["points"], float), np.asarray(data["probs"], float))
    if variant == "gaussian":
        return GaussianFeatures(np.asarray(data["mean"], float), np.asarray(data["covariance"], float))
    raise ValueError(f"unknown feature variant {variant!r}")


# --------------------------------------------------------------------------
# noise


class NoiseDistribution:
    kind: str
    bound: float  # sure bound on |eps|; inf when unbounded

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformNoise(NoiseDistribution):
    sigma: float
    kind = "uniform_symmetric"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def bound(self):
        return self.sigma

    def sample(self, rng, n):
        return rng.uniform(-self.sigma, self.sigma, size=n)

    def to_dict(self):
        return {"variant": self.kind, "sigma": self.sigma}


@dataclass(frozen=True)
class ZeroNoise(NoiseDistribution):
    kind = "zero"
    bound = 0.0
    sigma = 0.0

    def sample(self, rng, n):
        return np.zeros(n)

    def to_dict(self):
        return {"variant": self.kind}


@dataclass(frozen=True)
class GaussianNoise(NoiseDistribution):
    """``N(0, sigma^2)``; sub-Gaussian with variance proxy ``sigma^2``."""

    sigma: float
    kind = "gaussian"
    bound = math.inf

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def sample(self, rng, n):
        return self.sigma * rng.standard_normal(n)

    def to_dict(self):
        return {"variant": self.kind, "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class DiscreteSymmetricNoise(NoiseDistribution):
    values: np.ndarray
    probs: np.ndarray
    kind = "discrete_symmetric"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        p = np.asarray(self.probs, dtype=np.float64).ravel()
        if v.shape != p.shape or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("values/probs must match and probs must sum to 1")
        if abs(float(p @ v)) > 1e-12:
            raise ValueError("discrete noise must have zero mean")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @property
    def bound(self):
        return float(np.max(np.abs(self.values)))

    @property
    def sigma(self):
        return self.bound

    def sample(self, rng, n):
        return self.values[rng.choice(self.values.size, size=n, p=self.probs)]

    def to_dict(self):
        return {"variant": self.kind, "values": self.values.tolist(),
                "probs": self.probs.tolist()}

    def __eq__(self, other):
        return (isinstance(other, DiscreteSymmetricNoise)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.probs, other.probs))


def noise_from_dict(data: dict[str, Any]) -> NoiseDistribution:
    variant = data.get("variant")
    if variant == "uniform_symmetric":
        return UniformNoise(float(data["sigma"]))
    if variant == "zero":
        return ZeroNoise()
    if variant == "gaussian":
        return GaussianNoise(float(data["sigma"]))
    if variant == "discrete_symmetric":
        return DiscreteSymmetricNoise(np.asarray(data["values"], float), np.asarray(data["probs"], float))
    raise ValueError(f"unknown noise variant {variant!r}")


# --------------------------------------------------------------------------
# corruption


@dataclass(frozen=True)
class PointMass:
    M: float
    kind = "point_mass"

    def __post_init__(self):
        if self.M == 0 or not math.isfinite(self.M):
            raise ValueError("point-mass corruption must be finite and nonzero")

    def sample(self, rng, n, alpha, clean_mean):
        return np.full(n, float(self.M))

    def to_dict(self):
        return {"variant": self.kind, "M": self.M}


@dataclass(frozen=True)
class ScaledPointMass:
    """``b = C / alpha`` whenever corrupted, so that ``E[b] = C``."""

    C: float
    kind = "scaled_point_mass"

    def __post_init__(self):
        if self.C == 0 or not math.isfinite(self.C):
            raise ValueError("C must be finite and nonzero")

    def sample(self, rng, n, alpha, clean_mean):
        return np.full(n, self.C / alpha)

    def to_dict(self):
        return {"variant": self.kind, "C": self.C}


@dataclass(frozen=True)
class SignFlipOfClean:
    """``b = -scale * <w*, E[x]>``: reflects the mean clean signal.

    With ``x = 1`` surely and ``scale = 2`` this sends ``y = w*`` to ``-w*``.
    Uses only the distribution and ``w*``, so it stays oblivious.
    """

    scale: float = 2.0
    kind = "sign_flip_of_clean"

    def sample(self, rng, n, alpha, clean_mean):
        value = -self.scale * clean_mean
        if value == 0:
            raise ValueError("sign-flip corruption is zero: <w*, E[x]> vanishes")
        return np.full(n, value)

    def to_dict(self):
        return {"variant": self.kind, "scale": self.scale}


@dataclass(frozen=True)
class GaussianCorruption:
    s: float
    kind = "gaussian"

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")

    def sample(self, rng, n, alpha, clean_mean):
        return self.s * rng.standard_normal(n)

    def to_dict(self):
        return {"variant": self.kind, "s": self.s}


def conditional_from_dict(data):
    variant = data.get("variant")
    table = {"point_mass": (PointMass, "M"), "scaled_point_mass": (ScaledPointMass, "C"),
             "sign_flip_of_clean": (SignFlipOfClean, "scale"), "gaussian": (GaussianCorruption, "s")}
    if variant not in table:
        raise ValueError(f"unknown corruption variant {variant!r}")
    cls, key = table[variant]
    return cls(float(data[key])) if key in data else cls()


@dataclass(frozen=True)
class CorruptionModel:
    """Bernoulli(alpha) gate followed by a draw from ``conditional``."""

    alpha: float
    conditional: Any = field(default_factory=lambda: PointMass(1e5))

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")

    def sample(self, rng, n, clean_mean=0.0):
        """Return ``(b, corrupted)`` arrays of length ``n``."""
        gate = rng.random(n) < self.alpha
        if self.alpha == 0.0:
            return np.zeros(n), gate
        values = self.conditional.sample(rng, n, self.alpha, clean_mean)
        return np.where(gate, values, 0.0), gate

    def sample_conditional(self, rng, n, clean_mean=0.0):
        """Draws of ``b`` given ``b != 0`` (the gate forced open)."""
        alpha = self.alpha if self.alpha > 0 else 1.0
        return self.conditional.sample(rng, n, alpha, clean_mean)

    def to_dict(self):
        return {"alpha": self.alpha, "conditional": self.conditional.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["alpha"]), conditional_from_dict(data["conditional"]))


def draw_corruption(model: CorruptionModel, rng: np.random.Generator, clean_mean: float = 0.0) -> float:
    """One corruption draw: 0 with probability ``1 - alpha``."""
    if rng.random() >= model.alpha:
        return 0.0
    return float(model.conditional.sample(rng, 1, model.alpha, clean_mean)[0])


# --------------------------------------------------------------------------
# problem and samples


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Complete generative description of one regression problem."""

    w_star: np.ndarray
    D: float
    feature: FeatureDistribution
    noise: NoiseDistribution
    corruption: CorruptionModel
    rho: float = 0.0
    known_mean: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.w_star, dtype=np.float64).ravel()
        object.__setattr__(self, "w_star", w)
        if w.size != self.feature.d:
            raise ValueError(f"w_star has dimension {w.size}, features have {self.feature.d}")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if np.linalg.norm(w) > self.D * (1 + 1e-12):
            raise ValueError(f"||w_star|| = {np.linalg.norm(w):.6g} exceeds D = {self.D}")
        if not self.rho >= 0:
            raise ValueError("rho must be nonnegative")
        if self.known_mean is not None:
            m = np.asarray(self.known_mean, dtype=np.float64).ravel()
            if m.size != w.size:
                raise ValueError("known_mean has the wrong dimension")
            object.__setattr__(self, "known_mean", m)

    @property
    def d(self) -> int:
        return self.w_star.size

    @property
    def alpha(self) -> float:
        return self.corruption.alpha

    @property
    def sigma(self) -> float:
        return float(getattr(self.noise, "sigma", 0.0))

    def clean_mean(self) -> float:
        """``<w*, E[x]>``, the only quantity sign-flip corruption needs."""
        return float(self.w_star @ self.feature.mean())

    def with_alpha(self, alpha: float) -> "ProblemSpec":
        corruption = CorruptionModel(alpha, self.corruption.conditional)
        return ProblemSpec(self.w_star, self.D, self.feature, self.noise, corruption,
                           self.rho, self.known_mean)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "d": self.d,
            "w_star": self.w_star.tolist(),
            "D": self.D,
            "feature": self.feature.to_dict(),
            "noise": self.noise.to_dict(),
            "corruption": self.corruption.to_dict(),
            "rho": self.rho,
        }
        if self.known_mean is not None:
            out["known_mean"] = self.known_mean.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProblemSpec":
        feature = feature_from_dict(data["feature"])
        D = float(data["D"])
        w = data["w_star"]
        if isinstance(w, dict):
            # {"seed": s} draws w* uniformly from the D-ball and freezes it
            w = uniform_in_ball(feature.d, D, int(w["seed"]))
        if "d" in data and int(data["d"]) != feature.d:
            raise ValueError(f"d = {data['d']} disagrees with the feature dimension {feature.d}")
        return cls(
            w_star=np.asarray(w, dtype=np.float64),
            D=D,
            feature=feature,
            noise=noise_from_dict(data["noise"]),
            corruption=CorruptionModel.from_dict(data["corruption"]),
            rho=float(data.get("rho", 0.0)),
            known_mean=data.get("known_mean"),
        )

    def __eq__(self, other):
        return isinstance(other, ProblemSpec) and self.to_dict() == other.to_dict()


def uniform_in_ball(d: int, D: float, seed: int) -> np.ndarray:
    """Uniform draw from the radius-``D`` ball in ``R^d``."""
    rng = substream(seed, AUX)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return D * rng.random() ** (1.0 / d) * v


class Sample(NamedTuple):
    x: np.ndarray
    y: float
    corrupted: bool


@dataclass(frozen=True, eq=False)
class Samples:
    """A finite stream of observations stored column-wise.

    ``corrupted`` and ``noise`` are ground truth for evaluation; learners
    should only look at :meth:`view`.
    """

    x: np.ndarray
    y: np.ndarray
    corrupted: np.ndarray
    noise: np.ndarray | None = None

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, i) -> Sample:
        return Sample(self.x[i], float(self.y[i]), bool(self.corrupted[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def view(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x, self.y


def sample_stream(spec: ProblemSpec, seed: int, n: int) -> Samples:
    """Draw ``n`` i.i.d. samples from the contaminated model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    X = np.ascontiguousarray(spec.feature.sample(substream(seed, FEATURES), n), dtype=np.float64)
    eps = spec.noise.sample(substream(seed, NOISE), n)
    b, gate = spec.corruption.sample(substream(seed, CORRUPTION), n, spec.clean_mean())
    y = X @ spec.w_star + eps + b
    return Samples(X, y, gate, eps)


def population_moments(spec: ProblemSpec, n_mc: int, seed: int) -> tuple[np.ndarray, float]:
    """Monte-Carlo feature mean and smallest covariance eigenvalue."""
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    X = spec.feature.sample(substream(seed, FEATURES), n_mc)
    mean = X.mean(axis=0)
    Z = X - mean
    cov = Z.T @ Z / n_mc
    return mean, float(np.linalg.eigvalsh(cov)[0])

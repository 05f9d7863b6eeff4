"""Projected SGD variants for robust linear regression.

All learners start from ``w_1 = 0``, project every iterate onto the
ball ``||w|| <= D`` and see only ``(x, y)``.  The per-step loop lives in
:mod:`robustreg.backend`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import backend
from .model_core import BallConstraint, HuberParams

__all__ = [
    "ALGORITHMS",
    "OptimizerConfig",
    "RunResult",
    "StreamExhausted",
    "huber_sgd_known_mean",
    "huber_sgd_noncentered",
    "huber_sgd_streaming_mean",
    "huber_sgd_uniform",
    "huber_sgd_unknown_mean",
    "l2_sgd",
    "run",
    "suffix_average",
]

ALGORITHMS = (
    "huber_uniform",
    "huber_known_mean",
    "huber_unknown_mean",
    "huber_streaming_mean",
    "huber_noncentered",
    "l2_sgd",
)


class StreamExhausted(RuntimeError):
    def __init__(self, needed, available):
        super().__init__(f"stream exhausted: needed {needed} samples, only {available} available "
                         f"({available} consumed)")
        self.needed = needed
        self.available = available


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one run.

    ``lam`` is the strong-convexity parameter ``(1 - alpha) * rho`` used by
    the ``1/(lam t)`` step rule; ``eta0`` is the base of the ``eta0/t`` rule
    and defaults to ``1/lam``.  ``trace_stride=None`` records no trace.
    """

    algorithm: str
    T: int
    ball: BallConstraint
    huber: HuberParams | None = None
    lam: float | None = None
    eta0: float | None = None
    trace_stride: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if self.algorithm != "l2_sgd" and self.huber is None:
            raise ValueError(f"{self.algorithm} needs Huber parameters")
        if self.trace_stride is not None and self.trace_stride < 1:
            raise ValueError("trace_stride must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.eta0 is not None and not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")

    @property
    def base_step(self) -> float:
        """``eta0`` for the ``eta0/t`` rule; falls back to ``1/lam``."""
        if self.eta0 is not None:
            return self.eta0
        if self.lam is None:
            raise ValueError(f"{self.algorithm} needs lambda > 0 or eta0 > 0")
        return 1.0 / self.lam

    def with_T(self, T: int) -> "OptimizerConfig":
        return replace(self, T=T)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"algorithm": self.algorithm, "T": self.T,
                               "ball": {"D": self.ball.D}}
        if self.huber is not None:
            out["huber"] = self.huber.to_dict()
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.eta0 is not None:
            out["eta0"] = self.eta0
        if self.trace_stride is not None:
            out["trace_stride"] = self.trace_stride
        return out


@dataclass(eq=False)
class RunResult:
    estimate: np.ndarray
    samples_consumed: int
    wall_time: float
    trace_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    trace_w: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    center: np.ndarray | None = None
    max_grad_norm: float = 0.0

    @property
    def trace(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.trace_t.tolist(), self.trace_w))


def suffix_average(iterates) -> np.ndarray:
    """Mean of the last ``ceil(n/2)`` of ``n`` iterates."""
    W = np.asarray(iterates, dtype=np.float64)
    if W.shape[0] == 0:
        raise ValueError("suffix_average needs at least one iterate")
    n = W.shape[0]
    return W[n // 2:].mean(axis=0)


def _arrays(stream):
    if hasattr(stream, "view"):
        X, y = stream.view()
    else:
        X, y = stream
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X, np.asarray(y, dtype=np.float64)


def _take(X, y, start, n):
    if X.shape[0] < start + n:
        raise StreamExhausted(start + n, X.shape[0])
    return np.ascontiguousarray(X[start:start + n]), np.ascontiguousarray(y[start:start + n])


def _suffix_start(T):
    # first 1-based index of the last ceil(T/2) iterates
    return T // 2 + 1


def _run(X, y, config, center, streaming, R, eta, decay, avg_start, consumed, offset=0):
    stride = config.trace_stride or 0
    if center is None:
        center = np.zeros(X.shape[1])
    center = np.ascontiguousarray(center, dtype=np.float64)
    if center.shape != (X.shape[1],):
        raise ValueError(f"center has shape {center.shape}, features have dimension {X.shape[1]}")
    t0 = time.perf_counter()
    estimate, trace_w, max_g = backend.sgd_path(
        X, y, center, streaming, float(R), float(config.ball.D), float(eta), decay,
        avg_start, stride)
    elapsed = time.perf_counter() - t0
    trace_t = np.arange(1, trace_w.shape[0] + 1, dtype=np.int64) * stride
    if streaming:
        center = X[:-1].mean(axis=0) if X.shape[0] > 1 else np.zeros(X.shape[1])
    return RunResult(estimate, consumed, elapsed, trace_t, trace_w, center, max_g)


def _require_lambda(config):
    if config.lam is None or not config.lam > 0:
        raise ValueError(f"{config.algorithm} requires lambda > 0")
    return config.lam


def huber_sgd_uniform(stream, config: OptimizerConfig) -> RunResult:
    """Constant step ``D/(R sqrt(T))``, uncentered features, uniform average."""
    X, y = _take(*_arrays(stream), 0, config.T)
    R, T = config.huber.radius, config.T
    eta = config.ball.D / (R * math.sqrt(T))
    return _run(X, y, config, None, False, R, eta, False, 1, T)


def huber_sgd_known_mean(stream, config: OptimizerConfig, mean) -> RunResult:
    """Step ``1/(lam t)`` on features centered at the true mean, suffix average."""
    lam = _require_lambda(config)
    X, y = _take(*_arrays(stream), 0, config.T)
    return _run(X, y, config, mean, False, config.huber.radius, 1.0 / lam, True,
                _suffix_start(config.T), config.T)


def huber_sgd_unknown_mean(stream, config: OptimizerConfig) -> RunResult:
    """Two phases: the first ``T`` samples estimate the feature mean (labels
    unused), the next ``T`` run the known-mean update with that estimate."""
    lam = _require_lambda(config)
    X, y = _arrays(stream)
    T = config.T
    Z, _ = _take(X, y, 0, T)
    mu = Z.mean(axis=0)
    X2, y2 = _take(X, y, T, T)
    return _run(X2, y2, config, mu, False, config.huber.radius, 1.0 / lam, True,
                _suffix_start(T), 2 * T)


def huber_sgd_streaming_mean(stream, config: OptimizerConfig) -> RunResult:
    """Single pass; step ``t`` centers at the mean of ``x_1 .. x_{t-1}``."""
    _require_lambda(config)
    X, y = _take(*_arrays(stream), 0, config.T)
    return _run(X, y, config, None, True, config.huber.radius, config.base_step, True,
                _suffix_start(config.T), config.T)


def huber_sgd_noncentered(stream, config: OptimizerConfig) -> RunResult:
    """Huber SGD with step ``eta0/t`` and no centering."""
    X, y = _take(*_arrays(stream), 0, config.T)
    return _run(X, y, config, None, False, config.huber.radius, config.base_step, True,
                _suffix_start(config.T), config.T)


def l2_sgd(stream, config: OptimizerConfig) -> RunResult:
    """Projected SGD on the squared loss, step ``eta0/t``, suffix average."""
    X, y = _take(*_arrays(stream), 0, config.T)
    return _run(X, y, config, None, False, math.inf, config.base_step, True,
                _suffix_start(config.T), config.T)


def samples_needed(config: OptimizerConfig) -> int:
    return 2 * config.T if config.algorithm == "huber_unknown_mean" else config.T


def run(stream, config: OptimizerConfig, mean=None) -> RunResult:
    """Dispatch on ``config.algorithm``; ``mean`` is used by ``huber_known_mean``."""
    algo = config.algorithm
    if algo == "huber_uniform":
        return huber_sgd_uniform(stream, config)
    if algo == "huber_known_mean":
        if mean is None:
            raise ValueError("huber_known_mean needs the feature mean")
        return huber_sgd_known_mean(stream, config, mean)
    if algo == "huber_unknown_mean":
        return huber_sgd_unknown_mean(stream, config)
    if algo == "huber_streaming_mean":
        return huber_sgd_streaming_mean(stream, config)
    if algo == "huber_noncentered":
        return huber_sgd_noncentered(stream, config)
    return l2_sgd(stream, config)

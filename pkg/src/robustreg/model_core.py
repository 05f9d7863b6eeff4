"""Huber loss, clipping, ball projection and Huber radius rules.

Scalar functions accept numpy arrays and broadcast; everything runs in
float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "BallConstraint",
    "HuberParams",
    "huber_clip",
    "huber_gradient",
    "huber_gradient_batch",
    "huber_loss",
    "project_ball",
    "radius_bounded",
    "radius_subgaussian",
]

DERIVATIONS = ("bounded", "subgaussian", "explicit")


@dataclass(frozen=True)
class HuberParams:
    """Huber radius together with the rule that produced it.

    ``inputs`` records the arguments of the rule (``D``, ``sigma`` and, for
    the sub-Gaussian rule, ``kappa``, ``rho``, ``T``).
    """

    radius: float
    derivation: str = "explicit"
    inputs: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.derivation not in DERIVATIONS:
            raise ValueError(f"unknown radius derivation {self.derivation!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"Huber radius must be positive and finite, got {self.radius}")
        if self.derivation == "bounded":
            expected = 6.0 * self.inputs["D"] + self.inputs["sigma"]
            if self.radius != expected:
                raise ValueError("bounded radius must equal 6*D + sigma")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"derivation": self.derivation}
        if self.derivation == "explicit":
            out["radius"] = self.radius
        out.update(self.inputs)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "HuberParams":
        data = dict(data)
        derivation = data.pop("derivation", "explicit")
        if derivation == "bounded":
            return radius_bounded(data["D"], data.get("sigma", 0.0))
        if derivation == "subgaussian":
            return radius_subgaussian(
                data["D"], data["sigma"], data["kappa"], data["rho"], data["T"]
            )
        if derivation == "explicit":
            return cls(float(data["radius"]), "explicit")
        raise ValueError(f"unknown radius derivation {derivation!r}")


@dataclass(frozen=True)
class BallConstraint:
    """Feasible set ``{w : ||w|| <= D}``."""

    D: float

    def __post_init__(self):
        if not (math.isfinite(self.D) and self.D > 0):
            raise ValueError(f"ball radius D must be positive and finite, got {self.D}")

    def project(self, u):
        return project_ball(u, self.D)


def _check_radius(R):
    if not (np.isfinite(R) and R > 0):
        raise ValueError(f"Huber radius must be positive and finite, got {R}")


def _check_finite(s, name="s"):
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} must be finite")


def huber_loss(s, R):
    """Huber loss: ``s**2/2`` for ``|s| <= R``, ``R*(|s| - R/2)`` beyond."""
    _check_radius(R)
    s = np.asarray(s, dtype=np.float64)
    _check_finite(s)
    a = np.abs(s)
    out = np.where(a <= R, 0.5 * s * s, R * (a - 0.5 * R))
    return out[()] if out.ndim == 0 else out


def huber_clip(s, R):
    """Derivative of the Huber loss, i.e. ``s`` truncated to ``[-R, R]``."""
    _check_radius(R)
    s = np.asarray(s, dtype=np.float64)
    _check_finite(s)
    out = np.minimum(R, np.maximum(s, -R))
    return out[()] if out.ndim == 0 else out


def huber_gradient(w, x, y, center, R):
    """Gradient in ``w`` of ``huber_loss(<w, x - center> - y, R)``.

    At ``|residual| == R`` the clip formula is used, which coincides with the
    derivative from the quadratic side.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if not (w.shape == x.shape == center.shape and w.ndim == 1):
        raise ValueError(
            f"dimension mismatch: w{w.shape}, x{x.shape}, center{center.shape}"
        )
    z = x - center
    return huber_clip(float(w @ z) - float(y), R) * z


def huber_gradient_batch(w, X, y, center, R):
    """Row-wise :func:`huber_gradient` for ``X`` of shape ``(n, d)``."""
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Z = X - np.asarray(center, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != w.shape[-1]:
        raise ValueError("dimension mismatch between w, X and center")
    if w.ndim == 1:
        residual = Z @ w - y
    else:
        residual = np.einsum("ij,ij->i", Z, w) - y
    return huber_clip(residual, R)[:, None] * Z


def project_ball(u, D):
    """Euclidean projection of ``u`` onto the ball of radius ``D``."""
    if not (np.isfinite(D) and D > 0):
        raise ValueError(f"ball radius D must be positive and finite, got {D}")
    u = np.asarray(u, dtype=np.float64)
    _check_finite(u, "u")
    norm = float(np.linalg.norm(u))
    if norm <= D:
        return u.copy()
    return (D / norm) * u


def radius_bounded(D, sigma):
    """Radius ``6*D + sigma`` keeping clean residuals in the quadratic zone.

    ``2*D + sigma`` is already enough for uncentered features; the larger
    constant also covers centered features.  Use ``HuberParams(r)`` for any
    other explicit choice.
    """
    if not D > 0:
        raise ValueError(f"D must be positive, got {D}")
    if not sigma >= 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    D, sigma = float(D), float(sigma)
    return HuberParams(6.0 * D + sigma, "bounded", {"D": D, "sigma": sigma})


def _subgaussian_term(scale, rho, T):
    return math.sqrt(8.0 * scale**2 * math.log((21.0 * scale / math.sqrt(rho) + 8.0) * T))


def radius_subgaussian(D, sigma, kappa, rho, T):
    """Radius for sub-Gaussian features (proxy ``kappa``) and noise (``sigma``).

    ``R = 2*sqrt(8 k^2 log((21 k/sqrt(rho) + 8) T)) * D
    + sqrt(8 s^2 log((21 s/sqrt(rho) + 8) T))``; grows like ``sqrt(log T)``.
    """
    for name, v in (("D", D), ("sigma", sigma), ("kappa", kappa), ("rho", rho)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be strictly positive, got {v}")
    if int(T) != T or T < 2:
        raise ValueError(f"T must be an integer >= 2, got {T}")
    radius = 2.0 * _subgaussian_term(kappa, rho, T) * D + _subgaussian_term(sigma, rho, T)
    inputs = {"D": float(D), "sigma": float(sigma), "kappa": float(kappa),
              "rho": float(rho), "T": int(T)}
    return HuberParams(radius, "subgaussian", inputs)

"""Robust linear regression with Huber-loss SGD under oblivious contamination."""
from . import backend
from .data_gen import ProblemSpec, sample_stream
from .model_core import (BallConstraint, HuberParams, huber_clip, huber_gradient,
                         huber_loss, project_ball, radius_bounded, radius_subgaussian)
from .optimizers import OptimizerConfig, RunResult, run

__all__ = [
    "BallConstraint",
    "HuberParams",
    "OptimizerConfig",
    "ProblemSpec",
    "RunResult",
    "backend",
    "huber_clip",
    "huber_gradient",
    "huber_loss",
    "project_ball",
    "radius_bounded",
    "radius_subgaussian",
    "run",
    "sample_stream",
]

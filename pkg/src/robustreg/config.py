"""Experiment configuration files (YAML).

Top-level keys: ``spec``, ``algorithms``, ``t_grid``, ``alphas``,
``repeats``, ``base_seed``, ``n_mc``, ``output_path`` and the optional
``record_wall_time`` (default true; false writes ``wall_ms`` as 0 so that
reruns are byte-identical).  Validation errors carry the line number of the
offending key.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from .data_gen import CorruptionModel, ProblemSpec, feature_from_dict, noise_from_dict
from .model_core import BallConstraint, HuberParams, radius_bounded, radius_subgaussian
from .optimizers import ALGORITHMS, OptimizerConfig

TOP_KEYS = {"spec", "algorithms", "t_grid", "alphas", "repeats", "base_seed", "n_mc",
            "output_path", "record_wall_time"}
TEMPLATE_KEYS = {"algorithm", "huber", "ball", "lambda", "eta0", "trace_stride"}
SEED_DOMAIN = b"robustreg.seed.v1"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class _PathError(Exception):
    def __init__(self, path, message):
        super().__init__(message)
        self.path = tuple(path)
        self.message = message


@dataclass(frozen=True)
class AlgorithmTemplate:
    """Per-algorithm settings; unset values are filled in per grid cell.

    ``huber`` defaults to the bounded rule on the problem's ``D`` and noise
    scale; ``lam`` defaults to ``(1 - alpha) * rho``; ``eta0`` to ``1/lam``.
    """

    algorithm: str
    huber: dict[str, Any] | None = None
    D: float | None = None
    lam: float | None = None
    eta0: float | None = None
    trace_stride: int | None = None

    def resolve(self, spec: ProblemSpec, T: int) -> OptimizerConfig:
        D = self.D if self.D is not None else spec.D
        huber = None
        if self.algorithm != "l2_sgd":
            huber = resolve_huber(self.huber, D, spec, T)
        lam = self.lam
        if lam is None and spec.rho > 0:
            lam = (1 - spec.alpha) * spec.rho
        return OptimizerConfig(self.algorithm, T, BallConstraint(D), huber, lam, self.eta0,
                               self.trace_stride)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"algorithm": self.algorithm}
        if self.huber is not None:
            out["huber"] = dict(self.huber)
        if self.D is not None:
            out["ball"] = {"D": self.D}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.eta0 is not None:
            out["eta0"] = self.eta0
        if self.trace_stride is not None:
            out["trace_stride"] = self.trace_stride
        return out


def resolve_huber(data, D, spec, T) -> HuberParams:
    data = dict(data or {"derivation": "bounded"})
    derivation = data.get("derivation", "bounded")
    if derivation == "bounded":
        return radius_bounded(data.get("D", D), data.get("sigma", spec.sigma))
    if derivation == "subgaussian":
        return radius_subgaussian(data.get("D", D), data.get("sigma", spec.sigma),
                                  data["kappa"], data.get("rho", spec.rho), data.get("T", T))
    if derivation == "explicit":
        return HuberParams(float(data["radius"]), "explicit")
    raise ValueError(f"unknown radius derivation {derivation!r}")


@dataclass(eq=False)
class ExperimentConfig:
    spec: ProblemSpec
    algorithms: list[AlgorithmTemplate]
    t_grid: list[int]
    alphas: list[float]
    repeats: int = 1
    base_seed: int = 0
    n_mc: int = 100_000
    output_path: str = "results.csv"
    record_wall_time: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "algorithms": [a.to_dict() for a in self.algorithms],
            "t_grid": list(self.t_grid),
            "alphas": list(self.alphas),
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "n_mc": self.n_mc,
            "output_path": self.output_path,
            "record_wall_time": self.record_wall_time,
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()


def derive_seed(base_seed: int, algorithm_index: int, algorithm: str, alpha_index: int,
                t_index: int, repeat: int) -> int:
    """Stable 64-bit seed for one grid cell.

    BLAKE2b-64 of a domain tag, the base seed (u64), the algorithm's list
    position and name, and the alpha/T/repeat indices (u32 each).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(SEED_DOMAIN)
    h.update(struct.pack("<Q", int(base_seed) & 0xFFFFFFFFFFFFFFFF))
    h.update(struct.pack("<I", algorithm_index))
    h.update(algorithm.encode())
    h.update(struct.pack("<III", alpha_index, t_index, repeat))
    return int.from_bytes(h.digest(), "little")


# --------------------------------------------------------------------------
# parsing


def _line_index(text: str) -> dict[tuple, int]:
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                lines[path + (key,)] = k.start_mark.line + 1
                walk(v, path + (key,))
                lines[path + (key,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


def _require(data, key, path, kind=None):
    if not isinstance(data, dict) or key not in data:
        raise _PathError(path, f"missing required key {key!r}")
    value = data[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise _PathError(path + (key,), f"{key!r} has the wrong type")
    return value


def _number(data, key, path, default=None):
    if key not in data:
        if default is None:
            raise _PathError(path, f"missing required key {key!r}")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _PathError(path + (key,), f"{key!r} must be a number")
    return v


def _parse_spec(data, path=("spec",)) -> ProblemSpec:
    if not isinstance(data, dict):
        raise _PathError(path, "spec must be a mapping")
    for key, fn in (("feature", feature_from_dict), ("noise", noise_from_dict),
                    ("corruption", CorruptionModel.from_dict)):
        sub = _require(data, key, path, dict)
        try:
            fn(sub)
        except (ValueError, KeyError, TypeError, np.linalg.LinAlgError) as exc:
            raise _PathError(path + (key,), f"invalid {key}: {_describe(exc)}") from None
    _number(data, "D", path)
    w = _require(data, "w_star", path)
    if isinstance(w, dict) and not isinstance(w.get("seed"), int):
        raise _PathError(path + ("w_star",), "w_star must be a list or {seed: <int>}")
    try:
        return ProblemSpec.from_dict(data)
    except (ValueError, KeyError, TypeError) as exc:
        msg = _describe(exc)
        key = "w_star" if "w_star" in msg else ("rho" if "rho" in msg else "d" if msg.startswith("d ") else None)
        raise _PathError(path + ((key,) if key else ()), f"invalid spec: {msg}") from None


def _describe(exc):
    if isinstance(exc, KeyError):
        return f"missing key {exc.args[0]!r}"
    return str(exc)


def _parse_template(data, path) -> AlgorithmTemplate:
    if not isinstance(data, dict):
        raise _PathError(path, "algorithm entry must be a mapping")
    unknown = set(data) - TEMPLATE_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _PathError(path + (key,), f"unknown algorithm key {key!r}")
    name = _require(data, "algorithm", path, str)
    if name not in ALGORITHMS:
        raise _PathError(path + ("algorithm",), f"unknown algorithm {name!r}; expected one of {', '.join(ALGORITHMS)}")
    huber = data.get("huber")
    if huber is not None:
        if not isinstance(huber, dict):
            raise _PathError(path + ("huber",), "huber must be a mapping")
        derivation = huber.get("derivation", "bounded")
        if derivation not in ("bounded", "subgaussian", "explicit"):
            raise _PathError(path + ("huber", "derivation"), f"unknown radius derivation {derivation!r}")
        if derivation == "explicit" and "radius" not in huber:
            raise _PathError(path + ("huber",), "explicit derivation needs 'radius'")
        if derivation == "subgaussian" and "kappa" not in huber:
            raise _PathError(path + ("huber",), "subgaussian derivation needs 'kappa'")
    D = None
    if "ball" in data:
        ball = data["ball"]
        if not isinstance(ball, dict):
            raise _PathError(path + ("ball",), "ball must be a mapping with key D")
        D = float(_number(ball, "D", path + ("ball",)))
        if not D > 0:
            raise _PathError(path + ("ball", "D"), "D must be positive")
    vals = {}
    for key in ("lambda", "eta0"):
        if key in data and data[key] is not None:
            v = _number(data, key, path)
            if not v > 0:
                raise _PathError(path + (key,), f"{key} must be positive")
            vals[key] = float(v)
    stride = data.get("trace_stride")
    if stride is not None and (isinstance(stride, bool) or not isinstance(stride, int) or stride < 1):
        raise _PathError(path + ("trace_stride",), "trace_stride must be a positive integer")
    return AlgorithmTemplate(name, huber, D, vals.get("lambda"), vals.get("eta0"), stride)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded config mapping; raises ``_PathError``."""
    if not isinstance(data, dict):
        raise _PathError((), "config must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _PathError((key,), f"unknown top-level key {key!r}")
    spec = _parse_spec(_require(data, "spec", ()))
    algos = _require(data, "algorithms", (), list)
    if not algos:
        raise _PathError(("algorithms",), "algorithms must not be empty")
    templates = [_parse_template(a, ("algorithms", i)) for i, a in enumerate(algos)]

    t_grid = _require(data, "t_grid", (), list)
    if not t_grid or not all(isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in t_grid):
        raise _PathError(("t_grid",), "t_grid must be a nonempty list of positive integers")
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise _PathError(("t_grid",), "t_grid must be strictly increasing")

    alphas = _require(data, "alphas", (), list)
    if not alphas:
        raise _PathError(("alphas",), "alphas must not be empty")
    for i, a in enumerate(alphas):
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not 0 <= a < 1:
            raise _PathError(("alphas", i), "each alpha must lie in [0, 1)")
    for tpl_i, tpl in enumerate(templates):
        for a in alphas:
            probe = spec.with_alpha(float(a))
            if tpl.algorithm in ("huber_known_mean", "huber_unknown_mean", "huber_streaming_mean") \
                    and tpl.lam is None and not probe.rho > 0:
                raise _PathError(("algorithms", tpl_i), f"{tpl.algorithm} needs lambda or spec.rho > 0")
            if tpl.algorithm in ("huber_noncentered", "l2_sgd") and tpl.eta0 is None \
                    and tpl.lam is None and not probe.rho > 0:
                raise _PathError(("algorithms", tpl_i), f"{tpl.algorithm} needs eta0, lambda or spec.rho > 0")

    repeats = data.get("repeats", 1)
    if isinstance(repeats, bool) or not isinstance(repeats, int) or repeats < 1:
        raise _PathError(("repeats",), "repeats must be a positive integer")
    base_seed = data.get("base_seed", 0)
    if isinstance(base_seed, bool) or not isinstance(base_seed, int) or not 0 <= base_seed < 2**64:
        raise _PathError(("base_seed",), "base_seed must be an integer in [0, 2^64)")
    n_mc = data.get("n_mc", 100_000)
    if isinstance(n_mc, bool) or not isinstance(n_mc, int) or n_mc < 1000:
        raise _PathError(("n_mc",), "n_mc must be an integer >= 1000")
    output_path = data.get("output_path", "results.csv")
    if not isinstance(output_path, str) or not output_path:
        raise _PathError(("output_path",), "output_path must be a nonempty string")
    record = data.get("record_wall_time", True)
    if not isinstance(record, bool):
        raise _PathError(("record_wall_time",), "record_wall_time must be true or false")
    return ExperimentConfig(spec, templates, list(t_grid), [float(a) for a in alphas], repeats,
                            base_seed, n_mc, output_path, record)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark is not None else None) from None
    try:
        return parse_config(data)
    except _PathError as exc:
        path = exc.path
        while path and path not in lines:
            path = path[:-1]
        raise ConfigError(exc.message, lines.get(path, 1)) from None


def load(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())

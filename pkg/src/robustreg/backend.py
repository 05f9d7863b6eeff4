"""Kernel backend selection.

The compiled ``_sgd_ext`` is used when importable; otherwise, or when the
environment variable ``ROBUSTREG_BACKEND=python`` is set, the pure-Python
loop in ``_sgd_py`` is used.  ``NAME`` reports the active choice.
"""
import os

from . import _sgd_py

BACKENDS = {"python": _sgd_py.sgd_path}

try:
    from . import _sgd_ext
except ImportError:  # extension not built
    _sgd_ext = None
else:
    BACKENDS["cython"] = _sgd_ext.sgd_path

_requested = os.environ.get("ROBUSTREG_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"ROBUSTREG_BACKEND must be 'python' or 'cython', got {_requested!r}")
if _requested == "cython" and _sgd_ext is None:
    raise ImportError("ROBUSTREG_BACKEND=cython but the extension is not built")

NAME = _requested or ("cython" if _sgd_ext is not None else "python")
sgd_path = BACKENDS[NAME]

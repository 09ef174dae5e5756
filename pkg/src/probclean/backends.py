"""Compute-backend selection.

The per-batch forward/backward/Adam step is the hot path, so it exists
twice: a Cython extension (``probclean._kernels``) and a pure-numpy
fallback with identical semantics.  The extension is used when it imported
cleanly; set ``PROBCLEAN_BACKEND=numpy`` or ``=compiled`` to force a choice.
``benchmarks/bench_backends.py`` compares the two.
"""

from __future__ import annotations

import os

from . import _backend_numpy

_FORCED = os.environ.get("PROBCLEAN_BACKEND", "").strip().lower()

try:
    from . import _kernels as _backend_compiled

    for _fn in ("forward", "backward", "adam_step"):
        if not hasattr(_backend_compiled, _fn):
            _backend_compiled = None
            break
except ImportError:  # extension not built; the numpy path is always available
    _backend_compiled = None

if _FORCED in ("numpy", "python"):
    _active = _backend_numpy
elif _FORCED in ("compiled", "cython"):
    if _backend_compiled is None:
        raise ImportError(
            "PROBCLEAN_BACKEND=compiled but the probclean._kernels extension is not built"
        )
    _active = _backend_compiled
elif _FORCED:
    raise ValueError(f"unknown PROBCLEAN_BACKEND value {_FORCED!r}")
else:
    _active = _backend_compiled if _backend_compiled is not None else _backend_numpy


def active_backend():
    """The backend module used by the network layer."""
    return _active


def backend_name() -> str:
    return _active.NAME


def available_backends() -> list[str]:
    names = [_backend_numpy.NAME]
    if _backend_compiled is not None:
        names.append(_backend_compiled.NAME)
    return names


def get_backend(name: str):
    if name == _backend_numpy.NAME:
        return _backend_numpy
    if _backend_compiled is not None and name == _backend_compiled.NAME:
        return _backend_compiled
    raise KeyError(f"backend {name!r} is not available")

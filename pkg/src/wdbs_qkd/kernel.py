"""Kernel backend selection.

The compiled ``_ckernel`` is used when it was built; otherwise, or when
``WDBS_QKD_BACKEND=python`` is set, the numpy implementation runs. Both
consume the same uniforms and return identical counts.
"""
from __future__ import annotations

import os

from . import _pykernel

BACKENDS = {"python": _pykernel.simulate_chunk}

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None
else:
    BACKENDS["cython"] = _ckernel.simulate_chunk


def _default_backend() -> str:
    requested = os.environ.get("WDBS_QKD_BACKEND", "").strip().lower()
    if requested:
        if requested not in BACKENDS:
            raise ImportError(
                f"WDBS_QKD_BACKEND={requested!r} is not available (have: {', '.join(sorted(BACKENDS))})"
            )
        return requested
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _default_backend()


def get_kernel(name: str | None = None):
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r} (have: {', '.join(sorted(BACKENDS))})") from None

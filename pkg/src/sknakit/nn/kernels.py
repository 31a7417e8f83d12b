"""Kernel backend selection: compiled Cython extension when built, numpy
im2col/GEMM fallback otherwise.

The active backend is chosen at import from SKNAKIT_KERNELS
("auto" | "cython" | "numpy", default auto) and can be swapped with
set_backend() — the benchmark uses that to compare both.
"""

from __future__ import annotations

import os

from . import _kernels_np

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_BACKENDS = {"numpy": _kernels_np}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy

_active = None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str):
    """Select the kernel backend; "auto" prefers the compiled one."""
    global _active
    if name == "auto":
        name = "cython" if "cython" in _BACKENDS else "numpy"
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})")
    _active = _BACKENDS[name]
    return _active


def get_backend(name: str | None = None):
    """Backend module by name, or the active one."""
    if name is None:
        return _active
    if name == "auto":
        return _BACKENDS.get("cython", _kernels_np)
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})")
    return _BACKENDS[name]


def backend_name() -> str:
    return _active.NAME


set_backend(os.environ.get("SKNAKIT_KERNELS", "auto"))


def conv2d_forward(x, w, b):
    return _active.conv2d_forward(x, w, b)


def conv2d_backward(x, w, dy):
    return _active.conv2d_backward(x, w, dy)


def maxpool2x2_forward(x):
    return _active.maxpool2x2_forward(x)


def maxpool2x2_backward(switches, dy, in_h, in_w):
    return _active.maxpool2x2_backward(switches, dy, in_h, in_w)

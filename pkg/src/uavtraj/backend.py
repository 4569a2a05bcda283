"""Kernel backend selection.

The compiled extension is used when it imported successfully; otherwise the
NumPy fallback takes over. Set UAVTRAJ_FORCE_PURE=1 to force the fallback,
e.g. to compare results or benchmark the two implementations.
"""

import os

from . import _kernels_pure

LINEAR = _kernels_pure.LINEAR
RELU = _kernels_pure.RELU
TANH = _kernels_pure.TANH

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_FORCE_PURE = os.environ.get("UAVTRAJ_FORCE_PURE", "") not in ("", "0")

ops = _kernels_pure if (_compiled is None or _FORCE_PURE) else _compiled


def using_compiled():
    return ops is not _kernels_pure


def backend_name():
    return "compiled" if using_compiled() else "pure"


def available_backends():
    names = ["pure"]
    if _compiled is not None:
        names.append("compiled")
    return names


def select(name):
    """Switch the active backend ('pure' or 'compiled'); mainly for tests."""
    global ops
    if name == "pure":
        ops = _kernels_pure
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        ops = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return ops

"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python twins in ``_pykernels`` are used.  Set ``TREEQP_KERNELS=python``
to force the fallback, or call :func:`use_backend` at runtime.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

NAMES = ("tangent_slope", "sweep", "merge_identical", "scaled_sum", "node_base",
         "conjugate", "minimize", "value_at_zero")

BACKEND = None


def available_backends():
    return ("cython", "python") if _ckernels is not None else ("python",)


def use_backend(name):
    """Switch every kernel to ``name`` (``"cython"`` or ``"python"``)."""
    global BACKEND
    if name == "cython":
        if _ckernels is None:
            raise ImportError("treeqp._ckernels is not built")
        mod = _ckernels
    elif name == "python":
        mod = _pykernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    g = globals()
    for fn in NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name


def backend_module(name):
    return _ckernels if name == "cython" else _pykernels


use_backend("python" if _ckernels is None or os.environ.get("TREEQP_KERNELS") == "python" else "cython")

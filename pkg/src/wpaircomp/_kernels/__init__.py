"""Kernel backend selection.

The hot loops (ellipsoid dual search, Dykstra projections) exist twice:
a compiled Cython extension (`_cy`) and a NumPy fallback (`pure`) with the
same call signatures and the same arithmetic. The compiled module is used
when importable; set WPAIRCOMP_KERNEL=pure or WPAIRCOMP_KERNEL=compiled to
force a backend at import time.
"""

import os

from . import pure
from .pure import STATUS_DEGENERATE, STATUS_GAP, STATUS_MAXITER, STATUS_RADIUS

_requested = os.environ.get("WPAIRCOMP_KERNEL", "auto").strip().lower()
if _requested not in ("auto", "pure", "compiled"):
    raise ValueError(
        f"WPAIRCOMP_KERNEL must be auto, pure or compiled, got {_requested!r}"
    )

compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _cy as compiled
    except ImportError:
        compiled = None
        if _requested == "compiled":
            raise ImportError(
                "WPAIRCOMP_KERNEL=compiled but the extension module "
                "wpaircomp._kernels._cy is not built"
            ) from None

active = pure if (_requested == "pure" or compiled is None) else compiled


def backend_name():
    return "compiled" if active is compiled and compiled is not None else "pure"


def get_backend(name="auto"):
    """Resolve a backend module by name ('auto', 'pure' or 'compiled')."""
    if name in (None, "auto"):
        return active
    if name == "pure":
        return pure
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernel backend is not available")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")

"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy fallback in ``_pykernels`` is loaded.  Setting ``LCFORECAST_PURE_PYTHON=1``
forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("LCFORECAST_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "cython"
    _impl: ModuleType = _compiled
else:
    BACKEND = "python"
    _impl = _pykernels

split_sweep = _impl.split_sweep
move_nodes = _impl.move_nodes
binary_entropy = _pykernels.binary_entropy


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out

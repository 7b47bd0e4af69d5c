"""Kernel backend selection.

The compiled ``_speedups`` extension is used when it imports; otherwise the
pure-Python ``_purepy`` module is used. Setting ``SHEAFCHECK_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _purepy

if os.environ.get("SHEAFCHECK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _purepy
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _purepy

BACKEND = "compiled" if _impl is not _purepy else "python"

# widest clause mask and weight the compiled path accepts
_MAX_NATIVE_VARS = 63
_INT64_MAX = (1 << 63) - 1


def sat_masks(pos, neg, nvars):
    if nvars > _MAX_NATIVE_VARS:
        return _purepy.sat_masks(pos, neg, nvars)
    return _impl.sat_masks(pos, neg, nvars)


def count_sat(pos, neg, nvars):
    if nvars > _MAX_NATIVE_VARS:
        return _purepy.count_sat(pos, neg, nvars)
    return _impl.count_sat(pos, neg, nvars)


def best_weighted(pos, neg, weights, hard, nvars):
    if nvars > _MAX_NATIVE_VARS or sum(weights) > _INT64_MAX:
        return _purepy.best_weighted(pos, neg, weights, hard, nvars)
    return _impl.best_weighted(pos, neg, weights, hard, nvars)


def gf2_rank(rows, ncols):
    return _impl.gf2_rank(rows, ncols)


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _purepy}
    try:
        from . import _speedups
    except ImportError:
        pass
    else:
        out["compiled"] = _speedups
    return out

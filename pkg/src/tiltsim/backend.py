"""Selects the numerical core: compiled extension or pure-Python fallback.

The compiled core (``tiltsim._fastcore``) is optional; when it fails to
import the pure-Python kernels are used transparently.  Selection can be
forced with the ``TILTSIM_BACKEND`` environment variable (``fast``, ``pure``
or ``auto``) or at runtime with :func:`use`, which the benchmark script
relies on to time both implementations in one process.
"""

import os

from . import _purecore

_kernels = None
_name = None


def _load(requested):
    if requested == "pure":
        return _purecore, "pure"
    try:
        from . import _fastcore
        return _fastcore, "fast"
    except ImportError:
        if requested == "fast":
            raise RuntimeError(
                "TILTSIM_BACKEND=fast but the compiled core is not built; "
                "reinstall the package or set TILTSIM_BACKEND=pure")
        return _purecore, "pure"


def use(name):
    """Force a backend ('fast', 'pure' or 'auto'). Returns the active name."""
    global _kernels, _name
    if name not in ("fast", "pure", "auto"):
        raise ValueError(f"unknown backend {name!r}")
    _kernels, _name = _load(name)
    return _name


def kernels():
    """The active kernel module (lazy-loaded on first use)."""
    if _kernels is None:
        use(os.environ.get("TILTSIM_BACKEND", "auto"))
    return _kernels


def active_name():
    kernels()
    return _name

"""Select the compiled core when importable, otherwise the numpy fallback.

Set ``GSMGP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _core_py

BACKEND = "python"
core = _core_py

if os.environ.get("GSMGP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        pass
    else:
        core = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the core module for ``name`` (``"cython"``, ``"python"`` or the active one)."""
    if name is None:
        return core
    if name == "python":
        return _core_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")

"""Pick the compiled kernels when they import, the numpy ones otherwise.

Set ``SWARMKIN_PURE=1`` to force the pure-Python path.
"""
import os

from . import _pykernels as python_kernels

try:
    if os.environ.get("SWARMKIN_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _ckernels as compiled_kernels
except ImportError:
    compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"


def get_kernels(name: str | None = None):
    """Return the kernel module for ``"cython"``, ``"python"`` or the active default."""
    if name is None:
        return kernels
    if name == "python":
        return python_kernels
    if name == "cython":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not built")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")

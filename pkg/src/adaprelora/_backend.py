"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
NumPy twin in ``_kernels_py``. Setting ``ADAPRELORA_PURE_PYTHON=1`` forces
the fallback. Library code reaches kernels through ``_backend.kernels`` at
call time so :func:`set_backend` takes effect immediately.
"""
import importlib
import logging
import os

log = logging.getLogger(__name__)

_MODULES = {"cython": "adaprelora._kernels", "python": "adaprelora._kernels_py"}


def _load(name):
    return importlib.import_module(_MODULES[name])


def available_backends():
    names = []
    for name in _MODULES:
        try:
            _load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select_default():
    if os.environ.get("ADAPRELORA_PURE_PYTHON", "") not in ("", "0"):
        return _load("python")
    try:
        return _load("cython")
    except ImportError:
        log.debug("compiled kernels unavailable, using NumPy fallback")
        return _load("python")


kernels = _select_default()


def backend_name():
    return kernels.BACKEND


def set_backend(name):
    """Switch the active kernel module; returns the previous backend name."""
    global kernels
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    previous = kernels.BACKEND
    kernels = _load(name)
    return previous

"""Kernel backend selection.

Two interchangeable implementations of the hot numeric paths live here:
``reference`` (vectorized numpy, always available) and ``jit`` (numba,
``nogil`` loops). The active one is picked once at import time from the
``JOINTMPC_NUMBA`` environment variable; everything above this package sees a
single module-like object.

Set ``JOINTMPC_NUMBA=0`` (or ``false``/``off``/``no``) to force the numpy
path, e.g. for debugging or on hosts where numba is broken.
"""

import os
from contextlib import contextmanager

from . import reference

_DISABLED = {"0", "false", "off", "no"}


def _numba_requested() -> bool:
    return os.environ.get("JOINTMPC_NUMBA", "1").strip().lower() not in _DISABLED


def get_backend(name: str):
    """Return a kernel module by name ("numpy" or "numba")."""
    if name == "numpy":
        return reference
    if name == "numba":
        from . import jit

        return jit
    raise ValueError(f"unknown kernel backend {name!r}")


if _numba_requested():
    try:
        from . import jit as _active
    except ImportError:
        _active = reference
else:
    _active = reference


def active_backend():
    """The kernel module selected at import time."""
    return _active


fk_batch = _active.fk_batch
jacobian_batch = _active.jacobian_batch
manip_batch = _active.manip_batch
self_collision_batch = _active.self_collision_batch
env_collision_batch = _active.env_collision_batch
integrate_batch = _active.integrate_batch

BACKEND_NAME = _active.BACKEND_NAME

_EXPORTED = (
    "fk_batch",
    "jacobian_batch",
    "manip_batch",
    "self_collision_batch",
    "env_collision_batch",
    "integrate_batch",
)


@contextmanager
def use_backend(name: str):
    """Temporarily rebind the exported kernels to a named backend.

    Callers go through ``kernels.fk_batch`` style attribute lookups, so
    swapping the package attributes is enough to redirect every consumer.
    Not thread safe; meant for benchmarks and tests, not the control loop.
    """
    module = get_backend(name)
    saved = {fn: globals()[fn] for fn in _EXPORTED}
    globals().update({fn: getattr(module, fn) for fn in _EXPORTED})
    try:
        yield module
    finally:
        globals().update(saved)

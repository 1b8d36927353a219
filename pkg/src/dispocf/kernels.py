"""Backend selection for the hot kernels.

The compiled extension (``_ckernels``) is used when it was built; otherwise
the pure-Python implementations in ``_pykernels`` are used.  Both produce
identical results, so the choice only affects speed.
"""

from __future__ import annotations

import contextlib
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active: ModuleType = _ckernels if _ckernels is not None else _pykernels


def available() -> list[str]:
    return list(_BACKENDS)


def get(name: str | None = None) -> ModuleType:
    """The active backend, or the named one."""
    if name is None:
        return _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})") from None


def set_backend(name: str) -> None:
    global _active
    _active = get(name)


@contextlib.contextmanager
def using(name: str):
    """Temporarily switch backends."""
    global _active
    prev = _active
    _active = get(name)
    try:
        yield _active
    finally:
        _active = prev

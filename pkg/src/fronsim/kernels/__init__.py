"""Kernel backend selection.

The hot per-step searches (BFS distance fill, A* first step) exist twice:
a Cython extension (``_native``) and a pure-Python twin (``_py``). The
compiled backend is used when importable; set ``FRONSIM_PURE_PYTHON=1`` to
force the fallback. Both produce identical outputs, so the choice only
affects speed.
"""

from __future__ import annotations

import os

from . import _py

FREE = _py.FREE
UNREACHABLE = _py.UNREACHABLE

_FORCE_PY = os.environ.get("FRONSIM_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes")

if not _FORCE_PY:
    try:
        from . import _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None
else:
    _native = None

BACKEND = "native" if _native is not None else "python"
_impl = _native if _native is not None else _py

bfs_fill = _impl.bfs_fill
astar_first_step = _impl.astar_first_step


def available_backends() -> tuple[str, ...]:
    return ("python", "native") if _native is not None else ("python",)


def use_backend(name: str) -> None:
    """Rebind the kernel functions to a specific backend (tests, benchmarks)."""
    global bfs_fill, astar_first_step, BACKEND
    if name == "python":
        impl = _py
    elif name == "native":
        if _native is None:
            raise RuntimeError("native kernel extension is not built")
        impl = _native
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")
    bfs_fill = impl.bfs_fill
    astar_first_step = impl.astar_first_step
    BACKEND = name

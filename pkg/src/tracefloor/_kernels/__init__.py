"""Kernel selection: compiled extension if built, pure-Python twin otherwise.

Set TRACEFLOOR_PURE_PY=1 to force the pure-Python path (used by the
benchmark and the equivalence tests).  Both paths are bit-identical.
"""
import os

if os.environ.get("TRACEFLOOR_PURE_PY"):
    from .fsm_py import fsm_scan

    USING_COMPILED = False
else:
    try:
        from ._fsm import fsm_scan  # type: ignore[no-redef]

        USING_COMPILED = True
    except ImportError:
        from .fsm_py import fsm_scan  # type: ignore[no-redef]

        USING_COMPILED = False

__all__ = ["fsm_scan", "USING_COMPILED"]

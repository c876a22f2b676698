"""tracefloor: crowd-sourced sensor traces to indoor tracks, floor plans
and RSSI fingerprints, with a built-in simulator as ground truth."""

from ._kernels import USING_COMPILED

__version__ = "0.1.0"

__all__ = ["USING_COMPILED", "__version__"]

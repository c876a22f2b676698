"""Step detection from the acceleration-magnitude signal.

Two detectors over the same smoothed |a| - g front end:

  * detect_steps_fsm: the state-machine detector (see `_kernels.fsm_py` for
    the transition rules).  One step is a positive peak followed by a
    negative peak followed by sustained quiet.
  * detect_steps_variance: the sliding-window local-variance baseline; each
    maximal run of windows above a variance threshold counts as one step.

Both are pure functions of the trace and are orientation-independent
because the magnitude signal is.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import fsm_scan
from .errors import NoAccelData, ZeroActual
from .trace import Trace, TraceParams, magnitude_signal, smooth_arrays


@dataclass(frozen=True, slots=True)
class Step:
    """One detected stride: time span and signal extrema."""

    start_t: int
    end_t: int
    peak_pos: float
    peak_neg: float


@dataclass(frozen=True, slots=True)
class FsmParams:
    """Thresholds and tolerances of the state-machine detector.

    t_walk and t_peak are the walking and peak thresholds on the smoothed
    magnitude (m/s²); a step must complete within [min_step_ms, max_step_ms]
    and end with quiet_ms of sustained quiet.  outlier_budget is the number
    of consecutive out-of-state samples the grace states absorb.
    """

    t_walk: float = 0.6
    t_peak: float = 1.5
    min_step_ms: int = 300
    max_step_ms: int = 2000
    quiet_ms: int = 100
    outlier_budget: int = 1

    def __post_init__(self):
        if not 0 < self.t_walk < self.t_peak:
            raise ValueError("need 0 < t_walk < t_peak")
        if not self.min_step_ms < self.max_step_ms:
            raise ValueError("need min_step_ms < max_step_ms")
        if self.outlier_budget < 0:
            raise ValueError("outlier_budget must be >= 0")


@dataclass(frozen=True, slots=True)
class VarianceParams:
    window_ms: int = 200
    var_threshold: float = 0.5

    def __post_init__(self):
        if self.window_ms <= 0:
            raise ValueError("window_ms must be > 0")
        if self.var_threshold <= 0:
            raise ValueError("var_threshold must be > 0")


def detect_steps_fsm(trace: Trace, fsm: FsmParams | None = None, tp: TraceParams | None = None) -> list[Step]:
    """Detect steps with the state machine; returns time-ordered, non-overlapping steps."""
    fsm = fsm or FsmParams()
    tp = tp or TraceParams()
    t, mags = magnitude_signal(trace, tp)
    if len(t) == 0:
        raise NoAccelData(f"trace {trace.trace_id!r} has no accel samples")
    s = smooth_arrays(t, mags, tp.smooth_window_ms)
    starts, ends, pos, neg = fsm_scan(
        t, s, fsm.t_walk, fsm.t_peak, fsm.min_step_ms, fsm.max_step_ms, fsm.quiet_ms, fsm.outlier_budget
    )
    return [Step(a, b, p, n) for a, b, p, n in zip(starts, ends, pos, neg)]


def detect_steps_variance(
    trace: Trace, vp: VarianceParams | None = None, tp: TraceParams | None = None
) -> list[Step]:
    """Local-variance baseline: one step per maximal above-threshold run.

    Step peak fields carry the run's extrema of the smoothed signal (they
    need not straddle zero, unlike state-machine steps).
    """
    vp = vp or VarianceParams()
    tp = tp or TraceParams()
    t, mags = magnitude_signal(trace, tp)
    if len(t) == 0:
        raise NoAccelData(f"trace {trace.trace_id!r} has no accel samples")
    s = smooth_arrays(t, mags, tp.smooth_window_ms)

    half = vp.window_ms / 2.0
    lo = np.searchsorted(t, t - half, side="left")
    hi = np.searchsorted(t, t + half, side="right")
    c1 = np.concatenate(([0.0], np.cumsum(s, dtype=np.float64)))
    c2 = np.concatenate(([0.0], np.cumsum(s * s, dtype=np.float64)))
    n = hi - lo
    mean = (c1[hi] - c1[lo]) / n
    var = np.maximum((c2[hi] - c2[lo]) / n - mean * mean, 0.0)

    above = var > vp.var_threshold
    steps: list[Step] = []
    i = 0
    total = len(above)
    while i < total:
        if above[i]:
            j = i
            while j + 1 < total and above[j + 1]:
                j += 1
            seg = s[i : j + 1]
            start = int(t[i])
            end = int(t[j])
            if end <= start:  # single-sample run: give the step a 1 ms span
                end = start + 1
            steps.append(Step(start, end, float(seg.max()), float(seg.min())))
            i = j + 1
        else:
            i += 1
    return steps


def step_count_error(detected: int, actual: int) -> float:
    """Absolute step-count error as a percentage of the actual count."""
    if actual <= 0:
        raise ZeroActual("actual step count must be > 0")
    return 100.0 * abs(detected - actual) / actual

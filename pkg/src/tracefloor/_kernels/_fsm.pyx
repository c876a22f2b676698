# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled step-detection state machine.

Exact twin of `fsm_py.fsm_scan`; the logic must stay line-for-line
equivalent (comparisons and copies only, no float arithmetic), so both
paths produce bit-identical output.  See fsm_py for the state diagram.
"""

cimport cython

import numpy as np


cdef enum:
    STATIONARY = 0
    WALKING = 1
    WALK_GRACE = 2
    PEAK_POS = 3
    PEAK_GRACE = 4
    PEAK_NEG = 5
    QUIET_GRACE = 6


def fsm_scan(t, s, double t_walk, double t_peak, long long min_step_ms,
             long long max_step_ms, long long quiet_ms, long long outlier_budget):
    """Run the FSM over (t ms int64, s float64); see fsm_py.fsm_scan."""
    cdef const long long[::1] tv = np.ascontiguousarray(t, dtype=np.int64)
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t n = tv.shape[0]

    starts = []
    ends = []
    peaks_pos = []
    peaks_neg = []

    cdef int state = STATIONARY
    cdef long long step_start = 0
    cdef double peak_pos = 0.0
    cdef double peak_neg = 0.0
    cdef long long viol = 0
    cdef bint dipped = False
    cdef long long quiet_start = -1

    cdef Py_ssize_t i
    cdef long long ti
    cdef double v
    cdef bint again

    for i in range(n):
        ti = tv[i]
        v = sv[i]
        again = True
        while again:
            again = False
            if state == STATIONARY:
                if v > t_walk:
                    state = WALKING
                    step_start = ti
                    peak_pos = v
                    viol = 0
            elif state == WALKING or state == WALK_GRACE:
                if ti - step_start > max_step_ms:
                    state = STATIONARY
                    again = True
                elif v > t_peak:
                    state = PEAK_POS
                    if v > peak_pos:
                        peak_pos = v
                    peak_neg = v
                    dipped = False
                    viol = 0
                elif v > t_walk:
                    state = WALKING
                    if v > peak_pos:
                        peak_pos = v
                    viol = 0
                else:
                    viol += 1
                    if viol > outlier_budget:
                        state = STATIONARY
                        again = True
                    else:
                        state = WALK_GRACE
            elif state == PEAK_POS or state == PEAK_GRACE:
                if ti - step_start > max_step_ms:
                    state = STATIONARY
                    again = True
                elif v < -t_peak:
                    state = PEAK_NEG
                    if v < peak_neg:
                        peak_neg = v
                    quiet_start = -1
                    viol = 0
                elif dipped and v > t_peak:
                    viol += 1
                    if viol > outlier_budget:
                        state = STATIONARY
                        again = True
                    else:
                        state = PEAK_GRACE
                else:
                    if v < t_walk:
                        dipped = True
                    if v > peak_pos:
                        peak_pos = v
                    state = PEAK_POS
                    viol = 0
            else:  # PEAK_NEG or QUIET_GRACE
                if ti - step_start > max_step_ms:
                    state = STATIONARY
                    again = True
                elif -t_walk < v < t_walk:
                    state = PEAK_NEG
                    viol = 0
                    if quiet_start < 0:
                        quiet_start = ti
                    if ti - quiet_start >= quiet_ms:
                        if ti - step_start >= min_step_ms:
                            starts.append(step_start)
                            ends.append(ti)
                            peaks_pos.append(peak_pos)
                            peaks_neg.append(peak_neg)
                        state = STATIONARY
                elif quiet_start < 0:
                    if v < peak_neg:
                        peak_neg = v
                    state = PEAK_NEG
                    viol = 0
                else:
                    viol += 1
                    if viol > outlier_budget:
                        state = STATIONARY
                        again = True
                    else:
                        state = QUIET_GRACE

    return starts, ends, peaks_pos, peaks_neg

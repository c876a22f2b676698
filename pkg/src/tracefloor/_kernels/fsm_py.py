"""Pure-Python step-detection state machine.

Twin of the compiled kernel in `_fsm.pyx`; both must produce bit-identical
output (the kernel does comparisons and copies only, no float arithmetic).

States walk one stride of the smoothed magnitude signal s = |a| - g:

    STATIONARY -> WALKING     when s > t_walk        (step start)
    WALKING    -> PEAK_POS    when s > t_peak        (positive peak seen)
    PEAK_POS   -> PEAK_NEG    when s < -t_peak       (negative peak seen)
    PEAK_NEG   -> STATIONARY  when |s| < t_walk sustained quiet_ms
                                                     (step end, emit)

Grace states absorb up to `outlier_budget` consecutive samples that
violate the active state's condition before forcing a reset (no step):

    WALK_GRACE   guards WALKING:  s dropped back to <= t_walk before the
                 positive peak was confirmed.
    PEAK_GRACE   guards PEAK_POS: s exceeded t_peak again after having
                 descended below t_walk (a re-peak without a negative lobe).
    QUIET_GRACE  guards PEAK_NEG: a non-quiet sample during an active quiet
                 countdown; absorbed samples do not restart the countdown.

Total step duration outside [min_step_ms, max_step_ms] also resets without
emitting.  After any reset the offending sample is re-examined from
STATIONARY, so it may immediately start a new step candidate.
"""

STATIONARY = 0
WALKING = 1
WALK_GRACE = 2
PEAK_POS = 3
PEAK_GRACE = 4
PEAK_NEG = 5
QUIET_GRACE = 6


def fsm_scan(t, s, t_walk, t_peak, min_step_ms, max_step_ms, quiet_ms, outlier_budget):
    """Run the FSM over (t ms int64, s float64); arrays must be equal length.

    Returns four lists: step start times, end times, positive peaks and
    negative peaks, in time order.
    """
    starts = []
    ends = []
    peaks_pos = []
    peaks_neg = []

    state = STATIONARY
    step_start = 0
    peak_pos = 0.0
    peak_neg = 0.0
    viol = 0
    dipped = False
    quiet_start = -1

    t_list = t.tolist() if hasattr(t, "tolist") else list(t)
    s_list = s.tolist() if hasattr(s, "tolist") else list(s)

    for ti, v in zip(t_list, s_list):
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
                    # still climbing out of the trough; any value tolerated
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

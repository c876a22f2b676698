"""Shared trace-to-track plumbing used by the CLI and the report.

The dead-reckoning modules take an initial pose as a parameter; here it
is estimated from the trace itself: position from the mean of the entry
GPS fixes (the walk starts where the GPS died) and heading from the
circular mean of the first seconds of compass samples, snapped to the
quantization lattice.

Tracks drift with step count, so a second pass pins them to global
reference points: the GPS entry fix, plus elevator anchors.  Elevator
rides are visible in the trace itself as long deep dips of the strongest
WiFi RSSI (the car blocks RF); the elevator's position is the consensus
of all first-pass tracks at their dip midpoints, and each dipped trace
is then warped through that point.
"""
from __future__ import annotations

import math
import statistics

from .reckoning import (
    Anchor,
    AnchorSource,
    DrParams,
    Track,
    apply_anchors,
    build_track,
    quantize_heading,
    track_positions_at,
)
from .steps import FsmParams, Step, detect_steps_fsm
from .trace import Trace, TraceParams, gps_samples, mag_arrays, wifi_samples

HEADING_WARMUP_MS = 2000
DIP_DB = 12.0  # strongest-AP RSSI drop that marks an elevator ride
DIP_MIN_MS = 8000


def initial_pose_estimate(trace: Trace, quant_deg: int = 45) -> tuple[float, float, float]:
    """(x, y, heading) to start dead reckoning from.

    Position: mean of the GPS fixes at the walk's start (0, 0 if none).
    Heading: circular mean of the compass samples in the first
    HEADING_WARMUP_MS, snapped to the quantization lattice.
    """
    fixes = gps_samples(trace)
    if fixes:
        x0 = sum(f.x for _, f in fixes) / len(fixes)
        y0 = sum(f.y for _, f in fixes) / len(fixes)
    else:
        x0 = y0 = 0.0

    mt, mh = mag_arrays(trace)
    heading = 0.0
    if len(mt):
        warm = mh[mt <= mt[0] + HEADING_WARMUP_MS]
        if len(warm) == 0:
            warm = mh[:1]
        s = sum(math.sin(math.radians(h)) for h in warm)
        c = sum(math.cos(math.radians(h)) for h in warm)
        mean = math.degrees(math.atan2(s, c)) % 360.0
        heading = quantize_heading(0.0, mean, quant_deg) if quant_deg else mean
    return x0, y0, heading


from dataclasses import dataclass


@dataclass(frozen=True)
class PreparedWalk:
    trace: Trace
    steps: list[Step]
    track: Track


def prepare_walk(
    trace: Trace,
    fsm: FsmParams | None = None,
    tp: TraceParams | None = None,
    dr: DrParams | None = None,
) -> PreparedWalk:
    """Detect steps and dead-reckon a track with a self-estimated start pose."""
    dr = dr or DrParams()
    steps = detect_steps_fsm(trace, fsm, tp)
    pose = initial_pose_estimate(trace, dr.quant_deg)
    dr = DrParams(step_length=dr.step_length, quant_deg=dr.quant_deg, initial_pose=pose)
    return PreparedWalk(trace, steps, build_track(steps, trace, dr))


def rssi_dip_windows(trace: Trace, steps: list[Step]) -> list[tuple[int, int]]:
    """Sustained deep stationary drops of the strongest-AP RSSI (elevator rides).

    Three gates: the window sits DIP_DB below the signal level both before
    and after it (the car's attenuation is transient; walking far from
    every AP changes the level gradually); it is entered and left on foot
    (neighbors on both sides); and its core contains no walking (stairwell
    visits in AP-poor corners dip too, but people keep stepping there).
    """
    scans = [(t, max(ap.rssi for ap in scan.aps)) for t, scan in wifi_samples(trace) if scan.aps]
    if len(scans) < 5:
        return []
    level = statistics.median(r for _, r in scans)
    candidates = []
    start = None
    prev_t = None
    for t, r in scans:
        if r <= level - 6:
            if start is None:
                start = t
            prev_t = t
        else:
            if start is not None and prev_t - start >= DIP_MIN_MS:
                candidates.append((start, prev_t))
            start = None
    if start is not None and prev_t - start >= DIP_MIN_MS:
        candidates.append((start, prev_t))

    windows = []
    for t0, t1 in candidates:
        inside = [r for t, r in scans if t0 <= t <= t1]
        before = [r for t, r in scans if t0 - 25_000 <= t < t0]
        after = [r for t, r in scans if t1 < t <= t1 + 25_000]
        if len(before) < 3 or len(after) < 3 or not inside:
            continue
        core_steps = sum(1 for s in steps if s.start_t >= t0 + 2000 and s.end_t <= t1 - 2000)
        if core_steps > 1:
            continue
        near = before + after
        if sum(near) / len(near) - sum(inside) / len(inside) >= DIP_DB:
            windows.append((t0, t1))
    return windows


def gps_entry_anchor(trace: Trace) -> Anchor | None:
    fixes = gps_samples(trace)
    if not fixes:
        return None
    x = sum(f.x for _, f in fixes) / len(fixes)
    y = sum(f.y for _, f in fixes) / len(fixes)
    return Anchor(fixes[-1][0], x, y, AnchorSource.GPS_LAST_FIX)


def locate_elevator(walks: list[PreparedWalk]) -> tuple[float, float] | None:
    """Consensus elevator position: median first-pass track position over
    all traces' dip midpoints."""
    xs: list[float] = []
    ys: list[float] = []
    for walk in walks:
        for t0, t1 in rssi_dip_windows(walk.trace, walk.steps):
            px, py = track_positions_at(walk.track, [(t0 + t1) / 2.0])
            xs.append(float(px[0]))
            ys.append(float(py[0]))
    if len(xs) < 3:
        return None
    return statistics.median(xs), statistics.median(ys)


def anchor_corrected_tracks(
    walks: list[PreparedWalk], snap_m: float = 0.6, hold_m: float = 0.45
) -> list[Track]:
    """Second-pass tracks pinned to the GPS entry and elevator anchors.

    The consensus elevator point is the car's center, not the walker's
    exact spot in it, so a dip is corrected only when the track disagrees
    with the consensus by more than snap_m, and then only pulled to
    hold_m away from the center on its own side (the walker stood
    somewhere in the car, not at its midpoint).
    """
    elevator = locate_elevator(walks)
    out = []
    for walk in walks:
        anchors = []
        entry = gps_entry_anchor(walk.trace)
        if entry is not None:
            anchors.append(entry)
        if elevator is not None:
            for t0, t1 in rssi_dip_windows(walk.trace, walk.steps):
                mid = (t0 + t1) // 2
                px, py = track_positions_at(walk.track, [mid])
                dx, dy = px[0] - elevator[0], py[0] - elevator[1]
                dist = math.hypot(dx, dy)
                if dist > snap_m:
                    ax = elevator[0] + hold_m * dx / dist
                    ay = elevator[1] + hold_m * dy / dist
                    # pin both ends of the ride, not just its midpoint, so
                    # the stationary stretch between the surrounding track
                    # points is held inside the car
                    t_lo = min(t0 + 1500, mid)
                    t_hi = max(t1 - 1500, mid)
                    anchors.append(Anchor(t_lo, ax, ay, AnchorSource.ELEVATOR))
                    if t_hi > t_lo:
                        anchors.append(Anchor(t_hi, ax, ay, AnchorSource.ELEVATOR))
        anchors.sort(key=lambda a: a.t)
        out.append(apply_anchors(walk.track, anchors) if anchors else walk.track)
    return out

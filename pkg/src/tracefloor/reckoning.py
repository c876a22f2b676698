"""Dead reckoning: steps + headings to a planar track.

Each detected step advances the pose by a fixed step length along the
current heading:

    x_k = x_{k-1} + S * cos(theta_k)
    y_k = y_{k-1} + S * sin(theta_k)

theta is the compass heading sampled at the step's mid-time, with the
per-step heading change snapped to the nearest multiple of quant_deg
(people turn in large increments; the compass is noisy).  Velocity is
implicitly reset at every step boundary, so errors grow with step count,
not integration time.  `double_integrate` is the no-reset strawman kept
for error comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NoAccelData, NoMagData, UnsortedAnchors
from .trace import Trace, TraceParams, gps_samples, mag_arrays, magnitude_signal, wifi_samples


@dataclass(frozen=True, slots=True)
class TrackPoint:
    t: int
    x: float
    y: float
    floor: int = 0
    heading_deg: float = 0.0


@dataclass(frozen=True)
class Track:
    trace_id: str
    points: tuple[TrackPoint, ...]


class AnchorSource(Enum):
    GPS_LAST_FIX = "gps_last_fix"
    AP_MAX_RSSI = "ap_max_rssi"
    ELEVATOR = "elevator"


@dataclass(frozen=True, slots=True)
class Anchor:
    """A globally referenced point used to pin and correct tracks.

    AP anchors are emitted with unresolved (None) coordinates; the caller
    fills them in when the AP's location is known.
    """

    t: int
    x: float | None
    y: float | None
    source: AnchorSource
    bssid: str | None = None


@dataclass(frozen=True, slots=True)
class DrParams:
    step_length: float = 0.7
    quant_deg: int = 45
    initial_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, heading_deg

    def __post_init__(self):
        if self.step_length <= 0:
            raise ValueError("step_length must be > 0")
        if self.quant_deg != 0 and (self.quant_deg < 0 or 360 % self.quant_deg != 0):
            raise ValueError("quant_deg must divide 360 (0 disables quantization)")


def unit_vector(heading_deg: float) -> tuple[float, float]:
    """Unit vector for a heading; exact on the four axis directions."""
    h = heading_deg % 360.0
    if h == 0.0:
        return 1.0, 0.0
    if h == 90.0:
        return 0.0, 1.0
    if h == 180.0:
        return -1.0, 0.0
    if h == 270.0:
        return 0.0, -1.0
    r = math.radians(h)
    return math.cos(r), math.sin(r)


def _nearest_heading(mt: np.ndarray, mh: np.ndarray, t: float) -> float:
    i = int(np.searchsorted(mt, t, side="left"))
    if i == 0:
        return float(mh[0])
    if i == len(mt):
        return float(mh[-1])
    before = t - mt[i - 1]
    after = mt[i] - t
    return float(mh[i - 1]) if before <= after else float(mh[i])


def heading_at(trace: Trace, t: float) -> float:
    """Heading of the compass sample nearest in time to t; ties go earlier."""
    mt, mh = mag_arrays(trace)
    if len(mt) == 0:
        raise NoMagData(f"trace {trace.trace_id!r} has no compass samples")
    return _nearest_heading(mt, mh, t)


def quantize_heading(prev_heading: float, raw_heading: float, quant_deg: int) -> float:
    """Snap the heading change raw - prev to the nearest multiple of quant_deg.

    The signed minimal difference is taken in (-180, 180]; half-way ties
    round away from zero.  quant_deg = 0 returns the raw heading unchanged.
    """
    if quant_deg == 0:
        return raw_heading % 360.0
    delta = (raw_heading - prev_heading) % 360.0
    if delta > 180.0:
        delta -= 360.0
    q = delta / quant_deg
    units = math.floor(q + 0.5) if q >= 0 else math.ceil(q - 0.5)
    return (prev_heading + quant_deg * units) % 360.0


def build_track(steps, trace: Trace, p: DrParams | None = None) -> Track:
    """Dead-reckon a track from ordered steps; one point per step plus the start."""
    p = p or DrParams()
    mt, mh = mag_arrays(trace)
    if len(mt) == 0:
        raise NoMagData(f"trace {trace.trace_id!r} has no compass samples")
    x, y, heading = p.initial_pose
    heading %= 360.0
    points = [TrackPoint(0, x, y, 0, heading)]
    for step in steps:
        mid = (step.start_t + step.end_t) // 2
        heading = quantize_heading(heading, _nearest_heading(mt, mh, mid), p.quant_deg)
        ux, uy = unit_vector(heading)
        x += p.step_length * ux
        y += p.step_length * uy
        points.append(TrackPoint(step.end_t, x, y, 0, heading))
    return Track(trace.trace_id, tuple(points))


def double_integrate(trace: Trace, tp: TraceParams | None = None) -> Track:
    """Naive twice-integrated track (no velocity resets); the error strawman.

    The raw magnitude signal is treated as planar acceleration along the
    instantaneous compass heading and integrated with the trapezoid rule.
    """
    tp = tp or TraceParams()
    t, mags = magnitude_signal(trace, tp)
    if len(t) < 2:
        raise NoAccelData(f"trace {trace.trace_id!r} needs >= 2 accel samples")
    mt, mh = mag_arrays(trace)
    if len(mt) == 0:
        raise NoMagData(f"trace {trace.trace_id!r} has no compass samples")

    # nearest compass sample per accel sample, ties to the earlier one
    idx = np.searchsorted(mt, t, side="left")
    idx_prev = np.clip(idx - 1, 0, len(mt) - 1)
    idx = np.clip(idx, 0, len(mt) - 1)
    before = np.abs(t - mt[idx_prev])
    after = np.abs(mt[idx] - t)
    nearest = np.where(before <= after, idx_prev, idx)
    headings = mh[nearest]

    rad = np.radians(headings)
    ax = mags * np.cos(rad)
    ay = mags * np.sin(rad)
    dt = np.diff(t) / 1000.0
    vx = np.concatenate(([0.0], np.cumsum(0.5 * (ax[1:] + ax[:-1]) * dt)))
    vy = np.concatenate(([0.0], np.cumsum(0.5 * (ay[1:] + ay[:-1]) * dt)))
    px = np.concatenate(([0.0], np.cumsum(0.5 * (vx[1:] + vx[:-1]) * dt)))
    py = np.concatenate(([0.0], np.cumsum(0.5 * (vy[1:] + vy[:-1]) * dt)))

    points = tuple(
        TrackPoint(int(ti), float(xi), float(yi), 0, float(hi % 360.0))
        for ti, xi, yi, hi in zip(t, px, py, headings)
    )
    return Track(trace.trace_id, points)


RSSI_FLOOR = -1000  # sentinel below any valid dBm reading


def extract_anchors(trace: Trace, min_obs: int = 5) -> list[Anchor]:
    """Global reference points: the last GPS fix plus per-AP max-RSSI times.

    AP anchors mark when the walker was closest to each access point heard
    at least min_obs times; their coordinates stay unresolved here.
    Elevator anchors are appended by callers after classification.
    """
    anchors: list[Anchor] = []
    fixes = gps_samples(trace)
    if fixes:
        t, fix = fixes[-1]
        anchors.append(Anchor(t, fix.x, fix.y, AnchorSource.GPS_LAST_FIX))
    best: dict[str, tuple[int, int, int]] = {}  # bssid -> (count, best_rssi, t_of_best)
    for t, scan in wifi_samples(trace):
        for ap in scan.aps:
            count, best_rssi, best_t = best.get(ap.bssid, (0, RSSI_FLOOR, 0))
            if ap.rssi > best_rssi:
                best_rssi, best_t = ap.rssi, t
            best[ap.bssid] = (count + 1, best_rssi, best_t)
    for bssid in sorted(best):
        count, _, best_t = best[bssid]
        if count >= min_obs:
            anchors.append(Anchor(best_t, None, None, AnchorSource.AP_MAX_RSSI, bssid=bssid))
    return anchors


def track_positions_at(track: Track, t_query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Time-interpolated positions along a track, clamped at both ends."""
    tt = np.asarray([pt.t for pt in track.points], dtype=np.float64)
    xs = np.asarray([pt.x for pt in track.points], dtype=np.float64)
    ys = np.asarray([pt.y for pt in track.points], dtype=np.float64)
    tq = np.asarray(t_query, dtype=np.float64)
    return np.interp(tq, tt, xs), np.interp(tq, tt, ys)


def apply_anchors(track: Track, anchors) -> Track:
    """Warp a track so it passes through resolved anchors.

    The residual between each anchor and the track's position at the anchor
    time is interpolated linearly in time and added to every point; points
    outside the anchor span get the nearest anchor's full residual.  Exact
    for linear drift, idempotent, and a no-op without anchors.
    """
    anchors = list(anchors)
    if not anchors:
        return track
    times = [a.t for a in anchors]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise UnsortedAnchors("anchors must be sorted by t")
    at = np.asarray(times, dtype=np.float64)
    ax = np.asarray([a.x for a in anchors], dtype=np.float64)
    ay = np.asarray([a.y for a in anchors], dtype=np.float64)
    tx, ty = track_positions_at(track, at)
    rx = ax - tx
    ry = ay - ty

    pt_t = np.asarray([pt.t for pt in track.points], dtype=np.float64)
    cx = np.interp(pt_t, at, rx)
    cy = np.interp(pt_t, at, ry)
    points = tuple(
        TrackPoint(pt.t, pt.x + float(dx), pt.y + float(dy), pt.floor, pt.heading_deg)
        for pt, dx, dy in zip(track.points, cx, cy)
    )
    return Track(track.trace_id, points)

"""Sensor trace data model, JSONL wire format and derived signals.

A trace is one walk by one user: a time-ordered sequence of heterogeneous
sensor samples (accelerometer, compass heading, WiFi scan, GSM scan, GPS
fix).  Timestamps are integer milliseconds since trace start.  GPS fixes
are already in the building-local planar frame; geodetic conversion is an
upstream concern.

Wire format (UTF-8 JSONL): the first line is a header record

    {"trace_id": ..., "user_id": ..., "device_id": ...}

followed by one record per sample:

    {"t": <int ms>, "kind": "accel", "ax": f, "ay": f, "az": f}
    {"t": <int ms>, "kind": "mag",   "heading": f}
    {"t": <int ms>, "kind": "wifi",  "aps": [{"bssid": s, "rssi": i}, ...]}
    {"t": <int ms>, "kind": "gsm",   "cell": s, "rssi": i}
    {"t": <int ms>, "kind": "gps",   "x": f, "y": f, "acc": f}

RSSI values are integer dBm in [-120, 0]; headings are degrees in
[0, 360); GPS accuracy is meters > 0.  `parse_trace(serialize_trace(t))`
is the identity for every valid trace.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrace, MalformedRecord, NonMonotonicTime

RSSI_MIN = -120
RSSI_MAX = 0


@dataclass(frozen=True, slots=True)
class Accel:
    """Raw accelerometer vector in the device frame, m/s² (includes gravity)."""

    ax: float
    ay: float
    az: float


@dataclass(frozen=True, slots=True)
class Mag:
    """Compass heading in degrees, [0, 360), 0 along +x of the local frame."""

    heading_deg: float


@dataclass(frozen=True, slots=True)
class ApReading:
    bssid: str
    rssi: int


@dataclass(frozen=True, slots=True)
class WifiScan:
    aps: tuple[ApReading, ...]


@dataclass(frozen=True, slots=True)
class GsmScan:
    cell_id: str
    rssi: int


@dataclass(frozen=True, slots=True)
class GpsFix:
    """Planar building-local fix in meters with reported accuracy."""

    x: float
    y: float
    accuracy: float


Payload = Accel | Mag | WifiScan | GsmScan | GpsFix

_KIND_OF = {Accel: "accel", Mag: "mag", WifiScan: "wifi", GsmScan: "gsm", GpsFix: "gps"}


@dataclass(frozen=True, slots=True)
class SensorSample:
    t: int
    payload: Payload

    @property
    def kind(self) -> str:
        return _KIND_OF[type(self.payload)]


@dataclass(frozen=True)
class Trace:
    trace_id: str
    user_id: str
    device_id: str
    samples: tuple[SensorSample, ...]


@dataclass(frozen=True, slots=True)
class TraceParams:
    """Shared signal constants: local gravity and the front-end filter width."""

    gravity_g: float = 9.81
    smooth_window_ms: int = 150

    def __post_init__(self):
        if not self.gravity_g > 0:
            raise ValueError("gravity_g must be > 0")
        if self.smooth_window_ms < 0:
            raise ValueError("smooth_window_ms must be >= 0")


# -- parsing / serialization -------------------------------------------------


def _need(record: dict, key: str, line_no: int):
    if key not in record:
        raise MalformedRecord(f"missing field {key!r}", line_no)
    return record[key]


def _check_keys(record: dict, allowed: set[str], line_no: int):
    extra = set(record) - allowed
    if extra:
        raise MalformedRecord(f"unknown fields {sorted(extra)}", line_no)


def _as_float(value, name: str, line_no: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(f"{name} must be a number", line_no)
    value = float(value)
    if not math.isfinite(value):
        raise MalformedRecord(f"{name} must be finite", line_no)
    return value


def _as_rssi(value, line_no: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord("rssi must be an integer", line_no)
    if not RSSI_MIN <= value <= RSSI_MAX:
        raise MalformedRecord(f"rssi {value} outside [{RSSI_MIN}, {RSSI_MAX}] dBm", line_no)
    return value


def _parse_payload(record: dict, kind: str, line_no: int) -> Payload:
    if kind == "accel":
        _check_keys(record, {"t", "kind", "ax", "ay", "az"}, line_no)
        return Accel(*(_as_float(_need(record, k, line_no), k, line_no) for k in ("ax", "ay", "az")))
    if kind == "mag":
        _check_keys(record, {"t", "kind", "heading"}, line_no)
        heading = _as_float(_need(record, "heading", line_no), "heading", line_no)
        if not 0.0 <= heading < 360.0:
            raise MalformedRecord(f"heading {heading} outside [0, 360)", line_no)
        return Mag(heading)
    if kind == "wifi":
        _check_keys(record, {"t", "kind", "aps"}, line_no)
        aps = _need(record, "aps", line_no)
        if not isinstance(aps, list):
            raise MalformedRecord("aps must be a list", line_no)
        readings = []
        for ap in aps:
            if not isinstance(ap, dict):
                raise MalformedRecord("ap entry must be an object", line_no)
            _check_keys(ap, {"bssid", "rssi"}, line_no)
            bssid = _need(ap, "bssid", line_no)
            if not isinstance(bssid, str) or not bssid:
                raise MalformedRecord("bssid must be a non-empty string", line_no)
            readings.append(ApReading(bssid, _as_rssi(_need(ap, "rssi", line_no), line_no)))
        return WifiScan(tuple(readings))
    if kind == "gsm":
        _check_keys(record, {"t", "kind", "cell", "rssi"}, line_no)
        cell = _need(record, "cell", line_no)
        if not isinstance(cell, str) or not cell:
            raise MalformedRecord("cell must be a non-empty string", line_no)
        return GsmScan(cell, _as_rssi(_need(record, "rssi", line_no), line_no))
    if kind == "gps":
        _check_keys(record, {"t", "kind", "x", "y", "acc"}, line_no)
        x = _as_float(_need(record, "x", line_no), "x", line_no)
        y = _as_float(_need(record, "y", line_no), "y", line_no)
        acc = _as_float(_need(record, "acc", line_no), "acc", line_no)
        if not acc > 0:
            raise MalformedRecord("acc must be > 0", line_no)
        return GpsFix(x, y, acc)
    raise MalformedRecord(f"unknown kind {kind!r}", line_no)


def parse_trace(data: bytes | str) -> Trace:
    """Parse the JSONL wire format into a Trace.

    Samples are re-sorted by timestamp if needed (the sort is stable, so
    same-t samples of different kinds keep file order).  Raises
    MalformedRecord on schema violations, NonMonotonicTime when two samples
    of one kind share a timestamp, EmptyTrace when no sample records follow
    the header.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines:
        raise EmptyTrace("empty input")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON ({exc.msg})", 1) from exc
    if not isinstance(header, dict):
        raise MalformedRecord("header must be an object", 1)
    _check_keys(header, {"trace_id", "user_id", "device_id"}, 1)
    ids = []
    for key in ("trace_id", "user_id", "device_id"):
        value = _need(header, key, 1)
        if not isinstance(value, str) or not value:
            raise MalformedRecord(f"{key} must be a non-empty string", 1)
        ids.append(value)

    samples = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON ({exc.msg})", line_no) from exc
        if not isinstance(record, dict):
            raise MalformedRecord("record must be an object", line_no)
        t = _need(record, "t", line_no)
        if isinstance(t, bool) or not isinstance(t, int) or t < 0:
            raise MalformedRecord("t must be a non-negative integer", line_no)
        kind = _need(record, "kind", line_no)
        samples.append(SensorSample(t, _parse_payload(record, kind, line_no)))

    if not samples:
        raise EmptyTrace("no sample records after the header")
    samples.sort(key=lambda s: s.t)
    last_t: dict[str, int] = {}
    for sample in samples:
        prev = last_t.get(sample.kind)
        if prev is not None and sample.t == prev:
            raise NonMonotonicTime(f"duplicate t={sample.t} for kind {sample.kind!r}")
        last_t[sample.kind] = sample.t
    return Trace(ids[0], ids[1], ids[2], tuple(samples))


def _record_dict(sample: SensorSample) -> dict:
    p = sample.payload
    if isinstance(p, Accel):
        return {"t": sample.t, "kind": "accel", "ax": p.ax, "ay": p.ay, "az": p.az}
    if isinstance(p, Mag):
        return {"t": sample.t, "kind": "mag", "heading": p.heading_deg}
    if isinstance(p, WifiScan):
        return {
            "t": sample.t,
            "kind": "wifi",
            "aps": [{"bssid": ap.bssid, "rssi": ap.rssi} for ap in p.aps],
        }
    if isinstance(p, GsmScan):
        return {"t": sample.t, "kind": "gsm", "cell": p.cell_id, "rssi": p.rssi}
    if isinstance(p, GpsFix):
        return {"t": sample.t, "kind": "gps", "x": p.x, "y": p.y, "acc": p.accuracy}
    raise TypeError(f"unknown payload {type(p).__name__}")


def serialize_trace(trace: Trace) -> bytes:
    """Serialize to the JSONL wire format (inverse of parse_trace)."""
    out = [
        json.dumps(
            {"trace_id": trace.trace_id, "user_id": trace.user_id, "device_id": trace.device_id},
            separators=(", ", ": "),
        )
    ]
    out.extend(json.dumps(_record_dict(s), separators=(", ", ": ")) for s in trace.samples)
    return ("\n".join(out) + "\n").encode("utf-8")


# -- derived signals ---------------------------------------------------------


def linear_accel_magnitude(sample: Accel, params: TraceParams) -> float:
    """Orientation-independent motion signal: |a| - g, m/s² (may be negative)."""
    return math.sqrt(sample.ax**2 + sample.ay**2 + sample.az**2) - params.gravity_g


def magnitude_signal(trace: Trace, params: TraceParams) -> tuple[np.ndarray, np.ndarray]:
    """All accel samples as (t int64 ms, |a| - g float64) arrays."""
    t = []
    mags = []
    g = params.gravity_g
    for s in trace.samples:
        p = s.payload
        if type(p) is Accel:
            t.append(s.t)
            mags.append(math.sqrt(p.ax * p.ax + p.ay * p.ay + p.az * p.az) - g)
    return np.asarray(t, dtype=np.int64), np.asarray(mags, dtype=np.float64)


def smooth_arrays(t: np.ndarray, values: np.ndarray, window_ms: float) -> np.ndarray:
    """Centered moving average over samples within ±window_ms/2 (inclusive).

    Output has the same length as the input; window_ms = 0 is the identity.
    """
    if window_ms == 0 or len(values) <= 1:
        return np.array(values, dtype=np.float64, copy=True)
    half = window_ms / 2.0
    lo = np.searchsorted(t, t - half, side="left")
    hi = np.searchsorted(t, t + half, side="right")
    csum = np.concatenate(([0.0], np.cumsum(values, dtype=np.float64)))
    return (csum[hi] - csum[lo]) / (hi - lo)


def smooth(signal, window_ms: float):
    """`smooth_arrays` over a sequence of (t, value) pairs."""
    if len(signal) == 0:
        return []
    t = np.asarray([p[0] for p in signal], dtype=np.int64)
    v = np.asarray([p[1] for p in signal], dtype=np.float64)
    out = smooth_arrays(t, v, window_ms)
    return [(int(ti), float(vi)) for ti, vi in zip(t, out)]


# -- sample accessors --------------------------------------------------------


def mag_arrays(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """Compass samples as (t int64 ms, heading float64 deg) arrays."""
    t = []
    headings = []
    for s in trace.samples:
        if type(s.payload) is Mag:
            t.append(s.t)
            headings.append(s.payload.heading_deg)
    return np.asarray(t, dtype=np.int64), np.asarray(headings, dtype=np.float64)


def wifi_samples(trace: Trace) -> list[tuple[int, WifiScan]]:
    return [(s.t, s.payload) for s in trace.samples if type(s.payload) is WifiScan]


def gsm_samples(trace: Trace) -> list[tuple[int, GsmScan]]:
    return [(s.t, s.payload) for s in trace.samples if type(s.payload) is GsmScan]


def gps_samples(trace: Trace) -> list[tuple[int, GpsFix]]:
    return [(s.t, s.payload) for s in trace.samples if type(s.payload) is GpsFix]

"""Block grid: rasterizing tracks into mergeable per-block statistics.

Every sensor sample is attributed to the block containing the track's
time-interpolated position at the sample's timestamp.  Per-block
statistics are kept as integer sufficient sums (acceleration in fixed
point, micro-m/s²; dwell in microseconds; RSSI in integer dBm), which
makes merging exactly associative and commutative: rasterizing a corpus
in any partitioning and merging yields bit-identical accumulators, so
anything derived downstream (features, classifiers) is byte-stable too.

Per-block features are averages, so they do not change when the same
traces are ingested again; the floor plan can grow incrementally.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .areas import AreaClass
from .errors import EmptyBlock, OutOfGrid, TraceIdMismatch
from .reckoning import Track, track_positions_at
from .trace import Accel, GsmScan, Trace, WifiScan

ACCEL_SCALE = 10**6  # fixed-point micro-m/s² resolution of the accel sums
TURN_MIN_DEG = 45.0  # heading change that counts as a turn
RSSI_SENTINEL = -100.0  # dBm stand-in when a block heard no WiFi / GSM


@dataclass(frozen=True, slots=True)
class GridSpec:
    origin: tuple[float, float] = (0.0, 0.0)
    block_size: float = 0.7
    width: int = 1
    height: int = 1

    def __post_init__(self):
        if self.block_size <= 0:
            raise ValueError("block_size must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")

    def centroid(self, col: int, row: int) -> tuple[float, float]:
        ox, oy = self.origin
        return ox + (col + 0.5) * self.block_size, oy + (row + 0.5) * self.block_size


@dataclass
class BlockAccumulator:
    """Integer sufficient statistics for one block; merge is elementwise sum."""

    trace_count: int = 0
    dwell_us: int = 0
    n_accel: int = 0
    sum_ax: int = 0
    sum_ay: int = 0
    sum_az: int = 0
    sumsq_ax: int = 0
    sumsq_ay: int = 0
    sumsq_az: int = 0
    cross_xy: int = 0
    cross_xz: int = 0
    cross_yz: int = 0
    turn_count: int = 0
    n_wifi: int = 0
    wifi_rssi_sum: int = 0
    n_gsm: int = 0
    gsm_rssi_sum: int = 0


_ACC_FIELDS = tuple(f.name for f in dataclass_fields(BlockAccumulator))


def merge(a: BlockAccumulator, b: BlockAccumulator) -> BlockAccumulator:
    """Elementwise sum of two accumulators (associative and commutative)."""
    return BlockAccumulator(**{name: getattr(a, name) + getattr(b, name) for name in _ACC_FIELDS})


FEATURE_NAMES = (
    "dwell_avg_s",
    "mean_ax",
    "mean_ay",
    "mean_az",
    "var_ax",
    "var_ay",
    "var_az",
    "corr_xy",
    "corr_xz",
    "corr_yz",
    "turns_per_trace",
    "wifi_rssi_avg",
    "gsm_rssi_avg",
)


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """The 13 per-block classification features, in FEATURE_NAMES order."""

    dwell_avg_s: float
    mean_ax: float
    mean_ay: float
    mean_az: float
    var_ax: float
    var_ay: float
    var_az: float
    corr_xy: float
    corr_xz: float
    corr_yz: float
    turns_per_trace: float
    wifi_rssi_avg: float
    gsm_rssi_avg: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


@dataclass
class GridMap:
    spec: GridSpec
    blocks: dict[tuple[int, int], BlockAccumulator]
    labels: dict[tuple[int, int], AreaClass]

    def __init__(self, spec: GridSpec, blocks=None, labels=None):
        self.spec = spec
        self.blocks = dict(blocks) if blocks else {}
        self.labels = dict(labels) if labels else {}

    def block(self, col: int, row: int) -> BlockAccumulator:
        key = (col, row)
        acc = self.blocks.get(key)
        if acc is None:
            if not (0 <= col < self.spec.width and 0 <= row < self.spec.height):
                raise OutOfGrid(f"block {key} outside {self.spec.width}x{self.spec.height} grid")
            acc = self.blocks[key] = BlockAccumulator()
        return acc


def spec_for_extent(
    extent: tuple[float, float], block_size: float, margin_blocks: int = 0
) -> GridSpec:
    """Smallest block grid covering a rectangular extent anchored at (0, 0).

    margin_blocks adds whole blocks of slack on every side (the origin
    shifts negative), so slightly drifted tracks still rasterize.
    """
    width = max(1, math.ceil(extent[0] / block_size - 1e-9)) + 2 * margin_blocks
    height = max(1, math.ceil(extent[1] / block_size - 1e-9)) + 2 * margin_blocks
    origin = (-margin_blocks * block_size, -margin_blocks * block_size)
    return GridSpec(origin=origin, block_size=block_size, width=width, height=height)


def block_of(spec: GridSpec, x: float, y: float) -> tuple[int, int]:
    """Block containing a point.

    Points exactly on an interior boundary belong to the higher-index
    block; the outermost edge belongs to the last block.
    """
    col = _axis_index((x - spec.origin[0]) / spec.block_size, spec.width, x, "x")
    row = _axis_index((y - spec.origin[1]) / spec.block_size, spec.height, y, "y")
    return col, row


def _axis_index(f: float, count: int, coord: float, axis: str) -> int:
    i = math.floor(f)
    if i == count and f == count:
        return count - 1
    if 0 <= i < count:
        return int(i)
    raise OutOfGrid(f"{axis}={coord} outside grid extent")


def _axis_indices(coords: np.ndarray, origin: float, size: float, count: int, axis: str) -> np.ndarray:
    f = (coords - origin) / size
    idx = np.floor(f).astype(np.int64)
    on_outer_edge = (idx == count) & (f == count)
    idx[on_outer_edge] = count - 1
    if len(idx) and (idx.min() < 0 or idx.max() >= count):
        bad = coords[(idx < 0) | (idx >= count)][0]
        raise OutOfGrid(f"{axis}={bad} outside grid extent")
    return idx


def _flat_blocks(spec: GridSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    cols = _axis_indices(xs, spec.origin[0], spec.block_size, spec.width, "x")
    rows = _axis_indices(ys, spec.origin[1], spec.block_size, spec.height, "y")
    return rows * spec.width + cols


def _heading_delta(h0: float, h1: float) -> float:
    d = (h1 - h0) % 360.0
    return d - 360.0 if d > 180.0 else d


def _segment_dwell(spec: GridSpec, track: Track, t_lo: int, t_hi: int, dwell_us: dict[int, int]):
    """Exact per-block dwell along the track polyline between t_lo and t_hi.

    The position before the first track point and after the last one is
    held constant, matching the clamped interpolation used for samples.
    """
    pts = track.points
    # build the piecewise-linear schedule covering [t_lo, t_hi]
    knots: list[tuple[float, float, float]] = []
    if t_lo < pts[0].t:
        knots.append((float(t_lo), pts[0].x, pts[0].y))
    for pt in pts:
        knots.append((float(pt.t), pt.x, pt.y))
    if t_hi > pts[-1].t:
        knots.append((float(t_hi), pts[-1].x, pts[-1].y))

    for (ta, xa, ya), (tb, xb, yb) in zip(knots, knots[1:]):
        a = max(ta, float(t_lo))
        b = min(tb, float(t_hi))
        if b <= a:
            continue
        # clip the segment geometry to [a, b]
        if tb > ta:
            fa = (a - ta) / (tb - ta)
            fb = (b - ta) / (tb - ta)
        else:
            fa = fb = 0.0
        x0 = xa + (xb - xa) * fa
        y0 = ya + (yb - ya) * fa
        x1 = xa + (xb - xa) * fb
        y1 = ya + (yb - ya) * fb
        duration = b - a
        if x0 == x1 and y0 == y1:
            col, row = block_of(spec, x0, y0)
            flat = row * spec.width + col
            dwell_us[flat] = dwell_us.get(flat, 0) + round(duration * 1000.0)
            continue
        cuts = [0.0, 1.0]
        size = spec.block_size
        for p0, p1, origin in ((x0, x1, spec.origin[0]), (y0, y1, spec.origin[1])):
            if p0 == p1:
                continue
            i0 = math.floor((p0 - origin) / size)
            i1 = math.floor((p1 - origin) / size)
            for i in range(min(i0, i1) + 1, max(i0, i1) + 1):
                tau = (origin + i * size - p0) / (p1 - p0)
                if 0.0 < tau < 1.0:
                    cuts.append(tau)
        cuts.sort()
        for ca, cb in zip(cuts, cuts[1:]):
            if cb <= ca:
                continue
            mid = (ca + cb) / 2.0
            col, row = block_of(spec, x0 + (x1 - x0) * mid, y0 + (y1 - y0) * mid)
            flat = row * spec.width + col
            dwell_us[flat] = dwell_us.get(flat, 0) + round(duration * (cb - ca) * 1000.0)


def rasterize(track: Track, trace: Trace, grid: GridMap) -> GridMap:
    """Fold one walk into the grid's block statistics; returns the grid.

    Updates, per block this trace touches: trace_count (once), exact dwell
    time, accel sums / squares / cross products, turns at step endpoints,
    and the strongest-AP WiFi plus GSM RSSI sums.
    """
    if track.trace_id != trace.trace_id:
        raise TraceIdMismatch(f"track {track.trace_id!r} vs trace {trace.trace_id!r}")
    if not track.points:
        raise TraceIdMismatch(f"track {track.trace_id!r} has no points")
    spec = grid.spec
    n_cells = spec.width * spec.height

    t_acc: list[int] = []
    acc_vals: list[tuple[float, float, float]] = []
    t_wifi: list[int] = []
    wifi_best: list[int] = []
    t_gsm: list[int] = []
    gsm_vals: list[int] = []
    for s in trace.samples:
        p = s.payload
        if type(p) is Accel:
            t_acc.append(s.t)
            acc_vals.append((p.ax, p.ay, p.az))
        elif type(p) is WifiScan:
            if p.aps:
                t_wifi.append(s.t)
                wifi_best.append(max(ap.rssi for ap in p.aps))
        elif type(p) is GsmScan:
            t_gsm.append(s.t)
            gsm_vals.append(p.rssi)

    visited: set[int] = set()
    new_n_accel = np.zeros(n_cells, dtype=np.int64)
    new_sums = np.zeros((9, n_cells), dtype=np.int64)
    if t_acc:
        xs, ys = track_positions_at(track, np.asarray(t_acc, dtype=np.int64))
        flat = _flat_blocks(spec, xs, ys)
        vals = np.asarray(acc_vals, dtype=np.float64)
        k = np.rint(vals * ACCEL_SCALE).astype(np.int64)
        np.add.at(new_n_accel, flat, 1)
        for slot, data in enumerate(
            (
                k[:, 0],
                k[:, 1],
                k[:, 2],
                k[:, 0] * k[:, 0],
                k[:, 1] * k[:, 1],
                k[:, 2] * k[:, 2],
                k[:, 0] * k[:, 1],
                k[:, 0] * k[:, 2],
                k[:, 1] * k[:, 2],
            )
        ):
            np.add.at(new_sums[slot], flat, data)
        visited.update(np.unique(flat).tolist())

    wifi_n = np.zeros(n_cells, dtype=np.int64)
    wifi_sum = np.zeros(n_cells, dtype=np.int64)
    if t_wifi:
        xs, ys = track_positions_at(track, np.asarray(t_wifi, dtype=np.int64))
        flat = _flat_blocks(spec, xs, ys)
        np.add.at(wifi_n, flat, 1)
        np.add.at(wifi_sum, flat, np.asarray(wifi_best, dtype=np.int64))
        visited.update(np.unique(flat).tolist())

    gsm_n = np.zeros(n_cells, dtype=np.int64)
    gsm_sum = np.zeros(n_cells, dtype=np.int64)
    if t_gsm:
        xs, ys = track_positions_at(track, np.asarray(t_gsm, dtype=np.int64))
        flat = _flat_blocks(spec, xs, ys)
        np.add.at(gsm_n, flat, 1)
        np.add.at(gsm_sum, flat, np.asarray(gsm_vals, dtype=np.int64))
        visited.update(np.unique(flat).tolist())

    turns: dict[int, int] = {}
    for prev, pt in zip(track.points, track.points[1:]):
        if abs(_heading_delta(prev.heading_deg, pt.heading_deg)) >= TURN_MIN_DEG:
            col, row = block_of(spec, pt.x, pt.y)
            flat_id = row * spec.width + col
            turns[flat_id] = turns.get(flat_id, 0) + 1
            visited.add(flat_id)

    dwell_us: dict[int, int] = {}
    if trace.samples:
        _segment_dwell(spec, track, trace.samples[0].t, trace.samples[-1].t, dwell_us)
    visited.update(f for f, d in dwell_us.items() if d > 0)

    for flat_id in sorted(visited):
        col = flat_id % spec.width
        row = flat_id // spec.width
        acc = grid.block(col, row)
        acc.trace_count += 1
        acc.dwell_us += dwell_us.get(flat_id, 0)
        acc.n_accel += int(new_n_accel[flat_id])
        acc.sum_ax += int(new_sums[0, flat_id])
        acc.sum_ay += int(new_sums[1, flat_id])
        acc.sum_az += int(new_sums[2, flat_id])
        acc.sumsq_ax += int(new_sums[3, flat_id])
        acc.sumsq_ay += int(new_sums[4, flat_id])
        acc.sumsq_az += int(new_sums[5, flat_id])
        acc.cross_xy += int(new_sums[6, flat_id])
        acc.cross_xz += int(new_sums[7, flat_id])
        acc.cross_yz += int(new_sums[8, flat_id])
        acc.turn_count += turns.get(flat_id, 0)
        acc.n_wifi += int(wifi_n[flat_id])
        acc.wifi_rssi_sum += int(wifi_sum[flat_id])
        acc.n_gsm += int(gsm_n[flat_id])
        acc.gsm_rssi_sum += int(gsm_sum[flat_id])
    return grid


def merge_grids(a: GridMap, b: GridMap) -> GridMap:
    """Merge per-block accumulators of two grids over the same spec."""
    if a.spec != b.spec:
        raise ValueError("cannot merge grids with different specs")
    out = GridMap(a.spec, labels={**a.labels, **b.labels})
    for key in sorted(set(a.blocks) | set(b.blocks)):
        left = a.blocks.get(key, BlockAccumulator())
        right = b.blocks.get(key, BlockAccumulator())
        out.blocks[key] = merge(left, right)
    return out


def features(acc: BlockAccumulator) -> FeatureVector:
    """Derive the 13 classification features from one block's sums.

    All features are per-trace or per-sample averages, so k-fold
    replication of the underlying traces leaves them unchanged.
    Correlations fall back to 0 when an axis has (near-)zero variance and
    RSSI averages fall back to -100 dBm when nothing was heard.
    """
    if acc.trace_count < 1 or acc.n_accel < 2:
        raise EmptyBlock("feature extraction needs trace_count >= 1 and n_accel >= 2")
    n = acc.n_accel
    mean_ax = (acc.sum_ax / ACCEL_SCALE) / n
    mean_ay = (acc.sum_ay / ACCEL_SCALE) / n
    mean_az = (acc.sum_az / ACCEL_SCALE) / n
    sq_scale = ACCEL_SCALE * ACCEL_SCALE
    var_ax = max((acc.sumsq_ax / sq_scale) / n - mean_ax * mean_ax, 0.0)
    var_ay = max((acc.sumsq_ay / sq_scale) / n - mean_ay * mean_ay, 0.0)
    var_az = max((acc.sumsq_az / sq_scale) / n - mean_az * mean_az, 0.0)

    def corr(cross: int, mean_a: float, mean_b: float, var_a: float, var_b: float) -> float:
        if var_a < 1e-12 or var_b < 1e-12:
            return 0.0
        cov = (cross / sq_scale) / n - mean_a * mean_b
        return min(1.0, max(-1.0, cov / math.sqrt(var_a * var_b)))

    return FeatureVector(
        dwell_avg_s=(acc.dwell_us / 1_000_000) / acc.trace_count,
        mean_ax=mean_ax,
        mean_ay=mean_ay,
        mean_az=mean_az,
        var_ax=var_ax,
        var_ay=var_ay,
        var_az=var_az,
        corr_xy=corr(acc.cross_xy, mean_ax, mean_ay, var_ax, var_ay),
        corr_xz=corr(acc.cross_xz, mean_ax, mean_az, var_ax, var_az),
        corr_yz=corr(acc.cross_yz, mean_ay, mean_az, var_ay, var_az),
        turns_per_trace=acc.turn_count / acc.trace_count,
        wifi_rssi_avg=acc.wifi_rssi_sum / acc.n_wifi if acc.n_wifi else RSSI_SENTINEL,
        gsm_rssi_avg=acc.gsm_rssi_sum / acc.n_gsm if acc.n_gsm else RSSI_SENTINEL,
    )


def outline(grid: GridMap) -> set[tuple[int, int]]:
    """Walkable footprint: every block at least one trace went through."""
    return {key for key, acc in grid.blocks.items() if acc.trace_count >= 1}


# -- serialization -----------------------------------------------------------


def grid_to_json(grid: GridMap) -> str:
    blocks = []
    for (col, row) in sorted(grid.blocks, key=lambda key: (key[1], key[0])):
        acc = grid.blocks[(col, row)]
        entry = {"col": col, "row": row}
        entry.update({name: getattr(acc, name) for name in _ACC_FIELDS})
        label = grid.labels.get((col, row))
        if label is not None:
            entry["label"] = label.label
        blocks.append(entry)
    doc = {
        "spec": {
            "origin": list(grid.spec.origin),
            "block_size": grid.spec.block_size,
            "width": grid.spec.width,
            "height": grid.spec.height,
        },
        "blocks": blocks,
    }
    return json.dumps(doc, indent=2) + "\n"


def grid_from_json(text: str) -> GridMap:
    doc = json.loads(text)
    spec_doc = doc["spec"]
    spec = GridSpec(
        origin=tuple(spec_doc["origin"]),
        block_size=spec_doc["block_size"],
        width=spec_doc["width"],
        height=spec_doc["height"],
    )
    grid = GridMap(spec)
    for entry in doc["blocks"]:
        key = (entry["col"], entry["row"])
        grid.blocks[key] = BlockAccumulator(**{name: entry[name] for name in _ACC_FIELDS})
        if "label" in entry:
            grid.labels[key] = AreaClass.from_label(entry["label"])
    return grid

"""Synthetic worlds and sensor walks with exact ground truth.

The simulator is the toolkit's verification oracle: it generates a floor
plan with known per-block classes, places access points, and synthesizes
full sensor traces for seeded random walks, so every downstream stage can
be checked against exact step counts, paths, and block labels.

Walk synthesis:

  * One stride spans 1/step_hz seconds and moves exactly one block.  Its
    magnitude waveform is one flattened positive lobe followed by one
    negative lobe (lobe_ms each, sin^lobe_exponent shape), then quiet to
    the end of the stride.  Stair strides get a taller vertical lobe plus
    an in-phase forward component (positive forward/vertical correlation).
  * Dwells hold position; office dwells carry occasional "fidget" bursts
    (sub-walking wobble around 1.2 m/s²) that never complete a step
    pattern but keep the signal honestly messy.
  * The world-frame specific force (gravity + motion) is rotated into a
    random per-trace device frame before per-axis Gaussian noise is
    added, so nothing downstream may rely on device orientation.
  * Compass headings are the true facing plus AR(1) Gaussian noise
    (magnetic disturbances are location-bound, hence time-correlated at
    walking speed), emitted at mag_hz.
  * WiFi/GSM RSSI follows log-distance path loss with lognormal
    shadowing, attenuated by a fixed extra loss inside the elevator; GPS
    fixes appear only during the entry dwell.

Everything is a pure function of the seeds: same seed, same bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .areas import AreaClass
from .errors import InfeasibleLayout
from .grid import GridSpec, block_of, spec_for_extent
from .reckoning import Track, TrackPoint, unit_vector
from .trace import (
    Accel,
    ApReading,
    GpsFix,
    GsmScan,
    Mag,
    SensorSample,
    Trace,
    WifiScan,
)

GRAVITY = 9.81


@dataclass(frozen=True, slots=True)
class WorldSpec:
    seed: int = 0
    extent: tuple[float, float] = (28.0, 16.0)
    label_block_size: float = 0.7
    office_span_blocks: int = 5  # office depth and width, in blocks
    corridor_rows: int = 3
    ap_count: int = 6
    p0_dbm: float = -40.0
    path_loss_exponent: float = 3.0
    shadow_sigma_db: float = 4.0
    elevator_extra_loss_db: float = 20.0
    gsm_p0_dbm: float = -30.0
    gsm_exponent: float = 2.7

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("extent must be positive")
        if self.ap_count < 1:
            raise ValueError("ap_count must be >= 1")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")


@dataclass(frozen=True)
class Room:
    kind: AreaClass
    cols: tuple[int, int]  # inclusive block range
    rows: tuple[int, int]
    door: tuple[int, int]  # in-room cell adjacent to the corridor


@dataclass(frozen=True)
class World:
    spec: WorldSpec
    grid_spec: GridSpec
    rooms: tuple[Room, ...]
    corridor_cols: tuple[int, int]
    corridor_rows_range: tuple[int, int]
    walk_row: int
    entrance: tuple[int, int]
    labels: dict[tuple[int, int], AreaClass]
    ap_positions: tuple[tuple[float, float], ...]
    gsm_tower: tuple[float, float]
    gsm_cell_id: str = "cell-0"

    @property
    def extent(self) -> tuple[float, float]:
        return self.spec.extent

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return self.grid_spec.centroid(*cell)

    def walkable_cells(self) -> list[tuple[int, int]]:
        return sorted(self.labels, key=lambda k: (k[1], k[0]))

    def class_rects(self) -> list[tuple[AreaClass, float, float, float, float]]:
        bs = self.grid_spec.block_size
        rects = [
            (
                room.kind,
                room.cols[0] * bs,
                room.rows[0] * bs,
                (room.cols[1] + 1) * bs,
                (room.rows[1] + 1) * bs,
            )
            for room in self.rooms
        ]
        rects.append(
            (
                AreaClass.CORRIDOR,
                self.corridor_cols[0] * bs,
                self.corridor_rows_range[0] * bs,
                (self.corridor_cols[1] + 1) * bs,
                (self.corridor_rows_range[1] + 1) * bs,
            )
        )
        return rects

    def class_at(self, x: float, y: float) -> AreaClass | None:
        for kind, x0, y0, x1, y1 in self.class_rects():
            if x0 <= x < x1 and y0 <= y < y1:
                return kind
        return None

    def labels_for(self, spec: GridSpec) -> dict[tuple[int, int], AreaClass]:
        """Ground-truth labels at any block size: dominant walkable area."""
        areas: dict[tuple[int, int], dict[AreaClass, float]] = {}
        bs = spec.block_size
        ox, oy = spec.origin
        for kind, x0, y0, x1, y1 in self.class_rects():
            c0 = max(0, math.floor((x0 - ox) / bs + 1e-9))
            c1 = min(spec.width - 1, math.ceil((x1 - ox) / bs - 1e-9) - 1)
            r0 = max(0, math.floor((y0 - oy) / bs + 1e-9))
            r1 = min(spec.height - 1, math.ceil((y1 - oy) / bs - 1e-9) - 1)
            for col in range(c0, c1 + 1):
                for row in range(r0, r1 + 1):
                    w = min(x1, ox + (col + 1) * bs) - max(x0, ox + col * bs)
                    h = min(y1, oy + (row + 1) * bs) - max(y0, oy + row * bs)
                    if w > 1e-9 and h > 1e-9:
                        cell = areas.setdefault((col, row), {})
                        cell[kind] = cell.get(kind, 0.0) + w * h
        labels = {}
        for key, per_class in areas.items():
            labels[key] = min(per_class, key=lambda k: (-per_class[k], int(k)))
        return labels


def gen_world(spec: WorldSpec | None = None) -> World:
    """Deterministic world from the spec's seed: offices off a corridor
    spine, one elevator cluster, one stairs cluster, seeded AP placement."""
    spec = spec or WorldSpec()
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 101)))
    bs = spec.label_block_size
    grid_spec = spec_for_extent(spec.extent, bs)
    width, height = grid_spec.width, grid_spec.height
    span = spec.office_span_blocks

    mid = height // 2
    cor_r0 = mid - spec.corridor_rows // 2
    cor_r1 = cor_r0 + spec.corridor_rows - 1
    south_r0, south_r1 = cor_r0 - span, cor_r0 - 1
    north_r0, north_r1 = cor_r1 + 1, cor_r1 + span
    if south_r0 < 1 or north_r1 > height - 2 or width < 2 * span + 5:
        raise InfeasibleLayout(
            f"extent {spec.extent} cannot fit two office bands, a corridor, stairs and an elevator"
        )

    rooms: list[Room] = []

    def door_col(c0: int, c1: int) -> int:
        return int(rng.integers(c0 + 1, c1))  # off the room corners

    # north band: offices from the left, elevator against the right margin
    elev_c0, elev_c1 = width - 4, width - 3
    col = 1
    while col + span - 1 <= elev_c0 - 1:
        c0, c1 = col, col + span - 1
        rooms.append(Room(AreaClass.OFFICE, (c0, c1), (north_r0, north_r1), (door_col(c0, c1), north_r0)))
        col += span + 1
    rooms.append(Room(AreaClass.ELEVATOR, (elev_c0, elev_c1), (north_r0, north_r0 + 1), (elev_c0, north_r0)))

    # south band: stairs against the left margin, offices after
    stair_c0, stair_c1 = 1, 2
    rooms.append(Room(AreaClass.STAIRS, (stair_c0, stair_c1), (south_r1 - 2, south_r1), (stair_c1, south_r1)))
    col = stair_c1 + 2
    while col + span - 1 <= width - 2:
        c0, c1 = col, col + span - 1
        rooms.append(Room(AreaClass.OFFICE, (c0, c1), (south_r0, south_r1), (door_col(c0, c1), south_r1)))
        col += span + 1

    if sum(1 for r in rooms if r.kind is AreaClass.OFFICE) < 2:
        raise InfeasibleLayout(f"extent {spec.extent} leaves no room for offices")

    cor_c0, cor_c1 = 1, width - 2
    labels: dict[tuple[int, int], AreaClass] = {}
    for c in range(cor_c0, cor_c1 + 1):
        for r in range(cor_r0, cor_r1 + 1):
            labels[(c, r)] = AreaClass.CORRIDOR
    for room in rooms:
        for c in range(room.cols[0], room.cols[1] + 1):
            for r in range(room.rows[0], room.rows[1] + 1):
                labels[(c, r)] = room.kind

    _check_connected(labels)
    # walkers enter through an unlabeled vestibule cell just outside the
    # corridor, so the standing-at-the-door GPS window does not pollute
    # any classified block
    entrance = (cor_c0 - 1, (cor_r0 + cor_r1) // 2)

    cells = sorted(labels, key=lambda k: (k[1], k[0]))
    ap_idx = rng.choice(len(cells), size=min(spec.ap_count, len(cells)), replace=False)
    ap_positions = tuple(grid_spec.centroid(*cells[i]) for i in sorted(int(i) for i in ap_idx))
    gsm_tower = (spec.extent[0] * 1.8, spec.extent[1] * 2.5)

    return World(
        spec=spec,
        grid_spec=grid_spec,
        rooms=tuple(rooms),
        corridor_cols=(cor_c0, cor_c1),
        corridor_rows_range=(cor_r0, cor_r1),
        walk_row=(cor_r0 + cor_r1) // 2,
        entrance=entrance,
        labels=labels,
        ap_positions=ap_positions,
        gsm_tower=gsm_tower,
    )


def _check_connected(labels: dict[tuple[int, int], AreaClass]):
    cells = set(labels)
    start = next(iter(sorted(cells)))
    seen = {start}
    frontier = [start]
    while frontier:
        c, r = frontier.pop()
        for nxt in ((c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)):
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    if seen != cells:
        raise InfeasibleLayout("walkable area is not connected")


# -- walk parameters and segments ---------------------------------------------


@dataclass(frozen=True)
class WalkParams:
    seed: int = 0
    n_steps: int | None = None
    duration_ms: int | None = None
    step_hz: float = 2.0
    accel_peak: float = 2.5
    accel_noise_sigma: float = 0.4
    heading_noise_sigma: float = 10.0
    heading_noise_tau_ms: float = 1500.0
    sample_hz: int = 50
    mag_hz: int = 25
    scan_period_ms: int = 1000
    lobe_ms: float = 130.0
    lobe_gap_ms: float = 40.0
    lobe_exponent: float = 0.2
    horiz_amp: float = 1.0
    stair_peak_factor: float = 1.6
    fidget_amp: float = 1.2
    fidget_hz: float = 2.0
    office_visits: tuple[int, int] = (2, 4)
    office_cells: tuple[int, int] = (7, 13)
    office_pause_s: tuple[float, float] = (1.5, 3.0)
    office_desk_s: tuple[float, float] = (8.0, 18.0)
    elevator_dwell_s: tuple[float, float] = (20.0, 40.0)
    elevator_prob: float = 0.3
    stairs_prob: float = 0.3
    gps_noise_m: float = 0.2

    def __post_init__(self):
        if self.step_hz <= 0 or self.sample_hz <= 0 or self.mag_hz <= 0:
            raise ValueError("rates must be positive")
        if self.accel_peak <= 0:
            raise ValueError("accel_peak must be > 0")


@dataclass(frozen=True)
class _Stride:
    duration_ms: int
    heading_deg: float
    x0: float
    y0: float
    x1: float
    y1: float
    peak: float
    stair: bool = False


@dataclass(frozen=True)
class _Dwell:
    duration_ms: int
    x: float
    y: float
    facing_deg: float
    fidget: tuple[tuple[int, int, float], ...] = ()  # (offset_ms, len_ms, phase)
    gps: bool = False


@dataclass
class GroundTruth:
    """What actually happened on a walk: exact path, count, positions."""

    path: Track
    step_count: int
    t_knots: np.ndarray
    x_knots: np.ndarray
    y_knots: np.ndarray
    accel_blocks: list[tuple[int, int]] | None = None

    def position_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        tq = np.asarray(t, dtype=np.float64)
        return (
            np.interp(tq, self.t_knots, self.x_knots),
            np.interp(tq, self.t_knots, self.y_knots),
        )


def _fidget_windows(rng, duration_ms: int) -> tuple[tuple[int, int, float], ...]:
    """Alternating quiet / wobble bursts covering roughly a third of a dwell."""
    windows = []
    cursor = int(rng.uniform(600, 2200))
    # bursts end well before the dwell does: a step candidate born from a
    # wobble takes up to the maximum step duration (2 s) to abort, and it
    # must not still be pending when walking resumes
    while cursor < duration_ms - 2700:
        burst = int(rng.uniform(900, 2600))
        burst = min(burst, duration_ms - cursor - 2300)
        if burst > 400:
            windows.append((cursor, burst, float(rng.uniform(0, 2 * math.pi))))
        cursor += burst + int(rng.uniform(1200, 3200))
    return tuple(windows)


class _WalkBuilder:
    """Accumulates stride / dwell segments for one walk script."""

    def __init__(self, wp: WalkParams, rng, start_xy: tuple[float, float], step_length: float = 0.7):
        self.wp = wp
        self.rng = rng
        self.segments: list[_Stride | _Dwell] = []
        self.steps = 0
        self.total_ms = 0
        self.x, self.y = start_xy
        self.facing = 0.0
        self.step_length = step_length
        self.stride_ms = round(1000.0 / wp.step_hz)

    def budget_left(self) -> bool:
        if self.wp.n_steps is not None:
            return self.steps < self.wp.n_steps
        if self.wp.duration_ms is not None:
            return self.total_ms < self.wp.duration_ms
        return True

    def dwell(self, seconds: float, fidget: bool = False, gps: bool = False, face: float | None = None):
        duration = max(200, round(seconds * 1000))
        if face is not None:
            self.facing = face % 360.0
        windows = _fidget_windows(self.rng, duration) if fidget else ()
        self.segments.append(_Dwell(duration, self.x, self.y, self.facing, windows, gps))
        self.total_ms += duration

    def stride(self, heading_deg: float, stair: bool = False) -> bool:
        if not self.budget_left():
            return False
        heading_deg %= 360.0
        ux, uy = unit_vector(heading_deg)
        x1 = self.x + self.step_length * ux
        y1 = self.y + self.step_length * uy
        peak = self.wp.accel_peak * (self.wp.stair_peak_factor if stair else 1.0)
        self.segments.append(_Stride(self.stride_ms, heading_deg, self.x, self.y, x1, y1, peak, stair))
        self.x, self.y = x1, y1
        self.facing = heading_deg
        self.steps += 1
        self.total_ms += self.stride_ms
        return True


_HEADING_BY_DELTA = {(1, 0): 0.0, (0, 1): 90.0, (-1, 0): 180.0, (0, -1): 270.0}


def _cell_path(a: tuple[int, int], b: tuple[int, int], col_first: bool) -> list[tuple[int, int]]:
    """Axis-aligned cell path from a to b (exclusive of a, inclusive of b)."""
    path = []
    c, r = a
    def move_cols():
        nonlocal c
        while c != b[0]:
            c += 1 if b[0] > c else -1
            path.append((c, r))
    def move_rows():
        nonlocal r
        while r != b[1]:
            r += 1 if b[1] > r else -1
            path.append((c, r))
    if col_first:
        move_cols()
        move_rows()
    else:
        move_rows()
        move_cols()
    return path


class _WorldWalk:
    """Scripts a seeded random walk through a world's rooms."""

    def __init__(self, world: World, wp: WalkParams, rng):
        self.world = world
        self.wp = wp
        self.rng = rng
        self.cell = world.entrance
        self.room: Room | None = None
        self.builder = _WalkBuilder(
            wp, rng, world.cell_center(world.entrance), step_length=world.grid_spec.block_size
        )

    def _lane(self) -> int:
        r0, r1 = self.world.corridor_rows_range
        return int(self.rng.integers(r0, r1 + 1))

    def _walk_to(self, target: tuple[int, int], col_first: bool, stair: bool = False) -> bool:
        for nxt in _cell_path(self.cell, target, col_first):
            delta = (nxt[0] - self.cell[0], nxt[1] - self.cell[1])
            if not self.builder.stride(_HEADING_BY_DELTA[delta], stair=stair):
                return False
            self.cell = nxt
        return True

    def _to_corridor(self) -> bool:
        if self.room is not None:
            if not self._walk_to(self.room.door, col_first=bool(self.rng.integers(2))):
                return False
            self.room = None
        return self._walk_to((self.cell[0], self._lane()), col_first=False)

    def _enter(self, room: Room) -> bool:
        if not self._to_corridor():
            return False
        if not self._walk_to((room.door[0], self.cell[1]), col_first=True):
            return False
        if not self._walk_to(room.door, col_first=False):
            return False
        self.room = room
        # opening the door takes a moment; the pause belongs to the doorway
        # cell and its interpolation tail points into the room
        if room.kind is AreaClass.OFFICE:
            self.builder.dwell(self.rng.uniform(1.2, 2.2))
        return True

    def _random_cell(self, room: Room, avoid_door: bool = False) -> tuple[int, int]:
        while True:
            cell = (
                int(self.rng.integers(room.cols[0], room.cols[1] + 1)),
                int(self.rng.integers(room.rows[0], room.rows[1] + 1)),
            )
            if not avoid_door or cell != room.door:
                return cell

    def _deep_cell(self, room: Room) -> tuple[int, int]:
        """A cell well away from the door (desks sit by the far wall)."""
        col = int(self.rng.integers(room.cols[0], room.cols[1] + 1))
        door_row = room.door[1]
        if door_row == room.rows[0]:  # door on the low-row side
            row = int(self.rng.integers(min(room.rows[0] + 2, room.rows[1]), room.rows[1] + 1))
        else:
            row = int(self.rng.integers(room.rows[0], max(room.rows[1] - 2, room.rows[0]) + 1))
        return col, row

    def _hop_cell(self, room: Room) -> tuple[int, int]:
        """Next wander waypoint: an adjacent cell inside the room.

        One-cell hops make every in-room stride end at a stop, so visited
        office cells are pause cells, not drive-through cells.
        """
        for _ in range(12):
            dc, dr = ((1, 0), (-1, 0), (0, 1), (0, -1))[int(self.rng.integers(4))]
            col, row = self.cell[0] + dc, self.cell[1] + dr
            if (
                room.cols[0] <= col <= room.cols[1]
                and room.rows[0] <= row <= room.rows[1]
                and (col, row) != room.door
            ):
                return col, row
        return self._random_cell(room, avoid_door=True)

    def _hops_toward(self, room: Room, target: tuple[int, int]) -> bool:
        """One-cell hops to the target, pausing at every intermediate cell
        (in-room movement never sweeps through blocks at walking pace)."""
        while self.cell != target:
            if self.cell[0] != target[0]:
                nxt = (self.cell[0] + (1 if target[0] > self.cell[0] else -1), self.cell[1])
            else:
                nxt = (self.cell[0], self.cell[1] + (1 if target[1] > self.cell[1] else -1))
            if not self._walk_to(nxt, col_first=True):
                return False
            if nxt != target:
                self.builder.dwell(self.rng.uniform(0.9, 1.8))
        return True

    def office_visit(self, room: Room):
        if not self._enter(room):
            return
        n_cells = int(self.rng.integers(*self.wp.office_cells))
        for i in range(n_cells):
            if not self._walk_to(self._hop_cell(room), col_first=bool(self.rng.integers(2))):
                return
            self.builder.dwell(self.rng.uniform(*self.wp.office_pause_s), fidget=self.rng.random() < 0.45)
        # the long desk stop happens deep in the room: its dwell time
        # interpolates into the next block on exit and must not leak
        # through the door
        if not self._hops_toward(room, self._deep_cell(room)):
            return
        self.builder.dwell(self.rng.uniform(*self.wp.office_desk_s), fidget=self.rng.random() < 0.6)

    def elevator_visit(self, room: Room):
        if not self._enter(room):
            return
        if not self._walk_to(self._random_cell(room), col_first=bool(self.rng.integers(2))):
            return
        self.builder.dwell(
            self.rng.uniform(*self.wp.elevator_dwell_s), fidget=False, face=self.builder.facing + 180.0
        )
        # shuffle one cell over before leaving so the dwell's interpolation
        # tail stays inside the car, then step out
        spot = self.cell
        while spot == self.cell:
            spot = self._random_cell(room)
        if not self._walk_to(spot, col_first=bool(self.rng.integers(2))):
            return
        self.builder.dwell(self.rng.uniform(0.5, 1.0))

    def stairs_visit(self, room: Room):
        """Up-and-down flights: frequent direction flips and tall strides."""
        if not self._enter(room):
            return
        far = (
            room.cols[0] if self.cell[0] != room.cols[0] else room.cols[1],
            room.rows[0] if room.door[1] != room.rows[0] else room.rows[1],
        )
        spots = [far, room.door]
        for i in range(int(self.rng.integers(2, 5))):
            if not self._walk_to(spots[i % 2], col_first=bool(self.rng.integers(2)), stair=True):
                return
            self.builder.dwell(self.rng.uniform(0.7, 1.4))

    def corridor_stroll(self):
        if not self._to_corridor():
            return
        target_col = int(self.rng.integers(self.world.corridor_cols[0], self.world.corridor_cols[1] + 1))
        self._walk_to((target_col, self.world.walk_row), col_first=True)

    def run(self) -> list[_Stride | _Dwell]:
        wp = self.wp
        offices = [r for r in self.world.rooms if r.kind is AreaClass.OFFICE]
        elevator = next(r for r in self.world.rooms if r.kind is AreaClass.ELEVATOR)
        stairs = next(r for r in self.world.rooms if r.kind is AreaClass.STAIRS)
        self.builder.dwell(self.rng.uniform(2.2, 3.5), gps=True)
        while self.builder.budget_left():
            roll = self.rng.random()
            if roll < 0.55:
                self.office_visit(offices[int(self.rng.integers(len(offices)))])
            elif roll < 0.55 + wp.elevator_prob / 2:
                self.elevator_visit(elevator)
            elif roll < 0.55 + wp.elevator_prob / 2 + wp.stairs_prob / 2:
                self.stairs_visit(stairs)
            else:
                self.corridor_stroll()
        # just enough stillness for the final stride's quiet phase
        self.builder.dwell(self.rng.uniform(0.9, 1.3))
        return self.builder.segments


# -- sensor synthesis ---------------------------------------------------------


def _lobe(rel_ms: np.ndarray, lobe_ms: float, gap_ms: float, exponent: float) -> np.ndarray:
    """One flattened positive lobe, a short standoff, one negative lobe.

    The standoff keeps the detector's averaging window from mixing the two
    lobes (their steep edges would otherwise cancel at unlucky sample
    phases).  Active span is 2*lobe_ms + gap_ms; zero afterwards.
    """
    out = np.zeros_like(rel_ms, dtype=np.float64)
    neg_start = lobe_ms + gap_ms
    pos = (rel_ms >= 0) & (rel_ms < lobe_ms)
    neg = (rel_ms >= neg_start) & (rel_ms < neg_start + lobe_ms)
    out[pos] = np.clip(np.sin(np.pi * rel_ms[pos] / lobe_ms), 0.0, 1.0) ** exponent
    out[neg] = -(np.clip(np.sin(np.pi * (rel_ms[neg] - neg_start) / lobe_ms), 0.0, 1.0) ** exponent)
    return out


def _random_rotation(rng) -> np.ndarray:
    """Random hand-held device orientation: uniform yaw, moderate tilt.

    A phone carried while walking points any way in the horizontal plane
    but stays roughly upright; a uniform SO(3) rotation would smear
    gravity across all three axes differently per trace, drowning the
    per-axis statistics pooled over traces in orientation diversity
    rather than exercising it.
    """
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    tilt = min(abs(rng.normal(0.0, np.radians(8.0))), np.radians(20.0))
    tilt_dir = rng.uniform(0.0, 2.0 * np.pi)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    # tilt about a horizontal axis (cos d, sin d, 0) by `tilt`
    ux, uy = np.cos(tilt_dir), np.sin(tilt_dir)
    ct, st = np.cos(tilt), np.sin(tilt)
    k = np.array([[0.0, 0.0, uy], [0.0, 0.0, -ux], [-uy, ux, 0.0]])
    rt = np.eye(3) + st * k + (1 - ct) * (k @ k)
    return rt @ rz


def _synthesize(
    segments: list,
    wp: WalkParams,
    rng,
    trace_id: str,
    user_id: str,
    device_id: str,
    world: World | None,
) -> tuple[Trace, GroundTruth]:
    total_ms = sum(seg.duration_ms for seg in segments)
    dt = round(1000.0 / wp.sample_hz)
    dt_mag = round(1000.0 / wp.mag_hz)

    # absolute segment start times and position knots
    starts = []
    t_cursor = 0
    t_knots = [0.0]
    x_knots = []
    y_knots = []
    first = segments[0]
    x_knots.append(first.x0 if isinstance(first, _Stride) else first.x)
    y_knots.append(first.y0 if isinstance(first, _Stride) else first.y)
    path_points = [TrackPoint(0, x_knots[0], y_knots[0], 0, 0.0)]
    step_count = 0
    for seg in segments:
        starts.append(t_cursor)
        t_cursor += seg.duration_ms
        t_knots.append(float(t_cursor))
        if isinstance(seg, _Stride):
            x_knots.append(seg.x1)
            y_knots.append(seg.y1)
            step_count += 1
            path_points.append(TrackPoint(t_cursor, seg.x1, seg.y1, 0, seg.heading_deg))
        else:
            x_knots.append(seg.x)
            y_knots.append(seg.y)

    t_knots_arr = np.asarray(t_knots)
    x_knots_arr = np.asarray(x_knots)
    y_knots_arr = np.asarray(y_knots)

    # world-frame specific force sampled on the accel grid
    n_acc = total_ms // dt + 1
    t_acc = np.arange(n_acc, dtype=np.int64) * dt
    fz = np.zeros(n_acc)
    fwd = np.zeros(n_acc)  # horizontal along facing
    facing_acc = np.zeros(n_acc)
    for seg, t0 in zip(segments, starts):
        k0 = -(-t0 // dt)  # ceil
        k1 = min((t0 + seg.duration_ms - 1) // dt, n_acc - 1)
        if k1 < k0:
            continue
        rel = (np.arange(k0, k1 + 1) * dt - t0).astype(np.float64)
        sl = slice(k0, k1 + 1)
        if isinstance(seg, _Stride):
            w = _lobe(rel, wp.lobe_ms, wp.lobe_gap_ms, wp.lobe_exponent)
            fz[sl] = seg.peak * w
            if seg.stair:
                fwd[sl] = 0.55 * seg.peak * w
            else:
                active = rel < 2 * wp.lobe_ms + wp.lobe_gap_ms
                surge = np.where(active, np.sin(2 * np.pi * rel / (2 * wp.lobe_ms + wp.lobe_gap_ms)), 0.0)
                fwd[sl] = wp.horiz_amp * surge
            facing_acc[sl] = seg.heading_deg
        else:
            facing_acc[sl] = seg.facing_deg
            for off, length, phase in seg.fidget:
                m = (rel >= off) & (rel < off + length)
                if not m.any():
                    continue
                tt = (rel[m] - off) / 1000.0
                envelope = np.sin(np.pi * (rel[m] - off) / length)
                fz[sl][m] = wp.fidget_amp * envelope * np.sin(2 * np.pi * wp.fidget_hz * tt + phase)
                fwd[sl][m] = 0.45 * wp.fidget_amp * envelope * np.sin(
                    2 * np.pi * wp.fidget_hz * tt + phase + 1.1
                )

    rad = np.radians(facing_acc)
    f_world = np.stack([fwd * np.cos(rad), fwd * np.sin(rad), GRAVITY + fz], axis=1)
    rot = _random_rotation(rng)
    a_dev = f_world @ rot.T + rng.normal(0.0, wp.accel_noise_sigma, size=(n_acc, 3))
    a_dev = np.round(a_dev, 6)

    # compass: true facing + AR(1) noise
    n_mag = total_ms // dt_mag + 1
    t_mag = np.arange(n_mag, dtype=np.int64) * dt_mag
    seg_idx = np.searchsorted(np.asarray(starts), t_mag, side="right") - 1
    facing_mag = np.empty(n_mag)
    for i, seg in enumerate(segments):
        m = seg_idx == i
        facing_mag[m] = seg.heading_deg if isinstance(seg, _Stride) else seg.facing_deg
    if wp.heading_noise_sigma > 0:
        rho = math.exp(-dt_mag / wp.heading_noise_tau_ms)
        innov = rng.normal(0.0, 1.0, size=n_mag)
        noise = np.empty(n_mag)
        noise[0] = innov[0]
        c = math.sqrt(1 - rho * rho)
        for i in range(1, n_mag):
            noise[i] = rho * noise[i - 1] + c * innov[i]
        headings = facing_mag + wp.heading_noise_sigma * noise
    else:
        headings = facing_mag.copy()
    headings = np.round(headings % 360.0, 4) % 360.0

    samples: list[SensorSample] = []
    for t, row in zip(t_acc.tolist(), a_dev.tolist()):
        samples.append(SensorSample(t, Accel(row[0], row[1], row[2])))
    for t, h in zip(t_mag.tolist(), headings.tolist()):
        samples.append(SensorSample(t, Mag(h)))

    if world is not None:
        spec = world.spec
        scan_ts = np.arange(0, total_ms + 1, wp.scan_period_ms, dtype=np.int64)
        sx = np.interp(scan_ts, t_knots_arr, x_knots_arr)
        sy = np.interp(scan_ts, t_knots_arr, y_knots_arr)
        in_elevator = np.array(
            [world.class_at(x, y) is AreaClass.ELEVATOR for x, y in zip(sx, sy)]
        )
        ap_xy = np.asarray(world.ap_positions)
        d = np.hypot(sx[:, None] - ap_xy[None, :, 0], sy[:, None] - ap_xy[None, :, 1])
        rssi = (
            spec.p0_dbm
            - 10.0 * spec.path_loss_exponent * np.log10(np.maximum(d, 1.0))
            + rng.normal(0.0, spec.shadow_sigma_db, size=d.shape)
            - np.where(in_elevator[:, None], spec.elevator_extra_loss_db, 0.0)
        )
        rssi = np.clip(np.rint(rssi), -120, 0).astype(np.int64)
        for i, t in enumerate(scan_ts.tolist()):
            aps = tuple(
                ApReading(f"ap-{j:02d}", int(rssi[i, j])) for j in range(len(world.ap_positions))
            )
            samples.append(SensorSample(t, WifiScan(aps)))

        gsm_ts = np.arange(wp.scan_period_ms // 2, total_ms + 1, wp.scan_period_ms, dtype=np.int64)
        gx = np.interp(gsm_ts, t_knots_arr, x_knots_arr)
        gy = np.interp(gsm_ts, t_knots_arr, y_knots_arr)
        g_elev = np.array([world.class_at(x, y) is AreaClass.ELEVATOR for x, y in zip(gx, gy)])
        gd = np.hypot(gx - world.gsm_tower[0], gy - world.gsm_tower[1])
        g_rssi = (
            spec.gsm_p0_dbm
            - 10.0 * spec.gsm_exponent * np.log10(np.maximum(gd, 1.0))
            + rng.normal(0.0, spec.shadow_sigma_db, size=gd.shape)
            - np.where(g_elev, spec.elevator_extra_loss_db, 0.0)
        )
        g_rssi = np.clip(np.rint(g_rssi), -120, 0).astype(np.int64)
        for t, r in zip(gsm_ts.tolist(), g_rssi.tolist()):
            samples.append(SensorSample(t, GsmScan(world.gsm_cell_id, int(r))))

    # GPS fixes during entry dwells only
    for seg, t0 in zip(segments, starts):
        if isinstance(seg, _Dwell) and seg.gps:
            for i, off in enumerate((200, 1000, 1800)):
                if off >= seg.duration_ms:
                    break
                jx = float(np.round(seg.x + rng.normal(0.0, wp.gps_noise_m), 3))
                jy = float(np.round(seg.y + rng.normal(0.0, wp.gps_noise_m), 3))
                acc = float(np.round(rng.uniform(2.0, 5.0), 2))
                samples.append(SensorSample(t0 + off, GpsFix(jx, jy, acc)))

    samples.sort(key=lambda s: s.t)
    trace = Trace(trace_id, user_id, device_id, tuple(samples))

    gt = GroundTruth(
        path=Track(trace_id, tuple(path_points)),
        step_count=step_count,
        t_knots=t_knots_arr,
        x_knots=x_knots_arr,
        y_knots=y_knots_arr,
    )
    if world is not None:
        ax, ay = gt.position_at(t_acc)
        gt.accel_blocks = [block_of(world.grid_spec, x, y) for x, y in zip(ax, ay)]
    return trace, gt


def gen_trace(
    world: World,
    wp: WalkParams | None = None,
    trace_id: str | None = None,
    user_id: str = "user-0",
    device_id: str = "dev-0",
) -> tuple[Trace, GroundTruth]:
    """One seeded random walk through the world, as (sensor trace, truth)."""
    wp = wp or WalkParams()
    rng = np.random.default_rng(np.random.SeedSequence((wp.seed, 211)))
    if wp.n_steps is None and wp.duration_ms is None:
        wp = replace(wp, duration_ms=int(rng.integers(100_000, 150_000)))
    segments = _WorldWalk(world, wp, rng).run()
    trace_id = trace_id or f"sim-{wp.seed}"
    return _synthesize(segments, wp, rng, trace_id, user_id, device_id, world)


def gen_scripted_walk(
    wp: WalkParams,
    legs: list[tuple[float, int]],
    lead_s: float = 2.5,
    trail_s: float = 2.0,
    start_xy: tuple[float, float] = (0.0, 0.0),
    step_length: float = 0.7,
    fidget: bool = False,
    trace_id: str = "scripted",
) -> tuple[Trace, GroundTruth]:
    """Free-field walk along prescribed (heading_deg, n_steps) legs.

    No world, hence no RF scans; GPS fixes mark the start.  Used for the
    dead-reckoning scenarios (straight walks, squares, L-shapes).
    """
    rng = np.random.default_rng(np.random.SeedSequence((wp.seed, 307)))
    builder = _WalkBuilder(wp, rng, start_xy, step_length=step_length)
    builder.dwell(lead_s, fidget=fidget, gps=True)
    for heading, n in legs:
        for _ in range(n):
            if not builder.stride(heading):
                break
    builder.dwell(trail_s, fidget=fidget)
    return _synthesize(builder.segments, wp, rng, trace_id, "user-0", "dev-0", None)


def gen_corpus(world: World, n_traces: int, seed: int, wp: WalkParams | None = None):
    """Independent seeded walks; returns a list of (Trace, GroundTruth)."""
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    base = wp or WalkParams()
    out = []
    root = np.random.SeedSequence((seed, 401))
    child_seeds = root.generate_state(n_traces)
    for i in range(n_traces):
        wpi = replace(base, seed=int(child_seeds[i]))
        out.append(gen_trace(world, wpi, trace_id=f"sim-{seed}-{i:04d}", user_id=f"user-{i % 3}"))
    return out

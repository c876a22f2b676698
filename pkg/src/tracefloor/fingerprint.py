"""Per-block RSSI fingerprint database and signal-space location queries.

The database keeps, per block and per AP (and per GSM cell), the running
sum and count of observed RSSI, attributed via the track's interpolated
position, so it can be built incrementally as traces arrive and merged
across partitions (integer sums, exactly associative).

Queries match a WiFi scan against per-block mean RSSI vectors over the
union of APs, substituting a floor value for APs missing on either side;
the centroid of the k nearest blocks in signal space is the position
estimate and the single nearest block is the block estimate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatabase, EmptyScan, TraceIdMismatch
from .grid import GridSpec, _flat_blocks
from .reckoning import Track, track_positions_at
from .trace import Trace, WifiScan, gsm_samples, wifi_samples


@dataclass
class FingerprintDB:
    spec: GridSpec
    wifi: dict[tuple[int, int], dict[str, list[int]]] = field(default_factory=dict)
    gsm: dict[tuple[int, int], dict[str, list[int]]] = field(default_factory=dict)

    def add_walk(self, trace: Trace, track: Track) -> None:
        """Fold one walk's scans into the database (incremental build)."""
        if track.trace_id != trace.trace_id:
            raise TraceIdMismatch(f"track {track.trace_id!r} vs trace {trace.trace_id!r}")
        scans = wifi_samples(trace)
        if scans:
            xs, ys = track_positions_at(track, np.asarray([t for t, _ in scans], dtype=np.int64))
            flat = _flat_blocks(self.spec, xs, ys)
            for (t, scan), f in zip(scans, flat):
                key = (int(f) % self.spec.width, int(f) // self.spec.width)
                per_block = self.wifi.setdefault(key, {})
                for ap in scan.aps:
                    cell = per_block.setdefault(ap.bssid, [0, 0])
                    cell[0] += ap.rssi
                    cell[1] += 1
        readings = gsm_samples(trace)
        if readings:
            xs, ys = track_positions_at(track, np.asarray([t for t, _ in readings], dtype=np.int64))
            flat = _flat_blocks(self.spec, xs, ys)
            for (t, reading), f in zip(readings, flat):
                key = (int(f) % self.spec.width, int(f) // self.spec.width)
                per_block = self.gsm.setdefault(key, {})
                cell = per_block.setdefault(reading.cell_id, [0, 0])
                cell[0] += reading.rssi
                cell[1] += 1


@dataclass(frozen=True, slots=True)
class LocateParams:
    k: int = 3
    missing_rssi: float = -100.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def build_fingerprint(corpus, spec: GridSpec) -> FingerprintDB:
    """Batch build over (trace, track) pairs; equals any incremental order."""
    db = FingerprintDB(spec)
    for trace, track in corpus:
        db.add_walk(trace, track)
    return db


def merge_fingerprints(a: FingerprintDB, b: FingerprintDB) -> FingerprintDB:
    if a.spec != b.spec:
        raise ValueError("cannot merge databases with different specs")
    out = FingerprintDB(a.spec)
    for src in (a, b):
        for attr in ("wifi", "gsm"):
            for key, per_block in getattr(src, attr).items():
                dst = getattr(out, attr).setdefault(key, {})
                for name, (total, count) in per_block.items():
                    cell = dst.setdefault(name, [0, 0])
                    cell[0] += total
                    cell[1] += count
    return out


def signal_distance(a: dict[str, float], b: dict[str, float], missing: float = -100.0) -> float:
    """Euclidean RSSI distance over the union of APs, missing -> floor value.

    Equivalent to embedding both vectors in the full AP universe with the
    floor substitution, so it is a genuine metric.
    """
    total = 0.0
    for bssid in a.keys() | b.keys():
        d = a.get(bssid, missing) - b.get(bssid, missing)
        total += d * d
    return total**0.5


def locate(
    db: FingerprintDB, scan: WifiScan, p: LocateParams | None = None
) -> tuple[tuple[int, int], tuple[float, float]]:
    """Nearest fingerprint blocks for a scan: (best block, k-NN centroid)."""
    p = p or LocateParams()
    if not db.wifi:
        raise EmptyDatabase("fingerprint database has no blocks")
    if not scan.aps:
        raise EmptyScan("scan has no AP readings")
    query: dict[str, float] = {}
    for ap in scan.aps:
        prev = query.get(ap.bssid)
        if prev is None or ap.rssi > prev:
            query[ap.bssid] = float(ap.rssi)

    ranked = []
    for key in sorted(db.wifi, key=lambda k: (k[1], k[0])):  # row-major tie order
        means = {bssid: total / count for bssid, (total, count) in db.wifi[key].items()}
        ranked.append((signal_distance(query, means, p.missing_rssi), key[1], key[0]))
    ranked.sort()
    top = ranked[: p.k]
    cx = sum(db.spec.centroid(col, row)[0] for _, row, col in top) / len(top)
    cy = sum(db.spec.centroid(col, row)[1] for _, row, col in top) / len(top)
    best = (top[0][2], top[0][1])
    return best, (cx, cy)


# -- serialization -----------------------------------------------------------


def fingerprint_to_json(db: FingerprintDB) -> str:
    def block_docs(table):
        out = []
        for (col, row) in sorted(table, key=lambda k: (k[1], k[0])):
            entries = {
                name: {"sum": total, "count": count}
                for name, (total, count) in sorted(table[(col, row)].items())
            }
            out.append({"col": col, "row": row, "rssi": entries})
        return out

    doc = {
        "spec": {
            "origin": list(db.spec.origin),
            "block_size": db.spec.block_size,
            "width": db.spec.width,
            "height": db.spec.height,
        },
        "wifi": block_docs(db.wifi),
        "gsm": block_docs(db.gsm),
    }
    return json.dumps(doc, indent=2) + "\n"


def fingerprint_from_json(text: str) -> FingerprintDB:
    doc = json.loads(text)
    spec_doc = doc["spec"]
    spec = GridSpec(
        origin=tuple(spec_doc["origin"]),
        block_size=spec_doc["block_size"],
        width=spec_doc["width"],
        height=spec_doc["height"],
    )
    db = FingerprintDB(spec)
    for attr in ("wifi", "gsm"):
        table = getattr(db, attr)
        for entry in doc[attr]:
            key = (entry["col"], entry["row"])
            table[key] = {
                name: [cell["sum"], cell["count"]] for name, cell in entry["rssi"].items()
            }
    return db

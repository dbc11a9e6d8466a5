"""Detector-series ingestion: parse, clean, normalize, and window into snapshots.

Raw input is a plain UTF-8 comma-separated file.  A manifest block declares
the detectors, then one row per measurement:

    #point,<id>,<order_index>,<speed_limit>
    ...
    <id>,<ISO-8601 local timestamp>,<avg_speed>

Missing time slots are simply absent rows.  Cleaning fills interior gaps by
linear interpolation (a single missing slot gets the mean of its two
neighbours), converts speeds to conditions ``min(1, speed / speed_limit)``,
and refuses to extrapolate over leading or trailing gaps.  Windowing slides
over the aligned series and emits one PointSnapshot per eligible point per
step that has full history and a future target.

The module also generates synthetic traffic (seeded, with rush-hour dips
that propagate downstream) so the whole pipeline can be exercised without
real detector data.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .core import (
    NetworkSnapshot,
    NetworkSpec,
    PointId,
    PointSnapshot,
    SnapshotConfig,
    chain_network,
)
from .rng import stream
from .serialization import atomic_write_bytes, read_container, write_container

__all__ = [
    "FormatError",
    "UnknownDetectorError",
    "LeadingGapError",
    "TrailingGapError",
    "MisalignedSeriesError",
    "RawSeries",
    "CleanSeries",
    "Dataset",
    "RushHourDip",
    "SyntheticProfile",
    "SynthJob",
    "parse_raw",
    "read_detector_file",
    "write_raw_file",
    "clean",
    "context_scalars",
    "window",
    "synth",
    "dip_mask",
    "network_snapshots",
    "save_dataset",
    "load_dataset",
    "dataset_to_bytes",
    "dataset_from_bytes",
    "load_profile",
    "DATASET_FORMAT_VERSION",
]

DATASET_MAGIC = b"TRAFFICFLOW-DATASET\n"
DATASET_FORMAT_VERSION = 1

_EPOCH = datetime(1970, 1, 1)


class FormatError(ValueError):
    """Malformed input file; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownDetectorError(ValueError):
    """Data row references a detector absent from the manifest."""

    def __init__(self, line: int, detector: str):
        super().__init__(f"line {line}: unknown detector {detector!r}")
        self.line = line
        self.detector = detector


class LeadingGapError(ValueError):
    """Series starts after the expected span; no extrapolation."""


class TrailingGapError(ValueError):
    """Series ends before the expected span; no extrapolation."""


class MisalignedSeriesError(ValueError):
    """Series do not share one slot grid (or a sample is off-grid)."""


# ---------------------------------------------------------------------------
# series types


@dataclass(frozen=True)
class RawSeries:
    """Sorted (timestamp, average speed) samples of one detector."""

    point: PointId
    samples: tuple[tuple[datetime, float], ...]
    speed_limit: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        stamps = [ts for ts, _ in self.samples]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError(f"{self.point.id}: timestamps must be strictly increasing")
        if self.speed_limit <= 0:
            raise ValueError("speed limit must be positive")


@dataclass(frozen=True)
class CleanSeries:
    """Dense conditions of one detector at exact step spacing, no gaps."""

    point: PointId
    values: np.ndarray
    start: datetime
    step_minutes: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-D array")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("conditions must lie in [0, 1]")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def timestamp_at(self, index: int) -> datetime:
        return self.start + timedelta(minutes=self.step_minutes * index)

    @property
    def end(self) -> datetime:
        return self.timestamp_at(len(self) - 1)

    def as_raw(self) -> RawSeries:
        """Reinterpret conditions as raw speeds against a unit speed limit."""
        samples = tuple((self.timestamp_at(i), float(v)) for i, v in enumerate(self.values))
        return RawSeries(point=self.point, samples=samples, speed_limit=1.0)


# ---------------------------------------------------------------------------
# raw file parsing


def _parse_stream(handle: TextIO) -> tuple[list[tuple[str, int, float]], list[RawSeries]]:
    manifest: dict[str, tuple[int, float]] = {}
    orders_seen: set[int] = set()
    rows: dict[str, list[tuple[datetime, float, int]]] = {}

    for line_no, raw_line in enumerate(handle, start=1):
        line = raw_line.strip()
        if not line:
            continue
        if line.startswith("#point,"):
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(line_no, f"manifest line needs 4 fields, got {len(parts)}")
            _, det_id, order_text, limit_text = parts
            try:
                order = int(order_text)
                limit = float(limit_text)
            except ValueError:
                raise FormatError(line_no, "manifest order/limit not numeric") from None
            if limit <= 0:
                raise FormatError(line_no, f"speed limit must be positive, got {limit}")
            if det_id in manifest:
                raise FormatError(line_no, f"duplicate detector {det_id!r} in manifest")
            if order in orders_seen:
                raise FormatError(line_no, f"duplicate order_index {order} in manifest")
            manifest[det_id] = (order, limit)
            orders_seen.add(order)
            continue
        if line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(line_no, f"data row needs 3 fields, got {len(parts)}")
        det_id, ts_text, speed_text = parts
        if det_id not in manifest:
            raise UnknownDetectorError(line_no, det_id)
        try:
            ts = datetime.fromisoformat(ts_text)
        except ValueError:
            raise FormatError(line_no, f"bad timestamp {ts_text!r}") from None
        if ts.tzinfo is not None:
            raise FormatError(line_no, "timestamps must be timezone-naive local time")
        try:
            speed = float(speed_text)
        except ValueError:
            raise FormatError(line_no, f"bad speed {speed_text!r}") from None
        if not np.isfinite(speed) or speed < 0:
            raise FormatError(line_no, f"speed must be finite and >= 0, got {speed}")
        rows.setdefault(det_id, []).append((ts, speed, line_no))

    entries = sorted(
        ((det_id, order, limit) for det_id, (order, limit) in manifest.items()),
        key=lambda e: e[1],
    )
    series: list[RawSeries] = []
    for det_id, order, limit in entries:
        det_rows = rows.get(det_id)
        if not det_rows:
            continue
        det_rows.sort(key=lambda r: r[0])
        for (ts_a, _, _), (ts_b, _, line_b) in zip(det_rows, det_rows[1:]):
            if ts_b == ts_a:
                raise FormatError(line_b, f"duplicate timestamp {ts_b} for {det_id!r}")
        series.append(
            RawSeries(
                point=PointId(det_id, order),
                samples=tuple((ts, speed) for ts, speed, _ in det_rows),
                speed_limit=limit,
            )
        )
    return entries, series


def parse_raw(source: str | Path | TextIO) -> list[RawSeries]:
    """Parse a detector-speed file into one sorted RawSeries per detector.

    Detectors declared in the manifest but carrying no data rows yield no
    series.  Raises FormatError / UnknownDetectorError with line numbers.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return _parse_stream(handle)[1]
    return _parse_stream(source)[1]


def read_detector_file(
    source: str | Path | TextIO, n_in: int = 4, m_out: int = 4
) -> tuple[NetworkSpec, list[RawSeries]]:
    """Parse a detector file and build the NetworkSpec from its manifest."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            entries, series = _parse_stream(handle)
    else:
        entries, series = _parse_stream(source)
    if not entries:
        raise FormatError(0, "file declares no detectors")
    points = tuple(PointId(det_id, order) for det_id, order, _ in entries)
    limits = tuple(limit for _, _, limit in entries)
    return NetworkSpec(points=points, speed_limits=limits, n_in=n_in, m_out=m_out), series


def write_raw_file(path: str | Path, series: Sequence[RawSeries]) -> None:
    """Emit the documented raw-file format (manifest block, then data rows)."""
    buf = io.StringIO()
    for s in sorted(series, key=lambda s: s.point.order_index):
        buf.write(f"#point,{s.point.id},{s.point.order_index},{s.speed_limit!r}\n")
    for s in sorted(series, key=lambda s: s.point.order_index):
        for ts, speed in s.samples:
            buf.write(f"{s.point.id},{ts.isoformat()},{speed!r}\n")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# cleaning and context


def clean(
    series: RawSeries,
    cfg: SnapshotConfig,
    span: tuple[datetime, datetime] | None = None,
) -> CleanSeries:
    """Densify one raw series onto the step grid and normalize to conditions.

    Interior gaps are filled by linear interpolation between the bounding
    present values (a single missing slot gets their mean).  ``span`` pins
    the expected first/last slot; a series starting late or ending early
    raises LeadingGapError / TrailingGapError rather than extrapolating.
    """
    if not series.samples:
        raise ValueError("cannot clean an empty series")
    step = timedelta(minutes=cfg.step_minutes)
    first_ts = series.samples[0][0]
    last_ts = series.samples[-1][0]
    start, end = span if span is not None else (first_ts, last_ts)
    if first_ts > start:
        raise LeadingGapError(f"{series.point.id}: first sample {first_ts} after span start {start}")
    if last_ts < end:
        raise TrailingGapError(f"{series.point.id}: last sample {last_ts} before span end {end}")
    if first_ts < start or last_ts > end:
        raise ValueError(f"{series.point.id}: samples outside the requested span")

    span_span = end - start
    n_steps, rem = divmod(span_span, step)
    if rem:
        raise MisalignedSeriesError(f"span {start}..{end} not a multiple of {cfg.step_minutes} min")
    n_slots = int(n_steps) + 1

    values = np.full(n_slots, np.nan)
    for ts, speed in series.samples:
        offset, rem = divmod(ts - start, step)
        if rem:
            raise MisalignedSeriesError(f"{series.point.id}: sample at {ts} off the slot grid")
        values[int(offset)] = min(1.0, speed / series.speed_limit)

    missing = np.isnan(values)
    if missing.any():
        idx = 0
        while idx < n_slots:
            if not missing[idx]:
                idx += 1
                continue
            left = idx - 1
            right = idx
            while missing[right]:
                right += 1
            width = right - left
            for j in range(idx, right):
                w = (j - left) / width
                values[j] = values[left] * (1.0 - w) + values[right] * w
            idx = right

    return CleanSeries(point=series.point, values=values, start=start, step_minutes=cfg.step_minutes)


def context_scalars(timestamp: datetime) -> tuple[float, float]:
    """Day and time-of-day context in [0, 1].

    Days index Sunday=0 .. Saturday=6 and divide by 6; time is the
    30-minute bucket index (0..47) divided by 47.
    """
    day_index = (timestamp.weekday() + 1) % 7
    bucket = (timestamp.hour * 60 + timestamp.minute) // 30
    return day_index / 6.0, bucket / 47.0


# ---------------------------------------------------------------------------
# dataset


@dataclass
class Dataset:
    """Windowed snapshots plus the network and config that produced them.

    ``series`` optionally keeps the aligned source conditions so a dataset
    file can be replayed tick-by-tick (the decentralized simulation needs
    the per-point series, including boundary publishers).
    """

    snapshots: list[PointSnapshot]
    config: SnapshotConfig
    spec: NetworkSpec
    series: tuple[CleanSeries, ...] | None = None
    _cache: dict | None = field(default=None, repr=False, compare=False)

    @property
    def z(self) -> int:
        return len(self.snapshots)

    def arrays(self) -> dict[str, np.ndarray]:
        """Stacked snapshot fields, cached: matrix (Z,R,C), day/time/target (Z,),
        point_order (Z,) and timestamp epoch seconds (Z,)."""
        if self._cache is None:
            if self.snapshots:
                matrix = np.stack([s.matrix for s in self.snapshots])
                day = np.array([s.day_value for s in self.snapshots])
                time_v = np.array([s.time_value for s in self.snapshots])
                target = np.array([s.target for s in self.snapshots])
                order = np.array([s.point.order_index for s in self.snapshots], dtype=np.int64)
                stamps = np.array([_to_epoch(s.timestamp) for s in self.snapshots], dtype=np.int64)
            else:
                matrix = np.zeros((0, self.config.rows, self.config.cols))
                day = np.zeros(0)
                time_v = np.zeros(0)
                target = np.zeros(0)
                order = np.zeros(0, dtype=np.int64)
                stamps = np.zeros(0, dtype=np.int64)
            self._cache = {
                "matrix": matrix,
                "day": day,
                "time": time_v,
                "target": target,
                "point_order": order,
                "timestamp": stamps,
            }
        return self._cache

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """New dataset over a snapshot subset (source series are dropped)."""
        return Dataset(
            snapshots=[self.snapshots[i] for i in indices],
            config=self.config,
            spec=self.spec,
            series=None,
        )


def window(clean_series: Sequence[CleanSeries], spec: NetworkSpec, cfg: SnapshotConfig) -> Dataset:
    """Slide over aligned series and emit every snapshot with a known target.

    Cell (r, j) of a snapshot at time t holds the condition of neighbour row
    r at time ``t - delta + j``; the target is the centre point's condition
    at ``t + horizon_steps``.
    """
    by_order = {s.point.order_index: s for s in clean_series}
    if len(by_order) != len(clean_series):
        raise MisalignedSeriesError("duplicate series for one point")
    wanted = {p.order_index for p in spec.points}
    if set(by_order) != wanted:
        missing = sorted(wanted - set(by_order))
        extra = sorted(set(by_order) - wanted)
        raise MisalignedSeriesError(f"series/network mismatch (missing {missing}, extra {extra})")

    ordered = [by_order[p.order_index] for p in spec.points]
    first = ordered[0]
    for s in ordered:
        if s.start != first.start or len(s) != len(first) or s.step_minutes != cfg.step_minutes:
            raise MisalignedSeriesError(f"{s.point.id}: series grid differs")

    values = np.stack([s.values for s in ordered])  # (P, T)
    n_slots = values.shape[1]
    snapshots: list[PointSnapshot] = []
    step = timedelta(minutes=cfg.step_minutes)
    for k, point in enumerate(spec.points):
        if k - cfg.n_in < 0 or k + cfg.m_out > len(spec.points) - 1:
            continue
        block = values[k - cfg.n_in : k + cfg.m_out + 1]
        for t in range(cfg.delta, n_slots - cfg.horizon_steps):
            ts = first.start + step * t
            day_value, time_value = context_scalars(ts)
            snapshots.append(
                PointSnapshot(
                    matrix=block[:, t - cfg.delta : t + 1].copy(),
                    day_value=day_value,
                    time_value=time_value,
                    target=float(values[k, t + cfg.horizon_steps]),
                    point=point,
                    timestamp=ts,
                )
            )
    return Dataset(snapshots=snapshots, config=cfg, spec=spec, series=tuple(ordered))


def network_snapshots(dataset: Dataset) -> list[NetworkSnapshot]:
    """Group a dataset's snapshots into per-timestamp network snapshots."""
    groups: dict[datetime, list[PointSnapshot]] = {}
    for snap in dataset.snapshots:
        groups.setdefault(snap.timestamp, []).append(snap)
    return [NetworkSnapshot(tuple(groups[ts])) for ts in sorted(groups)]


# ---------------------------------------------------------------------------
# synthetic traffic


@dataclass(frozen=True)
class RushHourDip:
    """One recurring congestion event: full depth on [start_slot, end_slot]
    with optional linear ramps of ``ramp_slots`` on both sides, active on the
    given weekdays (Sunday=0)."""

    start_slot: int
    end_slot: int
    depth: float
    days: tuple[int, ...] = (1, 2, 3, 4, 5)
    ramp_slots: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "days", tuple(self.days))
        if self.end_slot < self.start_slot:
            raise ValueError("end_slot must be >= start_slot")
        if not 0.0 < self.depth <= 1.0:
            raise ValueError("dip depth must be in (0, 1]")
        if self.ramp_slots < 0:
            raise ValueError("ramp_slots must be >= 0")
        if any(d not in range(7) for d in self.days):
            raise ValueError("weekday mask entries must be 0..6")


@dataclass(frozen=True)
class SyntheticProfile:
    """Shape of generated traffic: free-flow base level, recurring dips that
    shift downstream by ``propagation_lag_steps`` per hop, and Gaussian noise."""

    base_speed_ratio: float = 0.95
    dips: tuple[RushHourDip, ...] = ()
    noise_std: float = 0.0
    propagation_lag_steps: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dips", tuple(self.dips))
        if not 0.0 <= self.base_speed_ratio <= 1.0:
            raise ValueError("base_speed_ratio must be in [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.propagation_lag_steps < 0:
            raise ValueError("propagation_lag_steps must be >= 0")


def _slots_per_day(cfg: SnapshotConfig) -> int:
    per_day, rem = divmod(24 * 60, cfg.step_minutes)
    if rem:
        raise ValueError("step_minutes must divide a day evenly for synthesis")
    return per_day


def _dip_depths(
    profile: SyntheticProfile,
    spec: NetworkSpec,
    days: int,
    cfg: SnapshotConfig,
    start: datetime,
) -> np.ndarray:
    """Per-point, per-slot dip depth (overlapping dips take the max)."""
    per_day = _slots_per_day(cfg)
    n_slots = days * per_day
    depths = np.zeros((len(spec.points), n_slots))
    weekday_values = [((start + timedelta(days=d)).weekday() + 1) % 7 for d in range(days)]
    for k in range(len(spec.points)):
        shift = profile.propagation_lag_steps * k
        for dip in profile.dips:
            profile_slots: list[tuple[int, float]] = []
            for j in range(dip.ramp_slots):
                frac = (j + 1) / (dip.ramp_slots + 1)
                profile_slots.append((dip.start_slot - dip.ramp_slots + j, dip.depth * frac))
            for s in range(dip.start_slot, dip.end_slot + 1):
                profile_slots.append((s, dip.depth))
            for j in range(dip.ramp_slots):
                frac = (dip.ramp_slots - j) / (dip.ramp_slots + 1)
                profile_slots.append((dip.end_slot + 1 + j, dip.depth * frac))
            for d in range(days):
                if weekday_values[d] not in dip.days:
                    continue
                base_slot = d * per_day + shift
                for rel, depth in profile_slots:
                    abs_slot = base_slot + rel
                    if 0 <= abs_slot < n_slots:
                        depths[k, abs_slot] = max(depths[k, abs_slot], depth)
    return depths


def synth(
    profile: SyntheticProfile,
    spec: NetworkSpec,
    days: int,
    seed: int,
    cfg: SnapshotConfig | None = None,
    start: datetime = datetime(2024, 1, 1),
) -> list[CleanSeries]:
    """Generate aligned clean series for every network point.

    Deterministic for a fixed seed; dips appear at downstream points delayed
    by ``propagation_lag_steps`` per hop, so neighbour history genuinely
    predicts the centre point's future.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    cfg = cfg or SnapshotConfig()
    depths = _dip_depths(profile, spec, days, cfg, start)
    values = profile.base_speed_ratio - depths
    if profile.noise_std > 0:
        rng = stream(seed, "synth")
        values = values + rng.normal(0.0, profile.noise_std, size=values.shape)
    values = np.clip(values, 0.0, 1.0)
    return [
        CleanSeries(point=p, values=values[k], start=start, step_minutes=cfg.step_minutes)
        for k, p in enumerate(spec.points)
    ]


def dip_mask(
    profile: SyntheticProfile,
    spec: NetworkSpec,
    days: int,
    cfg: SnapshotConfig,
    start: datetime = datetime(2024, 1, 1),
) -> np.ndarray:
    """Boolean (P, T) mask of slots touched by any dip (ramps included)."""
    return _dip_depths(profile, spec, days, cfg, start) > 0.0


# ---------------------------------------------------------------------------
# dataset file format


def _to_epoch(ts: datetime) -> int:
    return int((ts - _EPOCH).total_seconds())


def _from_epoch(seconds: int) -> datetime:
    return _EPOCH + timedelta(seconds=int(seconds))


def dataset_to_bytes(dataset: Dataset) -> bytes:
    cfg = dataset.config
    arrays = dataset.arrays()
    header = {
        "kind": "dataset",
        "config": {
            "delta": cfg.delta,
            "n_in": cfg.n_in,
            "m_out": cfg.m_out,
            "step_minutes": cfg.step_minutes,
            "horizon_steps": cfg.horizon_steps,
        },
        "network": {
            "points": [
                [p.id, p.order_index, limit]
                for p, limit in zip(dataset.spec.points, dataset.spec.speed_limits)
            ],
            "n_in": dataset.spec.n_in,
            "m_out": dataset.spec.m_out,
        },
        "count": dataset.z,
        "has_series": dataset.series is not None,
        "series_start": dataset.series[0].start.isoformat() if dataset.series else None,
    }
    payload = [
        ("matrix", arrays["matrix"]),
        ("day", arrays["day"]),
        ("time", arrays["time"]),
        ("target", arrays["target"]),
        ("point_order", arrays["point_order"]),
        ("timestamp", arrays["timestamp"]),
    ]
    if dataset.series is not None:
        payload.append(("series_values", np.stack([s.values for s in dataset.series])))
    return write_container(DATASET_MAGIC, DATASET_FORMAT_VERSION, header, payload)


def dataset_from_bytes(data: bytes) -> Dataset:
    header, arrays = read_container(data, DATASET_MAGIC, DATASET_FORMAT_VERSION)
    cfg = SnapshotConfig(**header["config"])
    net = header["network"]
    points = tuple(PointId(pid, order) for pid, order, _ in net["points"])
    limits = tuple(limit for _, _, limit in net["points"])
    spec = NetworkSpec(points=points, speed_limits=limits, n_in=net["n_in"], m_out=net["m_out"])
    by_order = {p.order_index: p for p in spec.points}

    snapshots: list[PointSnapshot] = []
    for i in range(header["count"]):
        snapshots.append(
            PointSnapshot(
                matrix=arrays["matrix"][i],
                day_value=float(arrays["day"][i]),
                time_value=float(arrays["time"][i]),
                target=float(arrays["target"][i]),
                point=by_order[int(arrays["point_order"][i])],
                timestamp=_from_epoch(arrays["timestamp"][i]),
            )
        )
    series = None
    if header["has_series"]:
        start = datetime.fromisoformat(header["series_start"])
        series = tuple(
            CleanSeries(point=p, values=arrays["series_values"][k], start=start, step_minutes=cfg.step_minutes)
            for k, p in enumerate(spec.points)
        )
    return Dataset(snapshots=snapshots, config=cfg, spec=spec, series=series)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    atomic_write_bytes(path, dataset_to_bytes(dataset))


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# profile files


@dataclass(frozen=True)
class SynthJob:
    """Everything a synthesis run needs, as loaded from a profile file."""

    profile: SyntheticProfile
    spec: NetworkSpec
    cfg: SnapshotConfig
    days: int
    start: datetime


def load_profile(path: str | Path) -> SynthJob:
    """Read a JSON synthesis profile.

    Schema: ``snapshot`` (SnapshotConfig fields), ``network`` (either
    ``{"points": N, "speed_limit": v}`` or an explicit point list), ``days``,
    ``start`` (ISO timestamp), and the SyntheticProfile fields
    (``base_speed_ratio``, ``noise_std``, ``propagation_lag_steps``,
    ``dips``).
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = SnapshotConfig(**doc.get("snapshot", {}))
    net = doc["network"]
    if "points" in net and isinstance(net["points"], int):
        spec = chain_network(
            net["points"], net.get("speed_limit", 65.0), n_in=cfg.n_in, m_out=cfg.m_out
        )
    else:
        points = tuple(PointId(p["id"], p["order_index"]) for p in net["points"])
        limits = tuple(p["speed_limit"] for p in net["points"])
        spec = NetworkSpec(points=points, speed_limits=limits, n_in=cfg.n_in, m_out=cfg.m_out)
    dips = tuple(
        RushHourDip(
            start_slot=d["start_slot"],
            end_slot=d["end_slot"],
            depth=d["depth"],
            days=tuple(d.get("days", (1, 2, 3, 4, 5))),
            ramp_slots=d.get("ramp_slots", 0),
        )
        for d in doc.get("dips", ())
    )
    profile = SyntheticProfile(
        base_speed_ratio=doc.get("base_speed_ratio", 0.95),
        dips=dips,
        noise_std=doc.get("noise_std", 0.0),
        propagation_lag_steps=doc.get("propagation_lag_steps", 0),
    )
    return SynthJob(
        profile=profile,
        spec=spec,
        cfg=cfg,
        days=int(doc["days"]),
        start=datetime.fromisoformat(doc.get("start", "2024-01-01T00:00:00")),
    )

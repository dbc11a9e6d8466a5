"""Value types for the detector network and its spatio-temporal snapshots.

A road is modelled as an ordered chain of detector locations ("network
points").  The traffic condition at a point is the ratio of measured
average speed to the speed limit, clamped to [0, 1]; low values mean heavy
congestion.  A point snapshot stacks the recent conditions of a point and
its upstream/downstream neighbours into a small matrix that forms one model
input, together with day-of-week and time-of-day context scalars.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

__all__ = [
    "BoundaryPointError",
    "PointId",
    "NetworkSpec",
    "SnapshotConfig",
    "PointSnapshot",
    "NetworkSnapshot",
    "check_condition",
    "chain_network",
    "neighbor_rows",
    "eligible_points",
]


class BoundaryPointError(ValueError):
    """A point lacks enough upstream or downstream neighbours for a snapshot."""


def check_condition(value: float) -> float:
    """Validate a single traffic condition (speed ratio in [0, 1])."""
    value = float(value)
    if not 0.0 <= value <= 1.0 or not np.isfinite(value):
        raise ValueError(f"traffic condition {value!r} outside [0, 1]")
    return value


@dataclass(frozen=True, order=True)
class PointId:
    """One detector location: an opaque id plus its position along the road."""

    id: str
    order_index: int


@dataclass(frozen=True)
class SnapshotConfig:
    """Geometry of point snapshots.

    ``delta`` past steps give ``delta + 1`` matrix columns; ``n_in`` upstream
    and ``m_out`` downstream neighbours give ``n_in + m_out + 1`` rows.
    ``horizon_steps`` is the prediction offset of the target.
    """

    delta: int = 4
    n_in: int = 4
    m_out: int = 4
    step_minutes: int = 5
    horizon_steps: int = 1

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.n_in < 0 or self.m_out < 0:
            raise ValueError("neighbour counts must be >= 0")
        if self.step_minutes <= 0:
            raise ValueError("step_minutes must be > 0")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")

    @property
    def rows(self) -> int:
        return self.n_in + self.m_out + 1

    @property
    def cols(self) -> int:
        return self.delta + 1


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered detector chain with per-point speed limits.

    ``points`` must be sorted by strictly increasing ``order_index``; traffic
    flows from lower to higher index, so the upstream (in-flow) neighbours of
    the point at position k are positions k-1 .. k-n (closest first) and the
    downstream (out-flow) neighbours are k+1 .. k+m.
    """

    points: tuple[PointId, ...]
    speed_limits: tuple[float, ...]
    n_in: int = 4
    m_out: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "speed_limits", tuple(float(v) for v in self.speed_limits))
        if len(self.points) != len(self.speed_limits):
            raise ValueError("points and speed_limits must have equal length")
        order = [p.order_index for p in self.points]
        if any(b <= a for a, b in zip(order, order[1:])):
            raise ValueError("points must be sorted by strictly increasing order_index")
        if any(limit <= 0 for limit in self.speed_limits):
            raise ValueError("speed limits must be strictly positive")

    def __len__(self) -> int:
        return len(self.points)

    def position_of(self, point: PointId) -> int:
        """Position of ``point`` in the ordered chain."""
        for k, candidate in enumerate(self.points):
            if candidate.order_index == point.order_index:
                if candidate.id != point.id:
                    raise KeyError(f"point id mismatch at order {point.order_index}")
                return k
        raise KeyError(f"unknown point {point}")

    def speed_limit_of(self, point: PointId) -> float:
        return self.speed_limits[self.position_of(point)]


def chain_network(
    n_points: int,
    speed_limit: float | Sequence[float] = 65.0,
    n_in: int = 4,
    m_out: int = 4,
    id_prefix: str = "d",
) -> NetworkSpec:
    """Build a simple chain network of ``n_points`` consecutive detectors."""
    points = tuple(PointId(f"{id_prefix}{k:03d}", k) for k in range(n_points))
    if isinstance(speed_limit, (int, float)):
        limits = (float(speed_limit),) * n_points
    else:
        limits = tuple(float(v) for v in speed_limit)
    return NetworkSpec(points=points, speed_limits=limits, n_in=n_in, m_out=m_out)


def neighbor_rows(spec: NetworkSpec, point: PointId, cfg: SnapshotConfig) -> list[PointId]:
    """Row order of a snapshot for ``point``: upstream (farthest first), the
    point itself, then downstream (closest first).

    Raises BoundaryPointError when the point has fewer than ``cfg.n_in``
    predecessors or ``cfg.m_out`` successors.
    """
    k = spec.position_of(point)
    if k - cfg.n_in < 0:
        raise BoundaryPointError(
            f"{point.id}: needs {cfg.n_in} upstream neighbours, has {k}"
        )
    if k + cfg.m_out > len(spec.points) - 1:
        raise BoundaryPointError(
            f"{point.id}: needs {cfg.m_out} downstream neighbours, has {len(spec.points) - 1 - k}"
        )
    return list(spec.points[k - cfg.n_in : k + cfg.m_out + 1])


def eligible_points(spec: NetworkSpec, cfg: SnapshotConfig) -> list[PointId]:
    """Points with full neighbourhoods, i.e. those snapshots can be built for."""
    lo, hi = cfg.n_in, len(spec.points) - cfg.m_out
    return list(spec.points[lo:hi]) if hi > lo else []


def _on_grid(value: float, denominator: int) -> bool:
    scaled = value * denominator
    return 0.0 <= value <= 1.0 and abs(scaled - round(scaled)) < 1e-9


@dataclass(frozen=True)
class PointSnapshot:
    """One supervised example: the condition matrix around a point plus context.

    ``matrix`` has rows ``[L_n .. L_1, S, R_1 .. R_m]`` and columns for times
    ``t - delta .. t`` (oldest first); ``target`` is the centre point's
    condition at ``t + horizon``; ``timestamp`` is the absolute time of the
    last column.
    """

    matrix: np.ndarray
    day_value: float
    time_value: float
    target: float
    point: PointId
    timestamp: datetime

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("snapshot matrix must be 2-D")
        if not np.all(np.isfinite(matrix)) or matrix.min() < 0.0 or matrix.max() > 1.0:
            raise ValueError("snapshot matrix values must lie in [0, 1]")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        if not _on_grid(self.day_value, 6):
            raise ValueError(f"day_value {self.day_value!r} not on the k/6 grid")
        if not _on_grid(self.time_value, 47):
            raise ValueError(f"time_value {self.time_value!r} not on the k/47 grid")
        check_condition(self.target)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class NetworkSnapshot:
    """All point snapshots of a network sharing a single timestamp."""

    snapshots: tuple[PointSnapshot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise ValueError("a network snapshot needs at least one point snapshot")
        first = self.snapshots[0]
        for snap in self.snapshots[1:]:
            if snap.timestamp != first.timestamp:
                raise ValueError("member snapshots must share one timestamp")
            if snap.matrix.shape != first.matrix.shape:
                raise ValueError("member snapshots must share one geometry")

    @property
    def timestamp(self) -> datetime:
        return self.snapshots[0].timestamp

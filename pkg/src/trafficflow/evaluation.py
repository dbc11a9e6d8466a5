"""Evaluation artifacts: daily RMSE tables, box-plot summaries, series extracts.

The evaluation metric is plain RMSE per (point, calendar day), independent
of which loss trained the model.  Quartiles use linear interpolation (the
numpy/"type 7" convention), fixed here and noted in the emitted files.
Reports are plot-ready delimited text; nothing here renders images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date as date_type
from datetime import time as time_type
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import PointId, SnapshotConfig
from .ingestion import Dataset

__all__ = [
    "UnknownPointError",
    "DailyRmseRecord",
    "BoxplotSummary",
    "EvalReport",
    "PersistencePredictor",
    "daily_rmse",
    "boxplot_summary",
    "slot_series",
    "day_curve",
    "mae_contrast",
    "evaluate_models",
    "write_report",
]


class UnknownPointError(KeyError):
    """Requested point does not occur in the dataset."""


@dataclass(frozen=True)
class DailyRmseRecord:
    point: PointId
    date: date_type
    rmse: float
    model: str


@dataclass(frozen=True)
class BoxplotSummary:
    point: PointId
    model: str
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    n_days: int


@dataclass
class EvalReport:
    """Everything the evaluate step emits, before formatting."""

    records: list[DailyRmseRecord]
    summaries: list[BoxplotSummary]
    series: dict[str, list[tuple]] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)


class PersistencePredictor:
    """Trivial baseline: forecast the centre point's current condition."""

    kind = "persistence"

    def __init__(self, cfg: SnapshotConfig):
        self.center_row = cfg.n_in

    def predict(self, matrix: np.ndarray, day_value: float = 0.0, time_value: float = 0.0) -> float:
        return float(np.asarray(matrix)[self.center_row, -1])

    def predict_snapshot(self, snap) -> float:
        return self.predict(snap.matrix)

    def predict_dataset(self, dataset: Dataset, chunk: int = 4096) -> np.ndarray:
        return dataset.arrays()["matrix"][:, self.center_row, -1].copy()


def daily_rmse(predictor, dataset: Dataset, model_name: str | None = None) -> list[DailyRmseRecord]:
    """One RMSE record per (point, calendar day) present in the dataset."""
    name = model_name or getattr(predictor, "kind", "model")
    preds = predictor.predict_dataset(dataset)
    targets = dataset.arrays()["target"]
    sq_err = (preds - targets) ** 2

    by_point = {p.order_index: p for p in dataset.spec.points}
    cells: dict[tuple[int, date_type], list[float]] = {}
    for i, snap in enumerate(dataset.snapshots):
        cells.setdefault((snap.point.order_index, snap.timestamp.date()), []).append(sq_err[i])
    return [
        DailyRmseRecord(
            point=by_point[order],
            date=day,
            # summing in sorted order makes the statistic exactly
            # independent of snapshot order
            rmse=float(np.sqrt(np.mean(np.sort(errors)))),
            model=name,
        )
        for (order, day), errors in sorted(cells.items())
    ]


def boxplot_summary(records: Sequence[DailyRmseRecord]) -> list[BoxplotSummary]:
    """Five-number summary of daily RMSE per (point, model).

    Quartiles use linear interpolation between order statistics.
    """
    groups: dict[tuple[int, str], list[DailyRmseRecord]] = {}
    for rec in records:
        groups.setdefault((rec.point.order_index, rec.model), []).append(rec)
    out = []
    for (order, model), recs in sorted(groups.items()):
        values = np.array([r.rmse for r in recs])
        q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
        out.append(
            BoxplotSummary(
                point=recs[0].point,
                model=model,
                minimum=float(q[0]),
                q1=float(q[1]),
                median=float(q[2]),
                q3=float(q[3]),
                maximum=float(q[4]),
                n_days=len(values),
            )
        )
    return out


def _point_indices(dataset: Dataset, point: PointId) -> list[int]:
    idx = [i for i, s in enumerate(dataset.snapshots) if s.point.order_index == point.order_index]
    if not idx:
        raise UnknownPointError(f"point {point.id!r} has no snapshots in this dataset")
    return idx


def slot_series(
    predictor, dataset: Dataset, point: PointId, slot: time_type
) -> list[tuple[date_type, float, float]]:
    """(date, predicted, actual) at one fixed time of day, chronological."""
    indices = _point_indices(dataset, point)
    preds = predictor.predict_dataset(dataset)
    rows = []
    for i in indices:
        snap = dataset.snapshots[i]
        if snap.timestamp.time() == slot:
            rows.append((snap.timestamp.date(), float(preds[i]), float(snap.target)))
    rows.sort(key=lambda r: r[0])
    return rows


def day_curve(
    predictor, dataset: Dataset, point: PointId, day: date_type
) -> list[tuple[time_type, float, float]]:
    """(time, predicted, actual) across one calendar day for one point."""
    indices = _point_indices(dataset, point)
    preds = predictor.predict_dataset(dataset)
    rows = []
    for i in indices:
        snap = dataset.snapshots[i]
        if snap.timestamp.date() == day:
            rows.append((snap.timestamp.time(), float(preds[i]), float(snap.target)))
    rows.sort(key=lambda r: r[0])
    return rows


def mae_contrast(
    predictor, dataset: Dataset, is_dip: Callable[[int], bool]
) -> tuple[float, float, int, int]:
    """Mean absolute error split into dip vs flat snapshots.

    ``is_dip`` labels each snapshot index; returns (dip_mae, flat_mae,
    n_dip, n_flat) with NaN for an empty group.
    """
    preds = predictor.predict_dataset(dataset)
    targets = dataset.arrays()["target"]
    abs_err = np.abs(preds - targets)
    mask = np.array([bool(is_dip(i)) for i in range(dataset.z)])
    dip = abs_err[mask]
    flat = abs_err[~mask]
    dip_mae = float(np.mean(dip)) if dip.size else float("nan")
    flat_mae = float(np.mean(flat)) if flat.size else float("nan")
    return dip_mae, flat_mae, int(dip.size), int(flat.size)


def _default_point(dataset: Dataset) -> PointId:
    orders = sorted({s.point.order_index for s in dataset.snapshots})
    if not orders:
        raise UnknownPointError("dataset has no snapshots")
    middle = orders[len(orders) // 2]
    return next(p for p in dataset.spec.points if p.order_index == middle)


def evaluate_models(
    predictors: dict[str, object],
    dataset: Dataset,
    slots: Sequence[time_type] = (time_type(7, 30), time_type(12, 0)),
    point: PointId | None = None,
    curve_day: date_type | None = None,
) -> EvalReport:
    """Full evaluation for one or more predictors over one test dataset."""
    point = point or _default_point(dataset)
    all_days = sorted({s.timestamp.date() for s in dataset.snapshots})
    curve_day = curve_day or all_days[0]

    records: list[DailyRmseRecord] = []
    series: dict[str, list[tuple]] = {}
    for name, predictor in predictors.items():
        records.extend(daily_rmse(predictor, dataset, name))
        series[f"day_curve/{name}"] = [
            (t.isoformat(), pred, actual)
            for t, pred, actual in day_curve(predictor, dataset, point, curve_day)
        ]
        for slot in slots:
            series[f"slot_{slot.strftime('%H:%M')}/{name}"] = [
                (d.isoformat(), pred, actual)
                for d, pred, actual in slot_series(predictor, dataset, point, slot)
            ]
    return EvalReport(
        records=records,
        summaries=boxplot_summary(records),
        series=series,
        notes={
            "point": point.id,
            "point_order": point.order_index,
            "curve_date": curve_day.isoformat(),
            "quartile_method": "linear interpolation between order statistics",
        },
    )


def write_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Emit the report as one CSV per figure analogue; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = out_dir / "daily_rmse.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["point_id", "order_index", "date", "model", "rmse"])
        for rec in report.records:
            writer.writerow(
                [rec.point.id, rec.point.order_index, rec.date.isoformat(), rec.model, repr(rec.rmse)]
            )
    written.append(path)

    path = out_dir / "boxplot.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# quartiles: {report.notes.get('quartile_method', 'linear')}\n")
        writer = csv.writer(handle)
        writer.writerow(["point_id", "order_index", "model", "min", "q1", "median", "q3", "max", "n_days"])
        for s in report.summaries:
            writer.writerow(
                [
                    s.point.id,
                    s.point.order_index,
                    s.model,
                    repr(s.minimum),
                    repr(s.q1),
                    repr(s.median),
                    repr(s.q3),
                    repr(s.maximum),
                    s.n_days,
                ]
            )
    written.append(path)

    curve_names = sorted(n for n in report.series if n.startswith("day_curve/"))
    path = out_dir / "day_curve.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["point_id", "date", "time", "model", "predicted", "actual"])
        for name in curve_names:
            model = name.split("/", 1)[1]
            for t, pred, actual in report.series[name]:
                writer.writerow(
                    [
                        report.notes["point"],
                        report.notes["curve_date"],
                        t,
                        model,
                        repr(pred),
                        repr(actual),
                    ]
                )
    written.append(path)

    slot_labels = sorted(
        {n.split("/", 1)[0].removeprefix("slot_") for n in report.series if n.startswith("slot_")}
    )
    for label in slot_labels:
        path = out_dir / f"slot_{label}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["point_id", "date", "model", "predicted", "actual"])
            for name in sorted(report.series):
                if not name.startswith(f"slot_{label}/"):
                    continue
                model = name.split("/", 1)[1]
                for d, pred, actual in report.series[name]:
                    writer.writerow([report.notes["point"], d, model, repr(pred), repr(actual)])
        written.append(path)
    return written

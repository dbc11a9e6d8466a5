"""Dataset splitting, the epoch loop, checkpointing, reproducible runs.

Splits are disjoint by construction and carried through to the report so a
reviewer can verify no test snapshot ever reached a parameter update.  All
randomness (weight init, per-epoch shuffling) flows from the run seed via
named streams; a fixed seed reproduces losses and parameters bit-exactly.
"""

from __future__ import annotations

import tempfile
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import models, nn
from .ingestion import Dataset
from .rng import stream

__all__ = [
    "EmptySplitError",
    "SplitSpec",
    "by_point",
    "by_time",
    "TrainConfig",
    "TrainReport",
    "split",
    "train",
]


class EmptySplitError(ValueError):
    """A requested split leaves the train or test side empty."""


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/test assignment along one axis.

    axis="point": integers mean "first K eligible points" (train) and "the
    next K" (test); sequences are explicit order_index collections.
    axis="time": integers mean "first K calendar days" and "the next K";
    sequences are explicit ISO dates.
    """

    axis: str
    train: int | tuple = 20
    test: int | tuple = 30

    def __post_init__(self) -> None:
        if self.axis not in ("point", "time"):
            raise ValueError(f"unknown split axis {self.axis!r}")
        for name in ("train", "test"):
            value = getattr(self, name)
            if not isinstance(value, int):
                object.__setattr__(self, name, tuple(value))


def by_point(train: int | Sequence[int] = 20, test: int | Sequence[int] = 30) -> SplitSpec:
    return SplitSpec(axis="point", train=train, test=test)


def by_time(train: int | Sequence[str] = 48, test: int | Sequence[str] = 12) -> SplitSpec:
    return SplitSpec(axis="time", train=train, test=test)


@dataclass
class TrainConfig:
    """Knobs of one training run; defaults follow the artifact conventions."""

    model: str = "cnn"
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    seed: int = 0
    split: SplitSpec = field(default_factory=by_point)
    loss: str = "strict"
    context_mode: str = "none"
    checkpoint_dir: str | Path | None = None

    def __post_init__(self) -> None:
        if self.model not in ("cnn", "lstm"):
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.loss not in ("strict", "rmse"):
            raise ValueError(f"unknown loss kind {self.loss!r}")

    def echo(self, split_units: tuple[list, list] | None = None) -> dict:
        doc = {
            "model": self.model,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "loss": self.loss,
            "context_mode": self.context_mode,
            "split_axis": self.split.axis,
            "split_train": list(self.split.train) if not isinstance(self.split.train, int) else self.split.train,
            "split_test": list(self.split.test) if not isinstance(self.split.test, int) else self.split.test,
        }
        if split_units is not None:
            doc["train_units"], doc["test_units"] = split_units
        return doc


@dataclass
class TrainReport:
    """What one run did: losses per epoch, final test RMSE, provenance."""

    epoch_losses: list[float]
    final_test_rmse: float
    wall_time_s: float
    config: dict
    checkpoint_path: str
    train_units: list
    test_units: list
    train_size: int
    test_size: int
    skipped_zero_loss_batches: int = 0

    def to_dict(self, include_wall_time: bool = False) -> dict:
        doc = {
            "epoch_losses": self.epoch_losses,
            "final_test_rmse": self.final_test_rmse,
            "config": self.config,
            "checkpoint_path": self.checkpoint_path,
            "train_units": self.train_units,
            "test_units": self.test_units,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "skipped_zero_loss_batches": self.skipped_zero_loss_batches,
        }
        if include_wall_time:
            doc["wall_time_s"] = self.wall_time_s
        return doc


def _resolve_units(available: list, requested: int | tuple, offset: int, side: str) -> list:
    if isinstance(requested, int):
        if requested < 0:
            raise ValueError(f"{side} count must be >= 0")
        chosen = available[offset : offset + requested]
        if len(chosen) < requested:
            raise EmptySplitError(
                f"{side}: requested {requested} units, only {len(chosen)} available past offset {offset}"
            )
        return chosen
    missing = [u for u in requested if u not in available]
    if missing:
        raise EmptySplitError(f"{side}: units {missing} absent from dataset")
    return list(requested)


def split(dataset: Dataset, cfg: TrainConfig) -> tuple[Dataset, Dataset]:
    """Partition snapshots by centre point or by calendar day, disjointly."""
    spec = cfg.split
    if spec.axis == "point":
        units = [s.point.order_index for s in dataset.snapshots]
        available = sorted(set(units))
    else:
        units = [s.timestamp.date().isoformat() for s in dataset.snapshots]
        available = sorted(set(units))

    train_units = _resolve_units(available, spec.train, 0, "train")
    if isinstance(spec.test, int):
        offset = len(train_units) if isinstance(spec.train, int) else 0
        test_units = _resolve_units(available, spec.test, offset, "test")
    else:
        test_units = _resolve_units(available, spec.test, 0, "test")

    overlap = set(train_units) & set(test_units)
    if overlap:
        raise EmptySplitError(f"train/test overlap on units {sorted(overlap)}")
    if not train_units or not test_units:
        raise EmptySplitError("both split sides must be nonempty")

    train_set = set(train_units)
    test_set = set(test_units)
    train_idx = [i for i, u in enumerate(units) if u in train_set]
    test_idx = [i for i, u in enumerate(units) if u in test_set]
    if not train_idx or not test_idx:
        raise EmptySplitError("a split side matched no snapshots")
    return dataset.subset(train_idx), dataset.subset(test_idx)


def _init_model(cfg: TrainConfig):
    if cfg.model == "cnn":
        return models.CnnPredictor.initialize(cfg.seed, cfg.context_mode)
    return models.LstmPredictor.initialize(cfg.seed)


def train(dataset: Dataset, cfg: TrainConfig) -> tuple[models.ModelParams, TrainReport]:
    """Split, run the epoch loop, checkpoint each epoch, report.

    Deterministic for a fixed seed; zero-loss batches skip their update per
    the loss contract; non-finite gradients abort with epoch/batch context.
    """
    started = _time.perf_counter()
    train_ds, test_ds = split(dataset, cfg)
    if cfg.split.axis == "point":
        train_units = sorted({s.point.order_index for s in train_ds.snapshots})
        test_units = sorted({s.point.order_index for s in test_ds.snapshots})
    else:
        train_units = sorted({s.timestamp.date().isoformat() for s in train_ds.snapshots})
        test_units = sorted({s.timestamp.date().isoformat() for s in test_ds.snapshots})

    model = _init_model(cfg)
    arrays = train_ds.arrays()
    matrices, day, time_v, targets = (
        arrays["matrix"],
        arrays["day"],
        arrays["time"],
        arrays["target"],
    )
    z = train_ds.z

    checkpoint_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else Path(tempfile.mkdtemp(prefix="trafficflow-ckpt-"))
    checkpoint_dir.mkdir(parents=True, exist_ok=True)

    shuffle_rng = stream(cfg.seed, "shuffle")
    epoch_losses: list[float] = []
    skipped = 0
    checkpoint_path = ""
    config_echo = cfg.echo((list(train_units), list(test_units)))

    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(z)
        batch_losses: list[float] = []
        for lo in range(0, z, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            preds, cache = model.forward_batch(matrices[idx], day[idx], time_v[idx])
            batch = nn.LossBatch(preds, targets[idx])
            batch_losses.append(nn.loss_forward(batch, cfg.loss))
            try:
                grad_preds = nn.loss_backward(batch, cfg.loss)
            except nn.ZeroLossError:
                skipped += 1
                continue
            grads = model.backward_batch(grad_preds, cache)
            if cfg.lr > 0:
                try:
                    model.params = nn.sgd_step(model.params, grads, cfg.lr)
                except nn.NonFiniteGradientError as err:
                    raise nn.NonFiniteGradientError(
                        f"{err.name} at epoch {epoch}, batch {lo // cfg.batch_size}"
                    ) from err
        epoch_losses.append(float(np.mean(batch_losses)))
        checkpoint_path = str(checkpoint_dir / f"epoch_{epoch:03d}.tfmodel")
        models.save_file(model.to_params(seed=cfg.seed, config=config_echo), checkpoint_path)

    test_preds = model.predict_dataset(test_ds)
    final_rmse = float(np.sqrt(np.mean((test_preds - test_ds.arrays()["target"]) ** 2)))

    params = model.to_params(seed=cfg.seed, config=config_echo)
    report = TrainReport(
        epoch_losses=epoch_losses,
        final_test_rmse=final_rmse,
        wall_time_s=_time.perf_counter() - started,
        config=config_echo,
        checkpoint_path=checkpoint_path,
        train_units=list(train_units),
        test_units=list(test_units),
        train_size=train_ds.z,
        test_size=test_ds.z,
        skipped_zero_loss_batches=skipped,
    )
    return params, report

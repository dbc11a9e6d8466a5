"""Shared test helpers: finite-difference oracles and small builders."""

from __future__ import annotations

from datetime import datetime

import numpy as np
import pytest
from hypothesis import settings

from trafficflow import core, ingestion

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

START = datetime(2024, 1, 1)  # a Monday


def central_diff(fn, array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``fn()`` w.r.t. ``array`` in place."""
    grad = np.zeros_like(array, dtype=np.float64)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = array[idx]
        array[idx] = old + h
        f_plus = fn()
        array[idx] = old - h
        f_minus = fn()
        array[idx] = old
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise relative error, guarded for tiny magnitudes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)))


def make_clean(point: core.PointId, values, start=START, step_minutes=30) -> ingestion.CleanSeries:
    return ingestion.CleanSeries(point=point, values=np.asarray(values, dtype=float),
                                 start=start, step_minutes=step_minutes)


def make_network_series(values_by_point: np.ndarray, spec: core.NetworkSpec,
                        start=START, step_minutes=30) -> list[ingestion.CleanSeries]:
    return [
        make_clean(p, values_by_point[k], start=start, step_minutes=step_minutes)
        for k, p in enumerate(spec.points)
    ]


@pytest.fixture
def small_spec() -> core.NetworkSpec:
    return core.chain_network(12, 60.0)


@pytest.fixture
def cfg30() -> core.SnapshotConfig:
    return core.SnapshotConfig(step_minutes=30)

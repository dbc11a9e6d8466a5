"""The two trainable predictors and their versioned parameter files.

Both models map one 9x5 point snapshot to the centre point's next-step
condition in (0, 1):

* CnnPredictor: two valid 3x3 convolutions (64 filters each, relu), flatten
  to 320, dense 320->32 (relu), dense 32->1 (sigmoid).  ``context_mode =
  "concat"`` appends the day/time scalars after the flatten (322 -> 32).
* LstmPredictor: the snapshot's five columns (oldest first) feed a stacked
  pair of 20-unit LSTM layers; a dense 20->1 sigmoid head reads the final
  hidden state.

Model files are self-describing: magic string, format version, kind tag and
shape manifest, float64 little-endian payload, sha256 trailer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .core import PointSnapshot
from .ingestion import Dataset
from .nn import ShapeMismatchError
from .rng import stream
from .serialization import (
    ChecksumError,
    ContainerFormatError,
    VersionMismatchError,
    atomic_write_bytes,
    read_container,
    write_container,
)

__all__ = [
    "ManifestMismatchError",
    "VersionMismatchError",
    "ChecksumError",
    "ModelParams",
    "CnnPredictor",
    "LstmPredictor",
    "build_predictor",
    "save",
    "load",
    "save_file",
    "load_file",
    "MODEL_FORMAT_VERSION",
]

MODEL_MAGIC = b"TRAFFICFLOW-MODEL\n"
MODEL_FORMAT_VERSION = 1

SNAP_ROWS = 9
SNAP_COLS = 5
_FILTER = 3
_FILTERS = 64
_HIDDEN_DENSE = 32
_LSTM_HIDDEN = 20


class ManifestMismatchError(ValueError):
    """Stored parameter manifest does not match the requested architecture."""


@dataclass
class ModelParams:
    """Learnable parameters of one predictor plus provenance.

    ``arrays`` preserves manifest order; ``config`` echoes whatever training
    settings produced the parameters (context mode, loss kind, ...).
    """

    kind: str
    arrays: dict[str, np.ndarray]
    version: int = MODEL_FORMAT_VERSION
    seed: int | None = None
    config: dict = field(default_factory=dict)

    @property
    def manifest(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(name, tuple(a.shape)) for name, a in self.arrays.items()]

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))


def _cnn_manifest(context_mode: str) -> list[tuple[str, tuple[int, ...]]]:
    flat = 5 * 1 * _FILTERS + (2 if context_mode == "concat" else 0)
    return [
        ("conv1_w", (_FILTER, _FILTER, 1, _FILTERS)),
        ("conv1_b", (_FILTERS,)),
        ("conv2_w", (_FILTER, _FILTER, _FILTERS, _FILTERS)),
        ("conv2_b", (_FILTERS,)),
        ("fc1_w", (flat, _HIDDEN_DENSE)),
        ("fc1_b", (_HIDDEN_DENSE,)),
        ("fc2_w", (_HIDDEN_DENSE, 1)),
        ("fc2_b", (1,)),
    ]


def _lstm_manifest() -> list[tuple[str, tuple[int, ...]]]:
    h4 = 4 * _LSTM_HIDDEN
    return [
        ("l1_wx", (SNAP_ROWS, h4)),
        ("l1_wh", (_LSTM_HIDDEN, h4)),
        ("l1_b", (h4,)),
        ("l2_wx", (_LSTM_HIDDEN, h4)),
        ("l2_wh", (_LSTM_HIDDEN, h4)),
        ("l2_b", (h4,)),
        ("head_w", (_LSTM_HIDDEN, 1)),
        ("head_b", (1,)),
    ]


def _check_manifest(params: ModelParams, kind: str, expected: list[tuple[str, tuple[int, ...]]]) -> None:
    if params.kind != kind:
        raise ManifestMismatchError(f"parameters are for kind {params.kind!r}, not {kind!r}")
    if params.manifest != expected:
        raise ManifestMismatchError(
            f"manifest {params.manifest} does not match the {kind} architecture"
        )


def _context_arrays(day, time_v, batch: int) -> tuple[np.ndarray, np.ndarray]:
    day = np.zeros(batch) if day is None else np.asarray(day, dtype=np.float64).reshape(batch)
    time_v = np.zeros(batch) if time_v is None else np.asarray(time_v, dtype=np.float64).reshape(batch)
    return day, time_v


class CnnPredictor:
    """Convolutional snapshot predictor (architecture is bound to 9x5 inputs)."""

    kind = "cnn"

    def __init__(self, params: dict[str, np.ndarray], context_mode: str = "none"):
        if context_mode not in ("none", "concat"):
            raise ValueError(f"unknown context_mode {context_mode!r}")
        self.context_mode = context_mode
        expected = dict(_cnn_manifest(context_mode))
        for name, shape in expected.items():
            if name not in params or params[name].shape != shape:
                got = params[name].shape if name in params else "missing"
                raise ManifestMismatchError(f"{name}: expected shape {shape}, got {got}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in expected}
        # structural check of the layer chain: 9x5 -> 7x3x64 -> 5x1x64 -> 320
        c1 = nn.ConvLayerSpec(_FILTER, _FILTERS, 1)
        c2 = nn.ConvLayerSpec(_FILTER, _FILTERS, _FILTERS)
        h1, w1, f1 = c1.output_shape(SNAP_ROWS, SNAP_COLS)
        h2, w2, f2 = c2.output_shape(h1, w1)
        flat = h2 * w2 * f2 + (2 if context_mode == "concat" else 0)
        assert self.params["fc1_w"].shape[0] == flat

    @classmethod
    def initialize(cls, seed: int, context_mode: str = "none") -> "CnnPredictor":
        """Fresh parameters: Glorot-uniform weights, zero biases."""
        rng = stream(seed, "init")
        params: dict[str, np.ndarray] = {}
        for name, shape in _cnn_manifest(context_mode):
            if name.endswith("_b"):
                params[name] = np.zeros(shape)
            elif name.startswith("conv"):
                k, _, c_in, f = shape
                fan = k * k * c_in, k * k * f
                params[name] = nn.glorot_uniform(rng, shape, *fan)
            else:
                params[name] = nn.glorot_uniform(rng, shape, shape[0], shape[1])
        return cls(params, context_mode)

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def shape_chain(self) -> list[tuple[int, ...]]:
        """Data shapes through the network, input to output."""
        chain = [(SNAP_ROWS, SNAP_COLS)]
        c1 = nn.ConvLayerSpec(_FILTER, _FILTERS, 1)
        c2 = nn.ConvLayerSpec(_FILTER, _FILTERS, _FILTERS)
        s1 = c1.output_shape(SNAP_ROWS, SNAP_COLS)
        s2 = c2.output_shape(s1[0], s1[1])
        chain += [s1, s2, (self.params["fc1_w"].shape[0],), (_HIDDEN_DENSE,), (1,)]
        return chain

    def forward_batch(self, matrices: np.ndarray, day=None, time_v=None):
        """Predictions for a (B, 9, 5) stack; returns (preds (B,), cache)."""
        x = np.asarray(matrices, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (SNAP_ROWS, SNAP_COLS):
            raise ShapeMismatchError(f"expected (B, {SNAP_ROWS}, {SNAP_COLS}), got {x.shape}")
        batch = x.shape[0]
        day, time_v = _context_arrays(day, time_v, batch)
        a1, c1 = nn.conv2d_forward(x[..., None], self.params["conv1_w"], self.params["conv1_b"], "relu")
        a2, c2 = nn.conv2d_forward(a1, self.params["conv2_w"], self.params["conv2_b"], "relu")
        flat = a2.reshape(batch, -1)
        if self.context_mode == "concat":
            flat = np.concatenate([flat, day[:, None], time_v[:, None]], axis=1)
        h, c3 = nn.dense_forward(flat, self.params["fc1_w"], self.params["fc1_b"], "relu")
        out, c4 = nn.dense_forward(h, self.params["fc2_w"], self.params["fc2_b"], "sigmoid")
        return out[:, 0], (c1, c2, c3, c4, batch)

    def backward_batch(self, grad_preds: np.ndarray, cache) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(predictions)."""
        c1, c2, c3, c4, batch = cache
        grad_h, gw_fc2, gb_fc2 = nn.dense_backward(np.asarray(grad_preds)[:, None], c4)
        grad_flat, gw_fc1, gb_fc1 = nn.dense_backward(grad_h, c3)
        if self.context_mode == "concat":
            grad_flat = grad_flat[:, :-2]
        grad_a2 = grad_flat.reshape(batch, 5, 1, _FILTERS)
        grad_a1, gw_c2, gb_c2 = nn.conv2d_backward(grad_a2, c2)
        _, gw_c1, gb_c1 = nn.conv2d_backward(grad_a1, c1)
        return {
            "conv1_w": gw_c1,
            "conv1_b": gb_c1,
            "conv2_w": gw_c2,
            "conv2_b": gb_c2,
            "fc1_w": gw_fc1,
            "fc1_b": gb_fc1,
            "fc2_w": gw_fc2,
            "fc2_b": gb_fc2,
        }

    def predict(self, matrix: np.ndarray, day_value: float = 0.0, time_value: float = 0.0) -> float:
        """Single-snapshot prediction (the path decentralized nodes use)."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (SNAP_ROWS, SNAP_COLS):
            raise ShapeMismatchError(f"expected ({SNAP_ROWS}, {SNAP_COLS}) snapshot, got {matrix.shape}")
        preds, _ = self.forward_batch(matrix[None], np.array([day_value]), np.array([time_value]))
        return float(preds[0])

    def predict_snapshot(self, snap: PointSnapshot) -> float:
        return self.predict(snap.matrix, snap.day_value, snap.time_value)

    def predict_dataset(self, dataset: Dataset, chunk: int = 4096) -> np.ndarray:
        """Vectorized predictions for every snapshot, in dataset order."""
        arrays = dataset.arrays()
        out = np.empty(dataset.z)
        for lo in range(0, dataset.z, chunk):
            hi = min(lo + chunk, dataset.z)
            out[lo:hi], _ = self.forward_batch(
                arrays["matrix"][lo:hi], arrays["day"][lo:hi], arrays["time"][lo:hi]
            )
        return out

    def to_params(self, seed: int | None = None, config: dict | None = None) -> ModelParams:
        config = dict(config or {})
        config.setdefault("context_mode", self.context_mode)
        arrays = {name: self.params[name].copy() for name, _ in _cnn_manifest(self.context_mode)}
        return ModelParams(kind=self.kind, arrays=arrays, seed=seed, config=config)

    @classmethod
    def from_params(cls, params: ModelParams) -> "CnnPredictor":
        context_mode = params.config.get("context_mode", "none")
        _check_manifest(params, "cnn", _cnn_manifest(context_mode))
        return cls(params.arrays, context_mode)


class LstmPredictor:
    """Stacked-LSTM snapshot predictor; consumes columns oldest first."""

    kind = "lstm"

    def __init__(self, params: dict[str, np.ndarray]):
        expected = dict(_lstm_manifest())
        for name, shape in expected.items():
            if name not in params or params[name].shape != shape:
                got = params[name].shape if name in params else "missing"
                raise ManifestMismatchError(f"{name}: expected shape {shape}, got {got}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in expected}

    @classmethod
    def initialize(cls, seed: int) -> "LstmPredictor":
        """Glorot weights, zero biases except forget-gate bias at 1."""
        rng = stream(seed, "init")
        params: dict[str, np.ndarray] = {}
        for name, shape in _lstm_manifest():
            if name.endswith("_b"):
                bias = np.zeros(shape)
                if name in ("l1_b", "l2_b"):
                    bias[_LSTM_HIDDEN : 2 * _LSTM_HIDDEN] = 1.0
                params[name] = bias
            else:
                params[name] = nn.glorot_uniform(rng, shape, shape[0], shape[1])
        return cls(params)

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def forward_batch(self, matrices: np.ndarray, day=None, time_v=None):
        """Predictions for a (B, 9, 5) stack; context scalars are unused."""
        x = np.asarray(matrices, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (SNAP_ROWS, SNAP_COLS):
            raise ShapeMismatchError(f"expected (B, {SNAP_ROWS}, {SNAP_COLS}), got {x.shape}")
        xs = x.transpose(0, 2, 1)  # (B, T=5, 9), oldest column first
        hs1, c1 = nn.lstm_forward(xs, self.params["l1_wx"], self.params["l1_wh"], self.params["l1_b"])
        hs2, c2 = nn.lstm_forward(hs1, self.params["l2_wx"], self.params["l2_wh"], self.params["l2_b"])
        out, c3 = nn.dense_forward(hs2[:, -1, :], self.params["head_w"], self.params["head_b"], "sigmoid")
        return out[:, 0], (c1, c2, c3, hs2.shape)

    def backward_batch(self, grad_preds: np.ndarray, cache) -> dict[str, np.ndarray]:
        c1, c2, c3, hs2_shape = cache
        grad_h_last, gw_head, gb_head = nn.dense_backward(np.asarray(grad_preds)[:, None], c3)
        grad_hs2 = np.zeros(hs2_shape)
        grad_hs2[:, -1, :] = grad_h_last
        grad_hs1, gwx2, gwh2, gb2 = nn.lstm_backward(grad_hs2, c2)
        _, gwx1, gwh1, gb1 = nn.lstm_backward(grad_hs1, c1)
        return {
            "l1_wx": gwx1,
            "l1_wh": gwh1,
            "l1_b": gb1,
            "l2_wx": gwx2,
            "l2_wh": gwh2,
            "l2_b": gb2,
            "head_w": gw_head,
            "head_b": gb_head,
        }

    def predict(self, matrix: np.ndarray, day_value: float = 0.0, time_value: float = 0.0) -> float:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (SNAP_ROWS, SNAP_COLS):
            raise ShapeMismatchError(f"expected ({SNAP_ROWS}, {SNAP_COLS}) snapshot, got {matrix.shape}")
        preds, _ = self.forward_batch(matrix[None])
        return float(preds[0])

    def predict_snapshot(self, snap: PointSnapshot) -> float:
        return self.predict(snap.matrix, snap.day_value, snap.time_value)

    def predict_dataset(self, dataset: Dataset, chunk: int = 4096) -> np.ndarray:
        arrays = dataset.arrays()
        out = np.empty(dataset.z)
        for lo in range(0, dataset.z, chunk):
            hi = min(lo + chunk, dataset.z)
            out[lo:hi], _ = self.forward_batch(arrays["matrix"][lo:hi])
        return out

    def to_params(self, seed: int | None = None, config: dict | None = None) -> ModelParams:
        arrays = {name: self.params[name].copy() for name, _ in _lstm_manifest()}
        return ModelParams(kind=self.kind, arrays=arrays, seed=seed, config=dict(config or {}))

    @classmethod
    def from_params(cls, params: ModelParams) -> "LstmPredictor":
        _check_manifest(params, "lstm", _lstm_manifest())
        return cls(params.arrays)


Predictor = CnnPredictor | LstmPredictor


def build_predictor(params: ModelParams) -> Predictor:
    """Reconstruct the right predictor from stored parameters."""
    if params.kind == "cnn":
        return CnnPredictor.from_params(params)
    if params.kind == "lstm":
        return LstmPredictor.from_params(params)
    raise ManifestMismatchError(f"unknown model kind {params.kind!r}")


def save(params: ModelParams) -> bytes:
    """Serialize parameters to the versioned model-file bytes."""
    header = {
        "kind": params.kind,
        "seed": params.seed,
        "config": params.config,
    }
    arrays = [(name, array) for name, array in params.arrays.items()]
    return write_container(MODEL_MAGIC, MODEL_FORMAT_VERSION, header, arrays)


def load(data: bytes) -> ModelParams:
    """Parse and verify model-file bytes (magic, version, checksum, kind)."""
    header, arrays = read_container(data, MODEL_MAGIC, MODEL_FORMAT_VERSION)
    kind = header.get("kind")
    if kind not in ("cnn", "lstm"):
        raise ManifestMismatchError(f"unknown model kind {kind!r}")
    return ModelParams(
        kind=kind,
        arrays=arrays,
        seed=header.get("seed"),
        config=header.get("config", {}),
    )


def save_file(params: ModelParams, path: str | Path) -> None:
    atomic_write_bytes(path, save(params))


def load_file(path: str | Path) -> ModelParams:
    return load(Path(path).read_bytes())

"""Minimal dense-tensor neural kernels with exact manual gradients.

Everything runs in float64 numpy.  Layers accept a single sample or an
array with a leading batch dimension; the forward pass returns a cache
object that the matching backward pass consumes.  Backward passes are
analytic (no autodiff) and are held to central finite differences by the
test suite.

Supported pieces: valid 2-D convolution (stride 1, no padding), fully
connected layers, a 4-gate LSTM cell with backprop through time, relu /
sigmoid / tanh / linear activations, the congestion-weighted Euclidean
training loss, and plain SGD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeMismatchError",
    "EmptyBatchError",
    "ZeroLossError",
    "NonFiniteGradientError",
    "ConvLayerSpec",
    "LstmCellSpec",
    "LossBatch",
    "conv2d_forward",
    "conv2d_backward",
    "dense_forward",
    "dense_backward",
    "lstm_step",
    "lstm_forward",
    "lstm_backward",
    "loss_forward",
    "loss_backward",
    "sgd_step",
    "glorot_uniform",
    "sigmoid",
]


class ShapeMismatchError(ValueError):
    """Array shapes are inconsistent with the layer's parameters."""


class EmptyBatchError(ValueError):
    """A loss batch must contain at least one element."""


class ZeroLossError(ArithmeticError):
    """Loss is exactly zero; its gradient is singular and the update must be skipped."""


class NonFiniteGradientError(ArithmeticError):
    """A gradient contains NaN or infinity; carries the offending parameter name."""

    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# layer specs


@dataclass(frozen=True)
class ConvLayerSpec:
    """Square valid convolution, stride 1: (H, W, C) -> (H-z+1, W-z+1, F)."""

    filter_size: int
    num_filters: int
    in_channels: int

    def __post_init__(self) -> None:
        if min(self.filter_size, self.num_filters, self.in_channels) < 1:
            raise ValueError("conv spec dimensions must be >= 1")

    def output_shape(self, height: int, width: int) -> tuple[int, int, int]:
        out_h = height - self.filter_size + 1
        out_w = width - self.filter_size + 1
        if out_h < 1 or out_w < 1:
            raise ShapeMismatchError(
                f"{height}x{width} input too small for {self.filter_size}x{self.filter_size} filter"
            )
        return (out_h, out_w, self.num_filters)

    @property
    def param_count(self) -> int:
        return self.filter_size**2 * self.in_channels * self.num_filters + self.num_filters


@dataclass(frozen=True)
class LstmCellSpec:
    """Four-gate LSTM cell (input, forget, candidate, output)."""

    input_dim: int
    hidden_dim: int

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("lstm dims must be >= 1")

    @property
    def param_count(self) -> int:
        # input weights + recurrent weights + bias, for each of the 4 gates
        return 4 * self.hidden_dim * (self.input_dim + self.hidden_dim + 1)


# ---------------------------------------------------------------------------
# activations


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _activate_backward(grad_out: np.ndarray, kind: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.where(z > 0.0, grad_out, 0.0)
    if kind == "sigmoid":
        return grad_out * out * (1.0 - out)
    if kind == "tanh":
        return grad_out * (1.0 - out * out)
    if kind == "linear":
        return grad_out
    raise ValueError(f"unknown activation {kind!r}")


def _as_batch(x: np.ndarray, sample_ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == sample_ndim:
        return x[None, ...], True
    if x.ndim == sample_ndim + 1:
        return x, False
    raise ShapeMismatchError(f"expected {sample_ndim}-D sample or batch, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution


@dataclass
class ConvCache:
    cols: np.ndarray        # (B, H', W', C*k*k) im2col patches
    w_mat: np.ndarray       # (C*k*k, F)
    z: np.ndarray
    out: np.ndarray
    activation: str
    in_shape: tuple[int, ...]
    filter_size: int
    squeezed: bool


def conv2d_forward(
    x: np.ndarray,
    weights: np.ndarray,
    biases: np.ndarray,
    activation: str = "relu",
) -> tuple[np.ndarray, ConvCache]:
    """Valid cross-correlation, stride 1, plus per-filter bias and activation.

    ``x`` is (H, W, C) or (B, H, W, C); ``weights`` is (k, k, C, F).
    Returns the activated (B, H-k+1, W-k+1, F) map and the backward cache.
    """
    xb, squeezed = _as_batch(x, 3)
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if weights.ndim != 4 or weights.shape[0] != weights.shape[1]:
        raise ShapeMismatchError(f"conv weights must be (k, k, C, F), got {weights.shape}")
    k, _, c_in, f = weights.shape
    if xb.shape[3] != c_in:
        raise ShapeMismatchError(f"input channels {xb.shape[3]} != weight channels {c_in}")
    if biases.shape != (f,):
        raise ShapeMismatchError(f"biases must be ({f},), got {biases.shape}")
    if xb.shape[1] < k or xb.shape[2] < k:
        raise ShapeMismatchError(f"input {xb.shape[1]}x{xb.shape[2]} smaller than filter {k}x{k}")

    view = np.lib.stride_tricks.sliding_window_view(xb, (k, k), axis=(1, 2))
    b, out_h, out_w = view.shape[:3]
    cols = view.reshape(b, out_h, out_w, c_in * k * k)
    w_mat = weights.transpose(2, 0, 1, 3).reshape(c_in * k * k, f)
    z = cols @ w_mat + biases
    out = _activate(z, activation)
    cache = ConvCache(cols, w_mat, z, out, activation, xb.shape, k, squeezed)
    return (out[0] if squeezed else out), cache


def conv2d_backward(
    grad_out: np.ndarray, cache: ConvCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward w.r.t. input, weights and biases."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if cache.squeezed:
        grad_out = grad_out[None, ...]
    if grad_out.shape != cache.out.shape:
        raise ShapeMismatchError(
            f"grad shape {grad_out.shape} != forward output shape {cache.out.shape}"
        )
    k = cache.filter_size
    batch, height, width, c_in = cache.in_shape
    out_h, out_w = cache.out.shape[1:3]
    f = cache.w_mat.shape[1]

    grad_z = _activate_backward(grad_out, cache.activation, cache.z, cache.out)
    grad_b = grad_z.sum(axis=(0, 1, 2))
    gz_flat = grad_z.reshape(-1, f)
    grad_w_mat = cache.cols.reshape(-1, c_in * k * k).T @ gz_flat
    grad_w = grad_w_mat.reshape(c_in, k, k, f).transpose(1, 2, 0, 3)

    grad_cols = (gz_flat @ cache.w_mat.T).reshape(batch, out_h, out_w, c_in, k, k)
    grad_x = np.zeros(cache.in_shape, dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            grad_x[:, ki : ki + out_h, kj : kj + out_w, :] += grad_cols[:, :, :, :, ki, kj]
    if cache.squeezed:
        grad_x = grad_x[0]
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# fully connected


@dataclass
class DenseCache:
    x: np.ndarray
    weights: np.ndarray
    z: np.ndarray
    out: np.ndarray
    activation: str
    squeezed: bool


def dense_forward(
    x: np.ndarray,
    weights: np.ndarray,
    biases: np.ndarray,
    activation: str = "relu",
) -> tuple[np.ndarray, DenseCache]:
    """Affine map plus activation: x (B, D) @ weights (D, K) + biases (K,)."""
    xb, squeezed = _as_batch(x, 1)
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if weights.ndim != 2 or xb.shape[1] != weights.shape[0]:
        raise ShapeMismatchError(
            f"input width {xb.shape[1]} incompatible with weights {weights.shape}"
        )
    if biases.shape != (weights.shape[1],):
        raise ShapeMismatchError(f"biases must be ({weights.shape[1]},), got {biases.shape}")
    z = xb @ weights + biases
    out = _activate(z, activation)
    cache = DenseCache(xb, weights, z, out, activation, squeezed)
    return (out[0] if squeezed else out), cache


def dense_backward(
    grad_out: np.ndarray, cache: DenseCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of dense_forward w.r.t. input, weights and biases."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if cache.squeezed:
        grad_out = grad_out[None, ...]
    if grad_out.shape != cache.out.shape:
        raise ShapeMismatchError(
            f"grad shape {grad_out.shape} != forward output shape {cache.out.shape}"
        )
    grad_z = _activate_backward(grad_out, cache.activation, cache.z, cache.out)
    grad_w = cache.x.T @ grad_z
    grad_b = grad_z.sum(axis=0)
    grad_x = grad_z @ cache.weights.T
    if cache.squeezed:
        grad_x = grad_x[0]
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# LSTM cell
#
# Gate packing along the last axis of w_x (D, 4H), w_h (H, 4H), b (4H,):
# [input i, forget f, candidate g, output o].
#   c_t = f * c_{t-1} + i * g        h_t = o * tanh(c_t)


@dataclass
class LstmStepCache:
    x_t: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


@dataclass
class LstmCache:
    steps: list[LstmStepCache]
    w_x: np.ndarray
    w_h: np.ndarray
    squeezed: bool


def _check_lstm_params(w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray) -> int:
    if w_x.ndim != 2 or w_h.ndim != 2 or w_x.shape[1] != w_h.shape[1]:
        raise ShapeMismatchError("lstm weight shapes inconsistent")
    hidden4 = w_x.shape[1]
    if hidden4 % 4 != 0 or w_h.shape[0] * 4 != hidden4 or b.shape != (hidden4,):
        raise ShapeMismatchError("lstm weights must pack 4 gates of equal width")
    return hidden4 // 4


def lstm_step(
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    w_x: np.ndarray,
    w_h: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, LstmStepCache]:
    """One LSTM step; i/f/o gates are sigmoid, candidate and cell squashing tanh."""
    xb, squeezed = _as_batch(x_t, 1)
    hb = np.asarray(h_prev, dtype=np.float64)
    cb = np.asarray(c_prev, dtype=np.float64)
    if squeezed:
        hb, cb = hb[None, ...], cb[None, ...]
    w_x = np.asarray(w_x, dtype=np.float64)
    w_h = np.asarray(w_h, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    hidden = _check_lstm_params(w_x, w_h, b)
    if xb.shape[1] != w_x.shape[0]:
        raise ShapeMismatchError(f"input dim {xb.shape[1]} != weight rows {w_x.shape[0]}")
    if hb.shape[1] != hidden or cb.shape[1] != hidden:
        raise ShapeMismatchError("state width != hidden dim")

    z = xb @ w_x + hb @ w_h + b
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden :])
    c = f * cb + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = LstmStepCache(xb, hb, cb, i, f, g, o, c, tanh_c)
    if squeezed:
        return h[0], c[0], cache
    return h, c, cache


def lstm_forward(
    xs: np.ndarray,
    w_x: np.ndarray,
    w_h: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, LstmCache]:
    """Run a full sequence (B, T, D) from zero initial state.

    Returns all hidden states (B, T, H) plus the BPTT cache.
    """
    xsb, squeezed = _as_batch(xs, 2)
    w_x = np.asarray(w_x, dtype=np.float64)
    w_h = np.asarray(w_h, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    hidden = _check_lstm_params(w_x, w_h, b)
    batch, steps, _ = xsb.shape
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    hs = np.empty((batch, steps, hidden))
    caches: list[LstmStepCache] = []
    for t in range(steps):
        h, c, cache = lstm_step(xsb[:, t, :], h, c, w_x, w_h, b)
        hs[:, t, :] = h
        caches.append(cache)
    full = LstmCache(caches, w_x, w_h, squeezed)
    return (hs[0] if squeezed else hs), full


def lstm_backward(
    grad_hs: np.ndarray, cache: LstmCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT over a cached sequence.

    ``grad_hs`` holds the loss gradient w.r.t. every emitted hidden state
    (zero rows for steps that do not feed the loss).  Returns gradients
    w.r.t. the inputs, w_x, w_h and b.
    """
    grad_hs = np.asarray(grad_hs, dtype=np.float64)
    if cache.squeezed:
        grad_hs = grad_hs[None, ...]
    steps = len(cache.steps)
    batch, hidden = cache.steps[0].h_prev.shape
    if grad_hs.shape != (batch, steps, hidden):
        raise ShapeMismatchError(f"grad_hs shape {grad_hs.shape} != {(batch, steps, hidden)}")

    grad_wx = np.zeros_like(cache.w_x)
    grad_wh = np.zeros_like(cache.w_h)
    grad_b = np.zeros(4 * hidden)
    grad_xs = np.empty((batch, steps, cache.w_x.shape[0]))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in reversed(range(steps)):
        st = cache.steps[t]
        dh = grad_hs[:, t, :] + dh_next
        do = dh * st.tanh_c
        dc = dc_next + dh * st.o * (1.0 - st.tanh_c**2)
        di = dc * st.g
        dg = dc * st.i
        df = dc * st.c_prev
        dc_next = dc * st.f
        dz = np.concatenate(
            [
                di * st.i * (1.0 - st.i),
                df * st.f * (1.0 - st.f),
                dg * (1.0 - st.g**2),
                do * st.o * (1.0 - st.o),
            ],
            axis=1,
        )
        grad_wx += st.x_t.T @ dz
        grad_wh += st.h_prev.T @ dz
        grad_b += dz.sum(axis=0)
        grad_xs[:, t, :] = dz @ cache.w_x.T
        dh_next = dz @ cache.w_h.T
    if cache.squeezed:
        grad_xs = grad_xs[0]
    return grad_xs, grad_wx, grad_wh, grad_b


# ---------------------------------------------------------------------------
# congestion-weighted Euclidean loss
#
#   loss = sqrt( sum_i (X_i - Y_i)^2 + w_i * |X_i - Y_i| ) / N
#
# where w_i is 0 when the target speed ratio Y_i exceeds 0.5 (light traffic)
# and 1 otherwise, so heavy-congestion samples carry an extra absolute-error
# penalty.  The "rmse" variant moves the division by N inside the sqrt.


@dataclass(frozen=True)
class LossBatch:
    """Prediction/target pair for one loss evaluation; N is the batch size."""

    predictions: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        preds = np.asarray(self.predictions, dtype=np.float64).ravel()
        targs = np.asarray(self.targets, dtype=np.float64).ravel()
        if preds.size == 0:
            raise EmptyBatchError("loss batch is empty")
        if preds.shape != targs.shape:
            raise ShapeMismatchError(
                f"{preds.size} predictions vs {targs.size} targets"
            )
        if targs.min() < 0.0 or targs.max() > 1.0:
            raise ValueError("targets must lie in [0, 1]")
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "targets", targs)

    @property
    def n(self) -> int:
        return self.predictions.size


def congestion_weights(targets: np.ndarray) -> np.ndarray:
    """Per-element regularizer switch: 0 for targets above 0.5, else 1."""
    return np.where(targets > 0.5, 0.0, 1.0)


def loss_forward(batch: LossBatch, kind: str = "strict") -> float:
    """Evaluate the regularized Euclidean loss over a batch."""
    diff = batch.predictions - batch.targets
    weights = congestion_weights(batch.targets)
    total = float(np.sum(diff**2 + weights * np.abs(diff)))
    if kind == "strict":
        return float(np.sqrt(total) / batch.n)
    if kind == "rmse":
        return float(np.sqrt(total / batch.n))
    raise ValueError(f"unknown loss kind {kind!r}")


def loss_backward(batch: LossBatch, kind: str = "strict") -> np.ndarray:
    """Gradient of loss_forward w.r.t. the predictions.

    The |.| subgradient at 0 is taken as 0.  Raises ZeroLossError at exactly
    zero loss, where the sqrt makes the gradient singular.
    """
    value = loss_forward(batch, kind)
    if value == 0.0:
        raise ZeroLossError("loss is zero; skip the parameter update")
    diff = batch.predictions - batch.targets
    weights = congestion_weights(batch.targets)
    numerator = 2.0 * diff + weights * np.sign(diff)
    if kind == "strict":
        return numerator / (2.0 * batch.n**2 * value)
    return numerator / (2.0 * batch.n * value)


# ---------------------------------------------------------------------------
# optimizer and init


def sgd_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float
) -> dict[str, np.ndarray]:
    """One plain gradient-descent update: p <- p - lr * g, elementwise."""
    if lr < 0.0:
        raise ValueError("learning rate must be >= 0")
    if set(params) != set(grads):
        raise ShapeMismatchError("parameter/gradient key sets differ")
    updated: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        if p.shape != g.shape:
            raise ShapeMismatchError(f"{name}: param {p.shape} vs grad {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
        updated[name] = p - lr * g
    return updated


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)

# backend/src/force_regressor.py

"""
Compact convolutional wrench regressor with hand-derived gradients.

    conv(3->8) -> ReLU -> conv(8->16) -> ReLU -> conv(16->32) -> ReLU
    -> global average pool -> affine 32->6

Every convolution is 3x3, stride 2, zero padding 1, done as im2col + matmul.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError

log = logging.getLogger(__name__)

KERNEL = 3
STRIDE = 2
PAD = 1
CONV_CHANNELS = (3, 8, 16, 32)
N_OUTPUTS = 6
CONV_LAYERS = ("conv1", "conv2", "conv3")


def param_layout() -> List[Tuple[str, Tuple[int, ...]]]:
    """Ordered (name, shape) of every parameter array."""
    layout = []
    for name, (c_in, c_out) in zip(CONV_LAYERS, zip(CONV_CHANNELS[:-1], CONV_CHANNELS[1:])):
        layout.append((f"{name}.weight", (c_out, c_in, KERNEL, KERNEL)))
        layout.append((f"{name}.bias", (c_out,)))
    layout.append(("fc.weight", (N_OUTPUTS, CONV_CHANNELS[-1])))
    layout.append(("fc.bias", (N_OUTPUTS,)))
    return layout


@dataclass(frozen=True, eq=False)
class RegressorParams:
    arrays: Dict[str, np.ndarray]
    input_shape: Tuple[int, int, int] = (3, 60, 80)

    def __post_init__(self):
        frozen = {}
        for name, shape in param_layout():
            if name not in self.arrays:
                raise DimensionError(f"missing parameter {name}")
            arr = np.array(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "arrays", frozen)
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        if self.input_shape[0] != CONV_CHANNELS[0]:
            raise DimensionError(f"input must have {CONV_CHANNELS[0]} channels")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in param_layout())

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.arrays[name].ravel() for name, _ in param_layout()])

    def with_vector(self, vector: np.ndarray) -> "RegressorParams":
        return unflatten(vector, self.input_shape)

    @classmethod
    def zeros(cls, input_shape: Tuple[int, int, int] = (3, 60, 80)) -> "RegressorParams":
        return cls({name: np.zeros(shape) for name, shape in param_layout()}, input_shape)


def unflatten(vector: np.ndarray, input_shape: Tuple[int, int, int] = (3, 60, 80)) -> RegressorParams:
    vector = np.asarray(vector, dtype=np.float64).ravel()
    arrays, offset = {}, 0
    for name, shape in param_layout():
        n = int(np.prod(shape))
        if offset + n > vector.size:
            raise DimensionError(f"parameter vector too short for {name}")
        arrays[name] = vector[offset:offset + n].reshape(shape)
        offset += n
    if offset != vector.size:
        raise DimensionError(f"parameter vector has {vector.size - offset} trailing values")
    return RegressorParams(arrays, input_shape)


def init_params(seed: int, input_shape: Tuple[int, int, int] = (3, 60, 80)) -> RegressorParams:
    """Uniform in ±sqrt(1/fan_in) for weights and biases alike."""
    rng = np.random.default_rng(seed)
    shapes = dict(param_layout())
    arrays = {}
    for name, shape in param_layout():
        weight_shape = shapes[name.split(".")[0] + ".weight"]
        bound = math.sqrt(1.0 / int(np.prod(weight_shape[1:])))
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    return RegressorParams(arrays, input_shape)


# --- Layers ---

def _im2col(x: np.ndarray) -> Tuple[np.ndarray, int, int]:
    n, c, _, _ = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    windows = sliding_window_view(padded, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::STRIDE, ::STRIDE]
    out_h, out_w = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * KERNEL * KERNEL)
    return cols, out_h, out_w


def _col2im(dcols: np.ndarray, x_shape: Tuple[int, ...], out_h: int, out_w: int) -> np.ndarray:
    n, c, h, w = x_shape
    dcols = dcols.reshape(n, out_h, out_w, c, KERNEL, KERNEL)
    dpadded = np.zeros((n, c, h + 2 * PAD, w + 2 * PAD))
    for ki in range(KERNEL):
        for kj in range(KERNEL):
            dpadded[:, :, ki:ki + STRIDE * out_h:STRIDE, kj:kj + STRIDE * out_w:STRIDE] += \
                dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return dpadded[:, :, PAD:PAD + h, PAD:PAD + w]


def _conv_forward(x, weight, bias):
    cols, out_h, out_w = _im2col(x)
    out = cols @ weight.reshape(weight.shape[0], -1).T + bias
    out = out.reshape(x.shape[0], out_h, out_w, -1).transpose(0, 3, 1, 2)
    return out, (x.shape, cols, out_h, out_w)


def _conv_backward(dout, weight, cache):
    x_shape, cols, out_h, out_w = cache
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, weight.shape[0])
    dweight = (dflat.T @ cols).reshape(weight.shape)
    dbias = dflat.sum(axis=0)
    dx = _col2im(dflat @ weight.reshape(weight.shape[0], -1), x_shape, out_h, out_w)
    return dx, dweight, dbias


# --- Network ---

def _as_batch(params: RegressorParams, inputs: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[1:] != params.input_shape:
        raise DimensionError(f"expected input {params.input_shape}, got {np.shape(inputs)}")
    return x, single


def _run(params: RegressorParams, x: np.ndarray):
    caches, pre_activations = [], []
    a = x
    for layer in CONV_LAYERS:
        z, cache = _conv_forward(a, params[f"{layer}.weight"], params[f"{layer}.bias"])
        caches.append(cache)
        pre_activations.append(z)
        a = np.maximum(z, 0.0)
    pooled = a.mean(axis=(2, 3))
    out = pooled @ params["fc.weight"].T + params["fc.bias"]
    return out, pooled, a.shape, caches, pre_activations


def forward(params: RegressorParams, inputs: np.ndarray) -> np.ndarray:
    """Normalized wrench for one (3, H, W) input or a (N, 3, H, W) batch."""
    x, single = _as_batch(params, inputs)
    out = _run(params, x)[0]
    return out[0] if single else out


def forward_trace(params: RegressorParams, inputs: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Output plus every conv pre-activation (for locating ReLU kinks)."""
    x, _ = _as_batch(params, inputs)
    out, _, _, _, pre = _run(params, x)
    return out, pre


def loss_and_gradient(params: RegressorParams, inputs: np.ndarray,
                      targets: np.ndarray) -> Tuple[float, RegressorParams]:
    """Summed absolute error over the batch and its gradient, in the params layout."""
    x, _ = _as_batch(params, inputs)
    targets = np.asarray(targets, dtype=np.float64).reshape(x.shape[0], N_OUTPUTS)
    if x.shape[0] == 0:
        raise DimensionError("empty batch")

    out, pooled, last_shape, caches, pre = _run(params, x)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite network output")
    residual = out - targets
    loss = float(np.abs(residual).sum())

    grads: Dict[str, np.ndarray] = {}
    dout = np.sign(residual)
    grads["fc.weight"] = dout.T @ pooled
    grads["fc.bias"] = dout.sum(axis=0)
    dpooled = dout @ params["fc.weight"]
    da = np.broadcast_to(dpooled[:, :, None, None] / (last_shape[2] * last_shape[3]), last_shape)

    for layer, cache, z in zip(reversed(CONV_LAYERS), reversed(caches), reversed(pre)):
        dz = da * (z > 0.0)
        da, grads[f"{layer}.weight"], grads[f"{layer}.bias"] = _conv_backward(dz, params[f"{layer}.weight"], cache)

    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NumericError("non-finite gradient")
    return loss, RegressorParams(grads, params.input_shape)


# --- Optimizer ---

class Adam:
    """Adam over the flattened parameter vector."""

    def __init__(self, size: int, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

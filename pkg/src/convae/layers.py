"""Layer forward/backward passes with hand-derived gradients.

Conventions:
  conv weights   (c_out, c_in, k, k), correlation (no kernel flip)
  deconv weights (c_in, c_out, k, k), the adjoint map of conv
  fc weights     (c_out, fan_in, 1, 1)
  biases         one per output channel/unit

Backward passes accumulate into the block's grad buffers and return the
gradient wrt the layer input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError
from .tensor import Tensor, zeros


@dataclass
class ParamBlock:
    """One layer's trainable parameters plus grad and momentum buffers."""

    name: str
    kind: str  # conv | deconv | fc
    weights: Tensor
    biases: np.ndarray
    weight_grad: Tensor = field(init=False)
    bias_grad: np.ndarray = field(init=False)
    weight_momentum: Tensor = field(init=False)
    bias_momentum: np.ndarray = field(init=False)

    def __post_init__(self):
        self.biases = np.ascontiguousarray(self.biases, dtype=np.float64)
        if self.biases.ndim != 1:
            raise ShapeError(f"{self.name}: biases must be a flat array")
        self.weight_grad = zeros(self.weights.shape)
        self.bias_grad = np.zeros_like(self.biases)
        self.weight_momentum = zeros(self.weights.shape)
        self.bias_momentum = np.zeros_like(self.biases)

    @property
    def fan_in(self) -> int:
        o, c, kh, kw = self.weights.shape
        if self.kind == "conv":
            return c * kh * kw
        if self.kind == "deconv":
            # weight layout (c_in, c_out, k, k)
            return o * kh * kw
        return c  # fc: (c_out, fan_in, 1, 1)

    def clear_grads(self) -> None:
        self.weight_grad.data.fill(0.0)
        self.bias_grad.fill(0.0)


def make_param_block(name: str, kind: str, in_shape, num_output: int, kernel: int | None = None) -> ParamBlock:
    """Allocate a zeroed block with the canonical weight layout for ``kind``."""
    _, c_in, h, w = in_shape
    if kind == "conv":
        wshape = (num_output, c_in, kernel, kernel)
    elif kind == "deconv":
        wshape = (c_in, num_output, kernel, kernel)
    elif kind == "fc":
        wshape = (num_output, c_in * h * w, 1, 1)
    else:
        raise ShapeError(f"{name}: kind {kind!r} has no parameters")
    return ParamBlock(name, kind, zeros(wshape), np.zeros(num_output))


# --- convolution -----------------------------------------------------------

def conv_forward(x: Tensor, p: ParamBlock) -> Tensor:
    c_out, c_in, k, _ = p.weights.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"{p.name}: input has {x.shape[1]} channels, weights expect {c_in}")
    if x.shape[2] < k or x.shape[3] < k:
        raise ShapeError(f"{p.name}: kernel {k} larger than input {x.shape[2]}x{x.shape[3]}")
    return Tensor(kernels.conv_fwd(x.data, p.weights.data, p.biases))


def conv_backward(x: Tensor, p: ParamBlock, dy: Tensor, need_dx: bool = True) -> Tensor | None:
    c_out, c_in, k, _ = p.weights.shape
    expect = (x.shape[0], c_out, x.shape[2] - k + 1, x.shape[3] - k + 1)
    if dy.shape != expect:
        raise ShapeError(f"{p.name}: dy shape {dy.shape}, expected {expect}")
    p.weight_grad.data += kernels.conv_dw(x.data, dy.data, k)
    p.bias_grad += kernels.bias_grad(dy.data)
    if not need_dx:
        return None
    return Tensor(kernels.conv_dx(p.weights.data, dy.data, x.shape[2], x.shape[3]))


# --- deconvolution (transposed convolution) --------------------------------

def deconv_forward(x: Tensor, p: ParamBlock) -> Tensor:
    c_in, c_out, k, _ = p.weights.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"{p.name}: input has {x.shape[1]} channels, weights expect {c_in}")
    return Tensor(kernels.deconv_fwd(x.data, p.weights.data, p.biases))


def deconv_backward(x: Tensor, p: ParamBlock, dy: Tensor, need_dx: bool = True) -> Tensor | None:
    c_in, c_out, k, _ = p.weights.shape
    expect = (x.shape[0], c_out, x.shape[2] + k - 1, x.shape[3] + k - 1)
    if dy.shape != expect:
        raise ShapeError(f"{p.name}: dy shape {dy.shape}, expected {expect}")
    p.weight_grad.data += kernels.deconv_dw(x.data, dy.data, k)
    p.bias_grad += kernels.bias_grad(dy.data)
    if not need_dx:
        return None
    return Tensor(kernels.deconv_dx(p.weights.data, dy.data, x.shape[2], x.shape[3]))


# --- fully connected --------------------------------------------------------

def fc_forward(x: Tensor, p: ParamBlock) -> Tensor:
    c_out, fan_in, _, _ = p.weights.shape
    n = x.shape[0]
    flat = x.data.reshape(n, -1)
    if flat.shape[1] != fan_in:
        raise ShapeError(f"{p.name}: input has {flat.shape[1]} features, weights expect {fan_in}")
    y = flat @ p.weights.data.reshape(c_out, fan_in).T + p.biases
    return Tensor(y.reshape(n, c_out, 1, 1))


def fc_backward(x: Tensor, p: ParamBlock, dy: Tensor, need_dx: bool = True) -> Tensor | None:
    c_out, fan_in, _, _ = p.weights.shape
    n = x.shape[0]
    if dy.shape != (n, c_out, 1, 1):
        raise ShapeError(f"{p.name}: dy shape {dy.shape}, expected {(n, c_out, 1, 1)}")
    flat = x.data.reshape(n, fan_in)
    g = dy.data.reshape(n, c_out)
    p.weight_grad.data += (g.T @ flat).reshape(c_out, fan_in, 1, 1)
    p.bias_grad += g.sum(axis=0)
    if not need_dx:
        return None
    return Tensor((g @ p.weights.data.reshape(c_out, fan_in)).reshape(x.shape))


# --- sigmoid ----------------------------------------------------------------

def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function in the overflow-safe branch form."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_forward(x: Tensor) -> Tensor:
    return Tensor(sigmoid(x.data))


def sigmoid_backward(y: Tensor, dy: Tensor) -> Tensor:
    if y.shape != dy.shape:
        raise ShapeError(f"sigmoid backward: y shape {y.shape} != dy shape {dy.shape}")
    return Tensor(dy.data * y.data * (1.0 - y.data))


# --- reshape ----------------------------------------------------------------

def resolve_reshape_dims(in_shape, dims) -> tuple[int, int, int, int]:
    """Resolve 0 entries (copy from input) and check the element count."""
    out = tuple(int(in_shape[i]) if dims[i] == 0 else int(dims[i]) for i in range(4))
    if int(np.prod(out)) != int(np.prod(in_shape)):
        raise ShapeError(f"reshape {tuple(dims)} maps {tuple(in_shape)} to {out}: element counts differ")
    return out


def reshape_forward(x: Tensor, dims) -> Tensor:
    return x.reshaped(resolve_reshape_dims(x.shape, dims))


def reshape_backward(dy: Tensor, in_shape) -> Tensor:
    return dy.reshaped(tuple(in_shape))

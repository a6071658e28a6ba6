"""Vectorized fallback kernels (pure numpy).

Each op accumulates per output element in the same order as the compiled
backend (conv: taps in (c, p, q) order; gradients wrt input: (o, p, q)),
one rounding per tap, so results are bit-identical between backends.
Keep that ordering when touching this file.
"""

from __future__ import annotations

import numpy as np

name = "numpy"


def conv_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    oh, ow = h - kh + 1, wd - kw + 1
    y = np.empty((n, c_out, oh, ow), dtype=np.float64)
    y[...] = b[None, :, None, None]
    for c in range(c_in):
        for p in range(kh):
            for q in range(kw):
                y += w[None, :, c, p, q, None, None] * x[:, None, c, p:p + oh, q:q + ow]
    return y


def conv_dx(w: np.ndarray, dy: np.ndarray, h_in: int, w_in: int) -> np.ndarray:
    n, c_out, oh, ow = dy.shape
    _, c_in, kh, kw = w.shape
    dx = np.zeros((n, c_in, h_in, w_in), dtype=np.float64)
    for o in range(c_out):
        for p in range(kh):
            for q in range(kw):
                dx[:, :, p:p + oh, q:q + ow] += (
                    w[None, o, :, p, q, None, None] * dy[:, None, o, :, :]
                )
    return dx


def deconv_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, c_in, h, wd = x.shape
    _, c_out, kh, kw = w.shape
    oh, ow = h + kh - 1, wd + kw - 1
    y = np.empty((n, c_out, oh, ow), dtype=np.float64)
    y[...] = b[None, :, None, None]
    if h == 1 and wd == 1:
        # 1x1 input: each output pixel receives exactly one tap per channel
        for c in range(c_in):
            y += w[None, c, :, :, :] * x[:, None, c, :, :]
        return y
    for c in range(c_in):
        for p in range(kh):
            for q in range(kw):
                y[:, :, p:p + h, q:q + wd] += w[None, c, :, p, q, None, None] * x[:, None, c, :, :]
    return y


def deconv_dx(w: np.ndarray, dy: np.ndarray, h_in: int, w_in: int) -> np.ndarray:
    n, c_out, oh, ow = dy.shape
    c_in, _, kh, kw = w.shape
    dx = np.zeros((n, c_in, h_in, w_in), dtype=np.float64)
    for o in range(c_out):
        for p in range(kh):
            for q in range(kw):
                dx += w[None, :, o, p, q, None, None] * dy[:, None, o, p:p + h_in, q:q + w_in]
    return dx

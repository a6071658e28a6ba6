"""Hot convolution/deconvolution kernels with selectable backend.

The compiled extension (``convae.kernels._native``, built from Cython) is
used when importable; otherwise the vectorized numpy fallback is selected.
Set ``CONVAE_BACKEND=numpy`` or ``CONVAE_BACKEND=native`` to force a lane.

Forward and input-gradient ops are backend-switched; weight and bias
gradients are shared numpy code (BLAS contractions) used by both lanes.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError
from . import numpy_backend

try:
    from . import _native  # type: ignore[attr-defined]
    _HAVE_NATIVE = True
except ImportError:
    _native = None
    _HAVE_NATIVE = False

_requested = os.environ.get("CONVAE_BACKEND", "").strip().lower()
if _requested in ("", "auto"):
    _backend = _native if _HAVE_NATIVE else numpy_backend
elif _requested == "native":
    if not _HAVE_NATIVE:
        raise ConfigError("CONVAE_BACKEND=native but the compiled extension is not available")
    _backend = _native
elif _requested == "numpy":
    _backend = numpy_backend
else:
    raise ConfigError(f"unknown CONVAE_BACKEND value {_requested!r}")


def backend_name() -> str:
    return _backend.name


def available_backends() -> list[str]:
    return ["native", "numpy"] if _HAVE_NATIVE else ["numpy"]


def get_backend(name: str):
    """Return the backend module by name (for parity tests and benchmarks)."""
    if name == "numpy":
        return numpy_backend
    if name == "native" and _HAVE_NATIVE:
        return _native
    raise ConfigError(f"backend {name!r} is not available")


def conv_fwd(x, w, b):
    return _backend.conv_fwd(x, w, b)


def conv_dx(w, dy, h_in, w_in):
    return _backend.conv_dx(w, dy, h_in, w_in)


def deconv_fwd(x, w, b):
    return _backend.deconv_fwd(x, w, b)


def deconv_dx(w, dy, h_in, w_in):
    return _backend.deconv_dx(w, dy, h_in, w_in)


def conv_dw(x: np.ndarray, dy: np.ndarray, k: int) -> np.ndarray:
    """dL/dW for conv: correlate input windows with the output gradient.

    The native lane reuses its conv kernel with samples recast as channels;
    the numpy lane contracts per tap. Both are direct evaluations of the
    same sum and agree to rounding error.
    """
    n, c_in, h, wd = x.shape
    _, c_out, oh, ow = dy.shape
    if _backend is not numpy_backend:
        a = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
        w2 = np.ascontiguousarray(dy.transpose(1, 0, 2, 3))
        out = _backend.conv_fwd(a, w2, np.zeros(c_out))
        return out.transpose(1, 0, 2, 3)
    dw = np.empty((c_out, c_in, k, k), dtype=np.float64)
    for p in range(k):
        for q in range(k):
            dw[:, :, p, q] = np.tensordot(
                dy, x[:, :, p:p + oh, q:q + ow], axes=([0, 2, 3], [0, 2, 3])
            )
    return dw


def deconv_dw(x: np.ndarray, dy: np.ndarray, k: int) -> np.ndarray:
    """dL/dW for deconv; weight layout (c_in, c_out, k, k)."""
    n, c_in, h, wd = x.shape
    _, c_out, oh, ow = dy.shape
    if _backend is not numpy_backend:
        a = np.ascontiguousarray(dy.transpose(1, 0, 2, 3))
        w2 = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
        out = _backend.conv_fwd(a, w2, np.zeros(c_in))
        return out.transpose(1, 0, 2, 3)
    dw = np.empty((c_in, c_out, k, k), dtype=np.float64)
    if h == 1 and wd == 1:
        dw[...] = np.tensordot(x[:, :, 0, 0], dy, axes=([0], [0]))
        return dw
    for p in range(k):
        for q in range(k):
            dw[:, :, p, q] = np.tensordot(
                x, dy[:, :, p:p + h, q:q + wd], axes=([0, 2, 3], [0, 2, 3])
            )
    return dw


def bias_grad(dy: np.ndarray) -> np.ndarray:
    """dL/db: sum of the output gradient over samples and positions."""
    return dy.sum(axis=(0, 2, 3))

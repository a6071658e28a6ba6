"""Parameter initialization rules (fillers).

All randomness flows through an explicitly seeded numpy Generator (PCG64);
system entropy is never consulted, so a given seed reproduces the same
parameters bit-for-bit on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .layers import ParamBlock

FILLER_KINDS = ("constant", "xavier", "gaussian_sparse")


@dataclass
class FillerSpec:
    kind: str
    value: float = 0.0        # constant
    std: float = 1.0          # gaussian_sparse
    sparse: int = 1           # gaussian_sparse: expected nonzeros per output unit

    def __post_init__(self):
        if self.kind not in FILLER_KINDS:
            raise ConfigError(f"unknown filler kind {self.kind!r}")
        if self.kind == "gaussian_sparse":
            if self.std <= 0:
                raise ConfigError("gaussian filler requires std > 0")
            if self.sparse < 1:
                raise ConfigError("gaussian filler requires sparse >= 1")


XAVIER = FillerSpec("xavier")
CONSTANT_ZERO = FillerSpec("constant", value=0.0)


def fill(block: ParamBlock, spec: FillerSpec, rng: np.random.Generator, target: str = "weights") -> None:
    """Fill the weights (default) or biases of ``block`` in place.

    xavier draws uniform on [-sqrt(3/fan_in), +sqrt(3/fan_in)];
    gaussian_sparse keeps each weight with probability min(1, sparse/fan_in)
    and draws kept values from N(0, std^2).
    """
    if target == "weights":
        out = block.weights.data
    elif target == "biases":
        out = block.biases
    else:
        raise ConfigError(f"unknown fill target {target!r}")

    if spec.kind == "constant":
        out.fill(spec.value)
        return
    fan_in = block.fan_in
    if spec.kind == "xavier":
        bound = np.sqrt(3.0 / fan_in)
        out[...] = rng.uniform(-bound, bound, size=out.shape)
        return
    # gaussian_sparse
    p_keep = min(1.0, spec.sparse / fan_in)
    mask = rng.random(size=out.shape) < p_keep
    values = rng.normal(0.0, spec.std, size=out.shape)
    out[...] = np.where(mask, values, 0.0)

"""Reconstruction objective: sigmoid cross-entropy plus Euclidean loss.

Both losses are normalized by batch size (not element count), so reported
values are per-image sums over all pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .layers import sigmoid
from .tensor import Tensor

LOSS_KINDS = ("sigmoid_cross_entropy", "euclidean")


@dataclass
class LossSpec:
    """One loss attachment parsed from a network description."""

    name: str
    kind: str
    pred_layer: str
    apply_sigmoid_to_pred: bool = False
    weight: float = 1.0


def sce_loss(logits: Tensor, target: Tensor) -> tuple[float, Tensor]:
    """Sigmoid cross-entropy on raw logits; returns (loss, grad wrt logits)."""
    if logits.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {logits.shape} vs {target.shape}")
    t = target.data
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise DomainError("cross-entropy targets must lie in [0, 1]")
    x = logits.data
    n = max(logits.shape[0], 1)
    # max(x,0) - x*t + log(1+exp(-|x|)) == -t*log(s(x)) - (1-t)*log(1-s(x))
    per_elem = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    loss = float(per_elem.sum()) / n
    grad = (sigmoid(x) - t) / n
    return loss, Tensor(grad)


def euclidean_loss(pred: Tensor, target: Tensor) -> tuple[float, Tensor]:
    """Half squared error; returns (loss, grad wrt pred)."""
    if pred.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    n = max(pred.shape[0], 1)
    diff = pred.data - target.data
    loss = float((diff * diff).sum()) / (2.0 * n)
    return loss, Tensor(diff / n)


def combined_backward(
    logits: Tensor, target: Tensor, specs: list[LossSpec]
) -> tuple[float, dict[str, float], Tensor]:
    """Weighted sum of the attached losses evaluated on the output logits.

    Cross-entropy consumes the raw logits; a Euclidean spec with
    ``apply_sigmoid_to_pred`` consumes sigmoid(logits) with the chain rule
    applied. A target whose shape labels differ from the logits (an fc
    reconstruction of a 2-D image) is relabeled; element counts must match.
    Returns (total, per-kind unweighted values, grad wrt logits).
    """
    if not specs:
        raise ConfigError("no loss attached to the network output")
    if target.shape != logits.shape:
        target = target.reshaped(logits.shape)
    total = 0.0
    values = {"sigmoid_cross_entropy": 0.0, "euclidean": 0.0}
    grad = np.zeros_like(logits.data)
    sig = None
    for spec in specs:
        if spec.kind == "sigmoid_cross_entropy":
            loss, g = sce_loss(logits, target)
            grad += spec.weight * g.data
        elif spec.kind == "euclidean":
            if spec.apply_sigmoid_to_pred:
                if sig is None:
                    sig = sigmoid(logits.data)
                loss, g = euclidean_loss(Tensor(sig), target)
                grad += spec.weight * g.data * sig * (1.0 - sig)
            else:
                loss, g = euclidean_loss(logits, target)
                grad += spec.weight * g.data
        else:
            raise ConfigError(f"unknown loss kind {spec.kind!r}")
        total += spec.weight * loss
        values[spec.kind] += loss
    return total, values, Tensor(grad)

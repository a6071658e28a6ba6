"""Per-layer inspection: activation traces, saturation report, latent export,
and grayscale grid rendering of feature maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetHandle
from .network import Network
from .tensor import Tensor


@dataclass
class LayerTrace:
    name: str
    output: Tensor
    min: float
    max: float
    post_activation: bool

    @property
    def shape_string(self) -> str:
        return "x".join(str(d) for d in self.output.shape)


def trace_all(network: Network, sample: Tensor) -> list[LayerTrace]:
    """One trace per forward node (attached activations count separately)."""
    traces = []
    for node, out in network.forward(sample):
        y = out.data
        lo = float(y.min()) if y.size else 0.0
        hi = float(y.max()) if y.size else 0.0
        traces.append(LayerTrace(node.name, out, lo, hi, node.post_activation))
    return traces


def saturation_report(traces: list[LayerTrace], epsilon: float = 1e-6) -> list[str]:
    """Warnings for flatlined post-activation outputs and non-finite values."""
    warnings = []
    for t in traces:
        y = t.output.data
        if y.size and not np.isfinite(y).all():
            warnings.append(f"{t.name}: non-finite values present")
            continue
        if t.post_activation and y.size and (t.max - t.min) < epsilon:
            warnings.append(f"{t.name}: output flatlined at {t.min:.6g} (range < {epsilon:g})")
    return warnings


def latent_rows(network: Network, handle: DatasetHandle, batch_size: int = 256):
    """CSV rows 'label,c0,...' of latent codes, in dataset order."""
    width = network.latent_width
    yield "label," + ",".join(f"c{i}" for i in range(width))
    for start in range(0, handle.count, batch_size):
        batch = Tensor(handle.images.data[start:start + batch_size])
        codes = network.latent_codes(batch).data.reshape(batch.shape[0], width)
        for row, label in zip(codes, handle.labels[start:start + batch_size]):
            yield f"{label}," + ",".join(f"{v:.9g}" for v in row)


def export_latent(network: Network, handle: DatasetHandle, path) -> int:
    """Write the latent-code CSV; returns the number of data rows."""
    count = 0
    with open(path, "w") as f:
        for i, row in enumerate(latent_rows(network, handle)):
            f.write(row + "\n")
            count = i
    return count


def to_gray(map2d: np.ndarray) -> np.ndarray:
    """Min-max normalize one map to 0..255; zero-range maps become mid-gray."""
    lo, hi = float(map2d.min()), float(map2d.max())
    if hi - lo == 0.0:
        return np.full(map2d.shape, 128, dtype=np.uint8)
    scaled = np.rint((map2d - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_pgm(path, gray: np.ndarray) -> None:
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(gray.tobytes())


def read_pgm(path) -> np.ndarray:
    """Parse back a binary PGM written by :func:`write_pgm` (for tests)."""
    raw = Path(path).read_bytes()
    header, _, rest = raw.partition(b"255\n")
    magic, dims = header.split(b"\n")[:2]
    assert magic == b"P5"
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(rest, dtype=np.uint8, count=h * w).reshape(h, w)


def render_grid(trace: LayerTrace, out_dir, prefix: str = "") -> list[Path]:
    """Write one PGM per channel map plus a sidecar line with name/shape/range."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{prefix}{trace.name}"
    paths = []
    n, c, h, w = trace.output.shape
    maps = trace.output.data.reshape(n * c, h, w)
    for ci in range(maps.shape[0]):
        p = out_dir / (f"{stem}_map{ci}.pgm" if maps.shape[0] > 1 else f"{stem}.pgm")
        write_pgm(p, to_gray(maps[ci]))
        paths.append(p)
    sidecar = out_dir / f"{stem}.txt"
    sidecar.write_text(f"{trace.name} {trace.shape_string} [{trace.min:.9g}, {trace.max:.9g}]\n")
    paths.append(sidecar)
    return paths


def nearest_centroid_accuracy(codes: np.ndarray, labels: np.ndarray) -> float:
    """Share of samples whose nearest class centroid matches their label.

    A rough proxy for class separation in the latent space; reported for
    information only.
    """
    classes = np.unique(labels)
    centroids = np.stack([codes[labels == c].mean(axis=0) for c in classes])
    d = ((codes[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    predicted = classes[np.argmin(d, axis=1)]
    return float((predicted == labels).mean())

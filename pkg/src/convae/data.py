"""MNIST-style IDX ingestion and deterministic batching.

Reads the raw big-endian IDX containers (magic 0x00000803 for images,
0x00000801 for labels), transparently decompressing gzip files. Pixels are
scaled by exactly 1/255 into [0, 1]; no mean subtraction.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IngestionError
from .tensor import Tensor

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class DatasetHandle:
    images: Tensor  # (count, 1, rows, cols), values in [0, 1]
    labels: np.ndarray  # (count,) integers 0..9
    split: str = "train"

    @property
    def count(self) -> int:
        return self.images.shape[0]

    def subset(self, count: int, split: str | None = None) -> "DatasetHandle":
        """First ``count`` samples, preserving order."""
        if count > self.count:
            raise ConfigError(f"requested {count} samples, dataset has {self.count}")
        return DatasetHandle(
            Tensor(self.images.data[:count].copy()),
            self.labels[:count].copy(),
            split or self.split,
        )


def _read_file(path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(f) as gz:
                return gz.read()
        return f.read()


def _read_be32(buf: bytes, offset: int, path) -> int:
    if offset + 4 > len(buf):
        raise IngestionError(path, offset, "truncated header")
    return int.from_bytes(buf[offset:offset + 4], "big")


def load_idx(images_path, labels_path, split: str = "train") -> DatasetHandle:
    """Load an image/label IDX pair into a normalized DatasetHandle."""
    img_buf = _read_file(images_path)
    magic = _read_be32(img_buf, 0, images_path)
    if magic != IMAGE_MAGIC:
        raise IngestionError(images_path, 0, f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    count = _read_be32(img_buf, 4, images_path)
    rows = _read_be32(img_buf, 8, images_path)
    cols = _read_be32(img_buf, 12, images_path)
    expected = 16 + count * rows * cols
    if len(img_buf) != expected:
        raise IngestionError(images_path, min(len(img_buf), expected),
                             f"payload has {len(img_buf) - 16} bytes, header promises {count * rows * cols}")
    pixels = np.frombuffer(img_buf, dtype=np.uint8, offset=16).reshape(count, 1, rows, cols)

    lab_buf = _read_file(labels_path)
    magic = _read_be32(lab_buf, 0, labels_path)
    if magic != LABEL_MAGIC:
        raise IngestionError(labels_path, 0, f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    lab_count = _read_be32(lab_buf, 4, labels_path)
    if lab_count != count:
        raise IngestionError(labels_path, 4, f"label count {lab_count} != image count {count}")
    expected = 8 + lab_count
    if len(lab_buf) != expected:
        raise IngestionError(labels_path, min(len(lab_buf), expected),
                             f"payload has {len(lab_buf) - 8} bytes, header promises {lab_count}")
    labels = np.frombuffer(lab_buf, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise IngestionError(labels_path, 8 + bad, f"label value {labels[bad]} outside 0..9")

    images = Tensor(pixels.astype(np.float64) / 255.0)
    return DatasetHandle(images, labels, split)


def epoch_order(count: int, run_seed: int, epoch: int) -> np.ndarray:
    """Deterministic sample permutation for one epoch of one run."""
    rng = np.random.default_rng([run_seed & 0xFFFFFFFFFFFFFFFF, epoch])
    return rng.permutation(count)


def epoch_batches(handle: DatasetHandle, batch_size: int, run_seed: int, epoch: int):
    """Shuffled full batches for one epoch; a partial final batch is dropped."""
    if batch_size > handle.count:
        raise ConfigError(f"batch size {batch_size} exceeds dataset size {handle.count}")
    order = epoch_order(handle.count, run_seed, epoch)
    for start in range(0, handle.count - batch_size + 1, batch_size):
        idx = order[start:start + batch_size]
        batch = Tensor(handle.images.data[idx])
        yield batch, batch  # reconstruction target is the input itself


def batches(handle: DatasetHandle, batch_size: int, run_seed: int):
    """Endless batch stream over whole epochs, reshuffled each epoch."""
    epoch = 0
    while True:
        yield from epoch_batches(handle, batch_size, run_seed, epoch)
        epoch += 1

"""Binary checkpoint format.

Little-endian layout::

    magic "CAEF" | version u32 | name_len u32 | name bytes | iter u64
    then per parameter block, in network order:
      name_len u32 | name bytes | shape 4 x u64 | weights f64[prod(shape)]
      | bias_len u64 | biases f64[bias_len]

Blocks run to end of file. Identical parameters serialize to identical
bytes, which the determinism guarantees rely on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import PairingError
from .layers import ParamBlock

MAGIC = b"CAEF"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    net_name: str
    iteration: int
    blocks: dict[str, tuple[np.ndarray, np.ndarray]]  # name -> (weights4d, biases1d)


def save_checkpoint(path, net_name: str, iteration: int, params: dict[str, ParamBlock]) -> None:
    with open(path, "wb") as f:
        name_bytes = net_name.encode("utf-8")
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(name_bytes)))
        f.write(name_bytes)
        f.write(struct.pack("<Q", iteration))
        for name, block in params.items():
            bname = name.encode("utf-8")
            f.write(struct.pack("<I", len(bname)))
            f.write(bname)
            f.write(struct.pack("<4Q", *block.weights.shape))
            f.write(block.weights.data.astype("<f8", copy=False).tobytes())
            f.write(struct.pack("<Q", block.biases.size))
            f.write(block.biases.astype("<f8", copy=False).tobytes())


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise PairingError(f"{self.path}: truncated checkpoint at offset {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def done(self) -> bool:
        return self.pos >= len(self.buf)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf, path)
    if r.read(4) != MAGIC:
        raise PairingError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", r.read(4))
    if version != FORMAT_VERSION:
        raise PairingError(f"{path}: unsupported checkpoint version {version}")
    (name_len,) = struct.unpack("<I", r.read(4))
    net_name = r.read(name_len).decode("utf-8")
    (iteration,) = struct.unpack("<Q", r.read(8))
    blocks: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    while not r.done():
        (blen,) = struct.unpack("<I", r.read(4))
        bname = r.read(blen).decode("utf-8")
        shape = struct.unpack("<4Q", r.read(32))
        count = int(np.prod(shape))
        weights = np.frombuffer(r.read(count * 8), dtype="<f8").reshape(shape).copy()
        (bias_len,) = struct.unpack("<Q", r.read(8))
        biases = np.frombuffer(r.read(bias_len * 8), dtype="<f8").copy()
        blocks[bname] = (weights, biases)
    return Checkpoint(net_name=net_name, iteration=iteration, blocks=blocks)


def apply_checkpoint(ckpt: Checkpoint, params: dict[str, ParamBlock], net_name: str) -> None:
    """Copy checkpoint values into existing blocks, verifying the pairing."""
    if ckpt.net_name != net_name:
        raise PairingError(
            f"checkpoint was trained on net {ckpt.net_name!r}, description declares {net_name!r}"
        )
    for name, block in params.items():
        if name not in ckpt.blocks:
            raise PairingError(f"checkpoint lacks parameters for layer {name!r}")
        weights, biases = ckpt.blocks[name]
        if tuple(weights.shape) != block.weights.shape or biases.shape != block.biases.shape:
            raise PairingError(
                f"layer {name!r}: checkpoint shapes {tuple(weights.shape)}/{biases.shape} do not "
                f"match network {block.weights.shape}/{block.biases.shape}"
            )
        block.weights.data[...] = weights
        block.biases[...] = biases
    extra = set(ckpt.blocks) - set(params)
    if extra:
        raise PairingError(f"checkpoint has unknown layers: {', '.join(sorted(extra))}")

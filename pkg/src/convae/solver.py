"""SGD training loop with momentum, weight decay, and two LR policies.

The solver config mirrors the flat key=value text format used by the CLI
(base_lr, lr_policy, gamma, stepsize, momentum, weight_decay, max_iter,
batch_size, test_interval, snapshot_interval, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .data import DatasetHandle, batches
from .errors import ConfigError, SaturationAbort
from .layers import ParamBlock, sigmoid
from .losses import combined_backward
from .netspec import NetSpec
from .network import Network, init_params
from .tensor import Tensor

# Watchdog thresholds: a post-sigmoid output aborts training when the whole
# batch output is flat (max-min below FLATLINE_EPS) or every value is pinned
# within PINNED_EPS of 0 or 1, killing the gradient everywhere. The abort
# dump additionally marks any node whose pinned share exceeds
# SATURATED_SHARE as saturated.
FLATLINE_EPS = 1e-6
PINNED_EPS = 1e-6
SATURATED_SHARE = 0.5


@dataclass
class SolverConfig:
    base_lr: float
    max_iter: int
    lr_policy: str = "fixed"
    gamma: float = 0.1
    stepsize: int = 1000
    momentum: float = 0.0
    weight_decay: float = 0.0
    batch_size: int = 100
    test_interval: int = 500
    snapshot_interval: int = 1000
    seed: int = 1

    def __post_init__(self):
        if self.lr_policy not in ("fixed", "step"):
            raise ConfigError(f"unknown lr_policy {self.lr_policy!r}")
        if self.lr_policy == "step" and self.stepsize < 1:
            raise ConfigError("step policy requires stepsize >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0.0:
            raise ConfigError("weight_decay must be >= 0")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if self.batch_size < 1 or self.test_interval < 1 or self.snapshot_interval < 1:
            raise ConfigError("batch_size, test_interval and snapshot_interval must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in dc_fields(SolverConfig)}


def parse_solver_config(text: str, overrides: dict | None = None) -> SolverConfig:
    """Parse flat key=value lines ('#' comments allowed) into a SolverConfig."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"solver line {lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"solver line {lineno}: unknown key {key!r}")
        values[key] = val
    if overrides:
        values.update(overrides)
    kwargs: dict[str, object] = {}
    for key, val in values.items():
        if key == "lr_policy":
            kwargs[key] = str(val)
        elif key in ("base_lr", "gamma", "momentum", "weight_decay"):
            kwargs[key] = float(val)
        else:
            kwargs[key] = int(val)
    if "base_lr" not in kwargs or "max_iter" not in kwargs:
        raise ConfigError("solver config requires at least base_lr and max_iter")
    return SolverConfig(**kwargs)


def serialize_solver_config(cfg: SolverConfig) -> str:
    lines = []
    for f in dc_fields(SolverConfig):
        value = getattr(cfg, f.name)
        lines.append(f"{f.name}={value:g}" if isinstance(value, float) else f"{f.name}={value}")
    return "\n".join(lines) + "\n"


@dataclass
class TrainState:
    iteration: int
    params: dict[str, ParamBlock]
    history: list[tuple[int, str, float, float]] = field(default_factory=list)
    # history rows: (iter, split, sigmoid_cross_entropy, euclidean)


def lr_at(cfg: SolverConfig, iteration: int) -> float:
    """Learning rate for the given 0-based iteration index."""
    if cfg.lr_policy == "fixed":
        return cfg.base_lr
    return cfg.base_lr * cfg.gamma ** (iteration // cfg.stepsize)


def sgd_step(params: dict[str, ParamBlock], cfg: SolverConfig, lr: float) -> None:
    """One momentum/weight-decay update; clears gradients afterwards.

    v <- momentum * v + lr * (grad + weight_decay * theta); theta <- theta - v
    Aborts on the first non-finite gradient, naming the layer.
    """
    for name, block in params.items():
        if not np.isfinite(block.weight_grad.data).all() or not np.isfinite(block.bias_grad).all():
            raise SaturationAbort(name, "non-finite gradient detected")
        for theta, grad, vel in (
            (block.weights.data, block.weight_grad.data, block.weight_momentum.data),
            (block.biases, block.bias_grad, block.bias_momentum),
        ):
            vel *= cfg.momentum
            vel += lr * (grad + cfg.weight_decay * theta)
            theta -= vel
        block.clear_grads()


def _check_batch_saturation(trace, logits: Tensor) -> None:
    """Abort when a post-activation output (or the reconstruction) degenerates."""
    recon = ("reconstruction", Tensor(sigmoid(logits.data)))
    monitored = [(node.name, out) for node, out in trace if node.post_activation]
    monitored.append(recon)
    for name, out in monitored:
        y = out.data
        if y.size == 0:
            continue
        if not np.isfinite(y).all():
            raise SaturationAbort(name, "non-finite activation values")
        lo, hi = y.min(), y.max()
        if hi - lo < FLATLINE_EPS:
            raise SaturationAbort(name, f"output flatlined at {lo:.6g} across the whole batch")
        if np.minimum(y, 1.0 - y).max() < PINNED_EPS:
            raise SaturationAbort(name, "every output pinned at a sigmoid extreme")
    for node, out in trace:
        if not node.post_activation and not np.isfinite(out.data).all():
            raise SaturationAbort(node.name, "non-finite activation values")


def _dump_minmax(trace, logits: Tensor, path: Path, reason: str) -> None:
    lines = [f"saturation abort: {reason}", "per-layer output ranges (batch):"]
    entries = [(node.name, out, node.post_activation) for node, out in trace]
    entries.append(("reconstruction", Tensor(sigmoid(logits.data)), True))
    for name, out, post_act in entries:
        y = out.data
        if y.size == 0:
            lines.append(f"  {name}: empty")
            continue
        line = (f"  {name}: shape {'x'.join(str(d) for d in out.shape)} "
                f"[{y.min():.9g}, {y.max():.9g}] finite={bool(np.isfinite(y).all())}")
        if post_act and np.isfinite(y).all():
            share = float((np.minimum(y, 1.0 - y) < PINNED_EPS).mean())
            line += f" pinned={share:.1%}"
            if share >= SATURATED_SHARE:
                line += " saturated"
        lines.append(line)
    path.write_text("\n".join(lines) + "\n")


def evaluate(network: Network, handle: DatasetHandle, batch_size: int = 100) -> tuple[float, float]:
    """Average per-image losses over a split; deterministic for fixed params."""
    total = {"sigmoid_cross_entropy": 0.0, "euclidean": 0.0}
    count = 0
    step = min(batch_size, handle.count) if handle.count else batch_size
    for start in range(0, handle.count, step):
        batch = Tensor(handle.images.data[start:start + step])
        n = batch.shape[0]
        logits = network.output(batch)
        _, values, _ = combined_backward(logits, batch, network.spec.losses)
        total["sigmoid_cross_entropy"] += values["sigmoid_cross_entropy"] * n
        total["euclidean"] += values["euclidean"] * n
        count += n
    if count == 0:
        return 0.0, 0.0
    return total["sigmoid_cross_entropy"] / count, total["euclidean"] / count


def train(
    net: NetSpec,
    data: DatasetHandle,
    cfg: SolverConfig,
    test_data: DatasetHandle | None = None,
    out_dir: Path | str | None = None,
    checkpoint_stem: str = "checkpoint",
) -> TrainState:
    """Run SGD for cfg.max_iter iterations of unsupervised reconstruction.

    Writes periodic checkpoints and a loss-history CSV when ``out_dir`` is
    given. On a saturation/NaN abort the last periodic checkpoint is left in
    place and a per-layer min/max dump is written next to it.
    """
    rng = np.random.default_rng(cfg.seed)
    params = init_params(net, rng)
    network = Network(net, params)
    if not net.losses:
        raise ConfigError(f"net {net.name!r} declares no losses; nothing to train")
    state = TrainState(iteration=0, params=params)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    stream = batches(data, cfg.batch_size, cfg.seed)
    for it in range(cfg.max_iter):
        batch, target = next(stream)
        lr = lr_at(cfg, it)
        total, values, trace = network.forward_backward(batch, target)
        logits = trace[-1][1]
        try:
            if not math.isfinite(total):
                raise SaturationAbort(network.nodes[-1].name, f"non-finite training loss {total!r}")
            _check_batch_saturation(trace, logits)
            sgd_step(params, cfg, lr)
        except SaturationAbort as abort:
            report = None
            if out_path is not None:
                report = out_path / "saturation_report.txt"
                _dump_minmax(trace, logits, report, str(abort))
            raise SaturationAbort(abort.layer, abort.reason, report_path=report) from None
        state.iteration = it + 1
        state.history.append(
            (state.iteration, "train", values["sigmoid_cross_entropy"], values["euclidean"])
        )
        if test_data is not None and state.iteration % cfg.test_interval == 0:
            sce, eu = evaluate(network, test_data, cfg.batch_size)
            state.history.append((state.iteration, "test", sce, eu))
        if out_path is not None and state.iteration % cfg.snapshot_interval == 0:
            save_checkpoint(out_path / f"{checkpoint_stem}_iter{state.iteration}.caef",
                            net.name, state.iteration, params)
    if out_path is not None:
        save_checkpoint(out_path / f"{checkpoint_stem}_final.caef", net.name, state.iteration, params)
        write_history_csv(out_path / "loss_history.csv", state.history)
    return state


def write_history_csv(path, history) -> None:
    lines = ["iter,split,sce,euclidean"]
    for it, split, sce, eu in history:
        lines.append(f"{it},{split},{sce:.9g},{eu:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


def smoothed_total(history, at_iter: int, window: int = 100, weights=(1.0, 1.0)) -> float:
    """Trailing moving average of the weighted train total loss at ``at_iter``."""
    rows = [(it, sce, eu) for it, split, sce, eu in history if split == "train" and it <= at_iter]
    rows = rows[-window:]
    if not rows:
        raise ConfigError(f"no train history at or before iteration {at_iter}")
    return sum(weights[0] * sce + weights[1] * eu for _, sce, eu in rows) / len(rows)

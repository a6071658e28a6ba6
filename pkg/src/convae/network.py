"""Executable network: a parsed description bound to parameter blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers as L
from .errors import ConfigError
from .fillers import fill
from .layers import ParamBlock, make_param_block
from .netspec import NetSpec, find_latent, infer_shapes
from .losses import combined_backward
from .tensor import Tensor


@dataclass
class Node:
    """One computation step: a declared layer or an attached activation."""

    name: str
    kind: str  # conv | deconv | fc | reshape | sigmoid
    layer_name: str  # declared layer this node belongs to
    post_activation: bool


def build_nodes(net: NetSpec) -> list[Node]:
    nodes = []
    for lay in net.layers:
        nodes.append(Node(lay.name, lay.kind, lay.name, post_activation=(lay.kind == "sigmoid")))
        if lay.activation == "sigmoid":
            nodes.append(Node(f"{lay.name}_sigmoid", "sigmoid", lay.name, post_activation=True))
    return nodes


def init_params(net: NetSpec, rng: np.random.Generator) -> dict[str, ParamBlock]:
    """Allocate and fill one ParamBlock per parameterized layer, in order."""
    infer_shapes(net)
    params: dict[str, ParamBlock] = {}
    for lay in net.layers:
        if not lay.has_params:
            continue
        block = make_param_block(
            lay.name, lay.kind, net.shape_of(lay.bottom), lay.num_output, lay.kernel
        )
        fill(block, lay.weight_filler, rng, target="weights")
        fill(block, lay.bias_filler, rng, target="biases")
        params[lay.name] = block
    return params


class Network:
    """Forward/backward execution of a single-chain network."""

    def __init__(self, net: NetSpec, params: dict[str, ParamBlock]):
        infer_shapes(net)
        self.spec = net
        self.params = params
        self.nodes = build_nodes(net)
        missing = [lay.name for lay in net.layers if lay.has_params and lay.name not in params]
        if missing:
            raise ConfigError(f"missing parameter blocks for layers: {', '.join(missing)}")
        last = net.layers[-1].name if net.layers else None
        for spec in net.losses:
            if spec.pred_layer != last:
                raise ConfigError(
                    f"loss {spec.name!r} attaches to {spec.pred_layer!r}; only the chain "
                    f"output {last!r} can carry losses"
                )
        self.latent_node = self._find_latent_node()

    def _find_latent_node(self) -> str | None:
        try:
            latent = find_latent(self.spec)
        except Exception:
            return None
        # the latent code is what feeds the decoder: the activation output
        # when the latent layer carries one, the raw layer output otherwise
        if latent.activation == "sigmoid":
            return f"{latent.name}_sigmoid"
        return latent.name

    def forward(self, x: Tensor) -> list[tuple[Node, Tensor]]:
        """Run the chain, returning every node's output in forward order."""
        outputs: list[tuple[Node, Tensor]] = []
        cur = x
        for node in self.nodes:
            lay = self.spec.layer(node.layer_name)
            if node.kind == "conv":
                cur = L.conv_forward(cur, self.params[node.layer_name])
            elif node.kind == "deconv":
                cur = L.deconv_forward(cur, self.params[node.layer_name])
            elif node.kind == "fc":
                cur = L.fc_forward(cur, self.params[node.layer_name])
            elif node.kind == "reshape":
                cur = L.reshape_forward(cur, lay.reshape_dims)
            else:
                cur = L.sigmoid_forward(cur)
            outputs.append((node, cur))
        return outputs

    def output(self, x: Tensor) -> Tensor:
        return self.forward(x)[-1][1]

    @property
    def latent_width(self) -> int:
        if self.latent_node is None:
            raise ConfigError(f"net {self.spec.name!r} has no latent fc layer")
        return find_latent(self.spec).num_output

    def latent_codes(self, x: Tensor) -> Tensor:
        if self.latent_node is None:
            raise ConfigError(f"net {self.spec.name!r} has no latent fc layer")
        for node, out in self.forward(x):
            if node.name == self.latent_node:
                return out
        raise ConfigError(f"latent node {self.latent_node!r} not reached")

    def forward_backward(self, batch: Tensor, target: Tensor):
        """One gradient accumulation pass; returns (total, per-kind values, trace).

        The trace is the list of (node, output) pairs from the forward pass,
        kept so callers can run saturation checks without a second pass.
        """
        trace = self.forward(batch)
        logits = trace[-1][1]
        total, values, grad = combined_backward(logits, target, self.spec.losses)
        self.backward(batch, trace, grad)
        return total, values, trace

    def backward(self, batch: Tensor, trace, grad: Tensor) -> None:
        """Propagate ``grad`` from the chain output back to the input."""
        dy = grad
        for i in range(len(self.nodes) - 1, -1, -1):
            node, out = trace[i]
            node_in = trace[i - 1][1] if i > 0 else batch
            need_dx = i > 0  # the input itself never needs a gradient
            if node.kind == "sigmoid":
                dy = L.sigmoid_backward(out, dy)
            elif node.kind == "reshape":
                dy = L.reshape_backward(dy, node_in.shape)
            elif node.kind == "conv":
                dy = L.conv_backward(node_in, self.params[node.layer_name], dy, need_dx)
            elif node.kind == "deconv":
                dy = L.deconv_backward(node_in, self.params[node.layer_name], dy, need_dx)
            else:
                dy = L.fc_backward(node_in, self.params[node.layer_name], dy, need_dx)

    def clear_grads(self) -> None:
        for block in self.params.values():
            block.clear_grads()

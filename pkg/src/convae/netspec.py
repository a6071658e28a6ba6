"""Network description language: parsing, shape inference, architecture audit.

Grammar (line oriented, ``#`` starts a comment, blank lines ignored)::

    file    := header line*
    header  := "net" NAME "input" "[" INT "," INT "," INT "," INT "]"
    line    := "layer" NAME KIND field*  |  "loss" NAME LOSSKIND field*
    KIND    := "conv" | "deconv" | "fc" | "reshape" | "sigmoid"
    field   := IDENT "=" value           # kernel=9  out=4  bottom=conv1
    filler  := "xavier" | "constant" | "gaussian(std=FLOAT,sparse=INT)"

Layers form a single chain: each ``bottom`` must name the previous layer
(or ``input`` for the first). Loss lines attach to a predicting layer and
the reserved target name ``input``. ``stride`` and ``pad`` fields are
accepted syntactically but only stride 1 / pad 0 pass validation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import AuditError, GeometryError, NetspecError
from .fillers import FillerSpec
from .losses import LOSS_KINDS, LossSpec

LAYER_KINDS = ("conv", "deconv", "fc", "reshape", "sigmoid")
INPUT_NAME = "input"

# Relative imbalance tolerated between encoder and decoder element totals.
SYMMETRY_TOLERANCE = 0.05


@dataclass
class LayerSpec:
    name: str
    kind: str
    bottom: str
    kernel: int | None = None
    num_output: int | None = None
    reshape_dims: tuple[int, int, int, int] | None = None
    weight_filler: FillerSpec = field(default_factory=lambda: FillerSpec("xavier"))
    bias_filler: FillerSpec = field(default_factory=lambda: FillerSpec("constant"))
    activation: str = "none"

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv", "deconv", "fc")


@dataclass
class NetSpec:
    name: str
    input_shape: tuple[int, int, int, int]
    layers: list[LayerSpec]
    losses: list[LossSpec]
    inferred_shapes: dict[str, tuple[int, int, int, int]] | None = field(
        default=None, compare=False
    )

    def layer(self, name: str) -> LayerSpec:
        for lay in self.layers:
            if lay.name == name:
                return lay
        raise KeyError(name)

    def shape_of(self, name: str) -> tuple[int, int, int, int]:
        if self.inferred_shapes is None:
            raise AuditError("shapes not inferred yet; call infer_shapes first")
        return self.inferred_shapes[name]


@dataclass
class AuditReport:
    net_name: str
    per_layer: list[tuple[str, int, int]]  # (name, weight_count, bias_count)
    encoder_total: int
    decoder_total: int
    grand_total: int
    cae_size: int
    symmetric: bool
    symmetry_notes: list[str]
    latent_layer: str
    data_ratio: str | None = None


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#.*)
      | (?P<number>[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>[\[\](),=])
    """,
    re.VERBOSE,
)


def _tokenize_line(text: str, lineno: int):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise NetspecError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        pos = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        tokens.append((kind, m.group(), lineno, m.start() + 1))
    return tokens


class _LineParser:
    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def error(self, message):
        col = self.tokens[self.pos][3] if self.pos < len(self.tokens) else (
            self.tokens[-1][3] if self.tokens else 1
        )
        raise NetspecError(message, self.lineno, col)

    def take(self, kind=None, text=None, what=None):
        tok = self.peek()
        if tok is None:
            raise NetspecError(f"unexpected end of line, expected {what or text or kind}", self.lineno)
        if (kind and tok[0] != kind) or (text and tok[1] != text):
            self.error(f"expected {what or text or kind}, got {tok[1]!r}")
        self.pos += 1
        return tok

    def take_ident(self, what="identifier"):
        return self.take("ident", what=what)[1]

    def take_int(self, what="integer"):
        tok = self.take("number", what=what)
        try:
            return int(tok[1])
        except ValueError:
            raise NetspecError(f"expected {what}, got {tok[1]!r}", self.lineno, tok[3])

    def parse_value(self):
        """number | identifier | identifier(k=v, ...) | [int, int, ...]"""
        tok = self.peek()
        if tok is None:
            raise NetspecError("missing value after '='", self.lineno)
        if tok[0] == "number":
            self.pos += 1
            text = tok[1]
            return float(text) if ("." in text or "e" in text or "E" in text) else int(text)
        if tok[0] == "ident":
            self.pos += 1
            nxt = self.peek()
            if nxt and nxt[0] == "punct" and nxt[1] == "(":
                self.pos += 1
                kwargs = {}
                while True:
                    key = self.take_ident("argument name")
                    self.take("punct", "=")
                    val = self.parse_value()
                    kwargs[key] = val
                    sep = self.take("punct", what="',' or ')'")
                    if sep[1] == ")":
                        break
                    if sep[1] != ",":
                        self.error("expected ',' or ')'")
                return ("call", tok[1], kwargs)
            return tok[1]
        if tok[0] == "punct" and tok[1] == "[":
            self.pos += 1
            items = [self.take_int()]
            while True:
                sep = self.take("punct", what="',' or ']'")
                if sep[1] == "]":
                    break
                if sep[1] != ",":
                    self.error("expected ',' or ']'")
                items.append(self.take_int())
            return items
        self.error(f"cannot parse value starting at {tok[1]!r}")

    def parse_fields(self):
        fields = {}
        order = []
        while not self.done():
            key_tok = self.take("ident", what="field name")
            key = key_tok[1]
            if key in fields:
                raise NetspecError(f"duplicate field {key!r}", self.lineno, key_tok[3])
            self.take("punct", "=")
            fields[key] = (self.parse_value(), key_tok[3])
            order.append(key)
        return fields


# --- field interpretation -----------------------------------------------------

def _as_filler(value, lineno, col) -> FillerSpec:
    if value == "xavier":
        return FillerSpec("xavier")
    if value == "constant":
        return FillerSpec("constant", value=0.0)
    if isinstance(value, tuple) and value[0] == "call" and value[1] == "gaussian":
        kwargs = value[2]
        extra = set(kwargs) - {"std", "sparse"}
        if extra or set(kwargs) != {"std", "sparse"}:
            raise NetspecError("gaussian filler takes exactly std=FLOAT, sparse=INT", lineno, col)
        return FillerSpec("gaussian_sparse", std=float(kwargs["std"]), sparse=int(kwargs["sparse"]))
    raise NetspecError(f"unknown filler {value!r}", lineno, col)


_LAYER_FIELDS = {
    "conv": {"bottom", "kernel", "out", "stride", "pad", "weights", "bias", "activation"},
    "deconv": {"bottom", "kernel", "out", "stride", "pad", "weights", "bias", "activation"},
    "fc": {"bottom", "out", "weights", "bias", "activation"},
    "reshape": {"bottom", "dims"},
    "sigmoid": {"bottom"},
}
_REQUIRED_FIELDS = {
    "conv": ("bottom", "kernel", "out"),
    "deconv": ("bottom", "kernel", "out"),
    "fc": ("bottom", "out"),
    "reshape": ("bottom", "dims"),
    "sigmoid": ("bottom",),
}


def _parse_layer_line(lp: _LineParser, existing_names: set[str], prev_name: str) -> LayerSpec:
    name_tok = lp.take("ident", what="layer name")
    name = name_tok[1]
    if name == INPUT_NAME:
        raise NetspecError(f"{INPUT_NAME!r} is reserved and cannot name a layer", lp.lineno, name_tok[3])
    if name in existing_names:
        raise NetspecError(f"duplicate layer name {name!r}", lp.lineno, name_tok[3])
    kind_tok = lp.take("ident", what="layer kind")
    kind = kind_tok[1]
    if kind not in LAYER_KINDS:
        raise NetspecError(f"unknown layer kind {kind!r}", lp.lineno, kind_tok[3])
    fields = lp.parse_fields()

    for key, (_, col) in fields.items():
        if key not in _LAYER_FIELDS[kind]:
            raise NetspecError(f"field {key!r} is not valid for a {kind} layer", lp.lineno, col)
    for key in _REQUIRED_FIELDS[kind]:
        if key not in fields:
            raise NetspecError(f"layer {name!r} ({kind}) is missing required field {key!r}", lp.lineno)

    def _get(key, default=None):
        return fields[key][0] if key in fields else default

    def _col(key):
        return fields[key][1]

    bottom = _get("bottom")
    if not isinstance(bottom, str):
        raise NetspecError("bottom must name a layer", lp.lineno, _col("bottom"))
    if bottom != prev_name:
        if bottom in existing_names or bottom == INPUT_NAME:
            raise NetspecError(
                f"layer {name!r} must chain from the previous layer {prev_name!r}, not {bottom!r}",
                lp.lineno, _col("bottom"),
            )
        raise NetspecError(f"bottom {bottom!r} does not reference a declared layer", lp.lineno, _col("bottom"))

    spec = LayerSpec(name=name, kind=kind, bottom=bottom)

    if kind in ("conv", "deconv"):
        kernel = _get("kernel")
        if not isinstance(kernel, int) or kernel < 1:
            raise NetspecError("kernel must be a positive integer", lp.lineno, _col("kernel"))
        spec.kernel = kernel
        stride = _get("stride", 1)
        if stride != 1:
            raise NetspecError("only stride=1 is supported", lp.lineno, _col("stride"))
        pad = _get("pad", 0)
        if pad != 0:
            raise NetspecError("only pad=0 is supported", lp.lineno, _col("pad"))
    if kind in ("conv", "deconv", "fc"):
        out = _get("out")
        if not isinstance(out, int) or out < 1:
            raise NetspecError("out must be a positive integer", lp.lineno)
        spec.num_output = out
        if "weights" in fields:
            spec.weight_filler = _as_filler(_get("weights"), lp.lineno, _col("weights"))
        if "bias" in fields:
            spec.bias_filler = _as_filler(_get("bias"), lp.lineno, _col("bias"))
        activation = _get("activation", "none")
        if activation not in ("sigmoid", "none"):
            raise NetspecError(f"unknown activation {activation!r}", lp.lineno, _col("activation"))
        spec.activation = activation
    if kind == "reshape":
        dims = _get("dims")
        if not (isinstance(dims, list) and len(dims) == 4 and all(isinstance(d, int) and d >= 0 for d in dims)):
            raise NetspecError("dims must be a bracket list of 4 non-negative integers", lp.lineno, _col("dims"))
        spec.reshape_dims = tuple(dims)
    return spec


def _parse_loss_line(lp: _LineParser, layer_names: set[str], loss_names: set[str]) -> LossSpec:
    name_tok = lp.take("ident", what="loss name")
    name = name_tok[1]
    if name in loss_names or name in layer_names:
        raise NetspecError(f"duplicate name {name!r}", lp.lineno, name_tok[3])
    kind_tok = lp.take("ident", what="loss kind")
    kind = kind_tok[1]
    if kind not in LOSS_KINDS:
        raise NetspecError(f"unknown loss kind {kind!r}", lp.lineno, kind_tok[3])
    fields = lp.parse_fields()
    allowed = {"pred", "target", "weight"} | ({"sigmoid_pred"} if kind == "euclidean" else set())
    for key, (_, col) in fields.items():
        if key not in allowed:
            raise NetspecError(f"field {key!r} is not valid for a {kind} loss", lp.lineno, col)
    for key in ("pred", "target"):
        if key not in fields:
            raise NetspecError(f"loss {name!r} is missing required field {key!r}", lp.lineno)
    pred, pred_col = fields["pred"]
    if pred not in layer_names:
        raise NetspecError(f"loss {name!r} references unknown layer {pred!r}", lp.lineno, pred_col)
    target, target_col = fields["target"]
    if target != INPUT_NAME:
        raise NetspecError(f"loss target must be the reserved name {INPUT_NAME!r}", lp.lineno, target_col)
    weight = 1.0
    if "weight" in fields:
        raw, col = fields["weight"]
        if not isinstance(raw, (int, float)) or raw <= 0:
            raise NetspecError("loss weight must be > 0", lp.lineno, col)
        weight = float(raw)
    apply_sigmoid = False
    if "sigmoid_pred" in fields:
        raw, col = fields["sigmoid_pred"]
        if raw not in ("true", "false"):
            raise NetspecError("sigmoid_pred must be true or false", lp.lineno, col)
        apply_sigmoid = raw == "true"
    return LossSpec(name=name, kind=kind, pred_layer=pred, apply_sigmoid_to_pred=apply_sigmoid, weight=weight)


def parse_netspec(text: str) -> NetSpec:
    """Parse a network description; raises NetspecError with line/column."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(raw, lineno)
        if tokens:
            lines.append((lineno, tokens))
    if not lines:
        raise NetspecError("empty network description: missing 'net' header", 1, 1)

    lineno, tokens = lines[0]
    lp = _LineParser(tokens, lineno)
    lp.take("ident", "net", what="'net' header")
    net_name = lp.take_ident("net name")
    lp.take("ident", INPUT_NAME, what="'input'")
    lp.take("punct", "[")
    dims = [lp.take_int("input dimension")]
    for _ in range(3):
        lp.take("punct", ",")
        dims.append(lp.take_int("input dimension"))
    lp.take("punct", "]")
    if not lp.done():
        lp.error("unexpected trailing tokens after header")
    if any(d < 0 for d in dims):
        raise NetspecError("input dimensions must be non-negative", lineno)

    layers: list[LayerSpec] = []
    losses: list[LossSpec] = []
    names: set[str] = set()
    loss_names: set[str] = set()
    prev = INPUT_NAME
    for lineno, tokens in lines[1:]:
        lp = _LineParser(tokens, lineno)
        head = lp.take("ident", what="'layer' or 'loss'")
        if head[1] == "layer":
            if losses:
                raise NetspecError("layer lines must precede loss lines", lineno, head[3])
            spec = _parse_layer_line(lp, names, prev)
            layers.append(spec)
            names.add(spec.name)
            prev = spec.name
        elif head[1] == "loss":
            loss = _parse_loss_line(lp, names, loss_names)
            losses.append(loss)
            loss_names.add(loss.name)
        else:
            raise NetspecError(f"expected 'layer' or 'loss', got {head[1]!r}", lineno, head[3])
    return NetSpec(name=net_name, input_shape=tuple(dims), layers=layers, losses=losses)


def _format_filler(spec: FillerSpec) -> str:
    if spec.kind == "xavier":
        return "xavier"
    if spec.kind == "constant":
        return "constant"
    return f"gaussian(std={spec.std:g},sparse={spec.sparse})"


def serialize_netspec(net: NetSpec) -> str:
    """Render a NetSpec back to description text (parse/serialize round-trips)."""
    out = [f"net {net.name} input [{','.join(str(d) for d in net.input_shape)}]"]
    for lay in net.layers:
        parts = [f"layer {lay.name} {lay.kind}", f"bottom={lay.bottom}"]
        if lay.kind in ("conv", "deconv"):
            parts.append(f"kernel={lay.kernel}")
        if lay.has_params:
            parts.append(f"out={lay.num_output}")
        if lay.kind == "reshape":
            parts.append(f"dims=[{','.join(str(d) for d in lay.reshape_dims)}]")
        if lay.has_params:
            parts.append(f"weights={_format_filler(lay.weight_filler)}")
            parts.append(f"bias={_format_filler(lay.bias_filler)}")
            if lay.activation != "none":
                parts.append(f"activation={lay.activation}")
        out.append(" ".join(parts))
    for loss in net.losses:
        parts = [f"loss {loss.name} {loss.kind}", f"pred={loss.pred_layer}", f"target={INPUT_NAME}"]
        if loss.kind == "euclidean" and loss.apply_sigmoid_to_pred:
            parts.append("sigmoid_pred=true")
        parts.append(f"weight={loss.weight:g}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


# --- shape inference ----------------------------------------------------------

def infer_shapes(net: NetSpec) -> NetSpec:
    """Annotate every layer with its output shape; raises GeometryError."""
    if any(d <= 0 for d in net.input_shape):
        raise GeometryError(f"input shape {net.input_shape} must be fully positive")
    shapes = {INPUT_NAME: net.input_shape}
    cur = net.input_shape
    for lay in net.layers:
        n, c, h, w = cur
        if lay.kind == "conv":
            k = lay.kernel
            if h < k or w < k:
                raise GeometryError(f"{lay.name}: kernel {k} larger than input {h}x{w}")
            cur = (n, lay.num_output, h - k + 1, w - k + 1)
        elif lay.kind == "deconv":
            k = lay.kernel
            cur = (n, lay.num_output, h + k - 1, w + k - 1)
        elif lay.kind == "fc":
            cur = (n, lay.num_output, 1, 1)
        elif lay.kind == "reshape":
            resolved = tuple(
                cur[i] if lay.reshape_dims[i] == 0 else lay.reshape_dims[i] for i in range(4)
            )
            if _prod(resolved) != _prod(cur):
                raise GeometryError(
                    f"{lay.name}: reshape {lay.reshape_dims} maps {cur} to {resolved}, element counts differ"
                )
            cur = resolved
        else:  # sigmoid
            pass
        shapes[lay.name] = cur
    net.inferred_shapes = shapes
    return net


def _prod(shape) -> int:
    total = 1
    for d in shape:
        total *= int(d)
    return total


def _elements_per_sample(shape) -> int:
    return _prod(shape[1:])


# --- audit ---------------------------------------------------------------------

def _require_shapes(net: NetSpec):
    if net.inferred_shapes is None:
        raise AuditError("shapes not inferred yet; call infer_shapes first")


def find_latent(net: NetSpec) -> LayerSpec:
    """The unique narrowest fc layer; ties are an error, absence too."""
    fcs = [lay for lay in net.layers if lay.kind == "fc"]
    if not fcs:
        raise AuditError(f"net {net.name!r} has no fc layer to serve as the latent code")
    smallest = min(lay.num_output for lay in fcs)
    hits = [lay for lay in fcs if lay.num_output == smallest]
    if len(hits) > 1:
        names = ", ".join(lay.name for lay in hits)
        raise AuditError(
            f"ambiguous latent layer: fc layers {names} tie at width {smallest}; "
            "give the latent layer a strictly smaller width or rename the chain"
        )
    return hits[0]


def _layer_param_counts(net: NetSpec, lay: LayerSpec) -> tuple[int, int]:
    if not lay.has_params:
        return 0, 0
    bottom_shape = net.shape_of(lay.bottom)
    _, c_in, h, w = bottom_shape
    if lay.kind in ("conv", "deconv"):
        return lay.kernel * lay.kernel * c_in * lay.num_output, lay.num_output
    return c_in * h * w * lay.num_output, lay.num_output


def count_params(net: NetSpec) -> AuditReport:
    """Exact closed-form parameter audit, split at the latent layer."""
    _require_shapes(net)
    latent = find_latent(net)
    per_layer = []
    encoder_total = decoder_total = 0
    in_encoder = True
    for lay in net.layers:
        wct, bct = _layer_param_counts(net, lay)
        per_layer.append((lay.name, wct, bct))
        if in_encoder:
            encoder_total += wct + bct
        else:
            decoder_total += wct + bct
        if lay.name == latent.name:
            in_encoder = False
    symmetric, notes = check_symmetry(net)
    return AuditReport(
        net_name=net.name,
        per_layer=per_layer,
        encoder_total=encoder_total,
        decoder_total=decoder_total,
        grand_total=encoder_total + decoder_total,
        cae_size=cae_size(net),
        symmetric=symmetric,
        symmetry_notes=notes,
        latent_layer=latent.name,
    )


def _hidden_data_layers(net: NetSpec) -> list[LayerSpec]:
    """conv/deconv/fc layers excluding the final reconstruction layer."""
    data_layers = [lay for lay in net.layers if lay.has_params]
    return data_layers[:-1] if data_layers else []


def cae_size(net: NetSpec) -> int:
    """Total per-sample elements across hidden feature maps and hidden units.

    The input, the final reconstruction layer, and pure relabels
    (reshape/sigmoid layers) are not counted; the latent layer is.
    """
    _require_shapes(net)
    return sum(_elements_per_sample(net.shape_of(lay.name)) for lay in _hidden_data_layers(net))


def check_symmetry(net: NetSpec) -> tuple[bool, list[str]]:
    """Encoder/decoder element balance within tolerance plus monotone sizes.

    Violations come back as report lines, never exceptions.
    """
    _require_shapes(net)
    notes: list[str] = []
    try:
        latent = find_latent(net)
    except AuditError as exc:
        return False, [str(exc)]
    hidden = _hidden_data_layers(net)
    idx = next(i for i, lay in enumerate(hidden) if lay.name == latent.name)
    enc = [_elements_per_sample(net.shape_of(lay.name)) for lay in hidden[:idx]]
    dec = [_elements_per_sample(net.shape_of(lay.name)) for lay in hidden[idx + 1:]]
    latent_elems = _elements_per_sample(net.shape_of(latent.name))

    enc_total, dec_total = sum(enc), sum(dec)
    if max(enc_total, dec_total) > 0:
        rel = abs(enc_total - dec_total) / max(enc_total, dec_total)
        if rel > SYMMETRY_TOLERANCE:
            notes.append(
                f"encoder/decoder element totals differ by {rel:.1%}: {enc_total} vs {dec_total}"
            )
    enc_seq = enc + [latent_elems]
    for a, b in zip(enc_seq, enc_seq[1:]):
        if b > a:
            notes.append(f"encoder element counts increase from {a} to {b}")
            break
    dec_seq = [latent_elems] + dec
    for a, b in zip(dec_seq, dec_seq[1:]):
        if b < a:
            notes.append(f"decoder element counts decrease from {a} to {b}")
            break
    return not notes, notes


def data_ratio(dataset_elements: int, report: AuditReport) -> str:
    """Dataset elements per trainable parameter, rendered "R/1"."""
    if dataset_elements <= 0:
        raise AuditError("dataset element count must be positive")
    if report.grand_total <= 0:
        raise AuditError(f"net {report.net_name!r} has no trainable parameters to divide by")
    ratio = round(dataset_elements / report.grand_total)
    rendered = f"{ratio}/1"
    report.data_ratio = rendered
    return rendered

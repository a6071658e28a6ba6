"""convae: a self-contained convolutional-autoencoder training engine.

Dense rank-4 tensors, a line-oriented network description language with an
exact parameter audit, hand-derived conv/deconv/fc gradients (compiled
kernels with a numpy fallback), a dual reconstruction objective, SGD with
momentum/weight decay, raw IDX ingestion, and per-layer inspection tools.
"""

from .tensor import Tensor, dot, zeros
from .errors import (
    AuditError,
    ConfigError,
    ConvaeError,
    DomainError,
    GeometryError,
    IngestionError,
    NetspecError,
    PairingError,
    SaturationAbort,
    ShapeError,
    SizeOverflowError,
)
from .fillers import FillerSpec, fill
from .layers import (
    ParamBlock,
    conv_backward,
    conv_forward,
    deconv_backward,
    deconv_forward,
    fc_backward,
    fc_forward,
    make_param_block,
    reshape_backward,
    reshape_forward,
    sigmoid_backward,
    sigmoid_forward,
)
from .losses import LossSpec, combined_backward, euclidean_loss, sce_loss
from .netspec import (
    AuditReport,
    LayerSpec,
    NetSpec,
    cae_size,
    check_symmetry,
    count_params,
    data_ratio,
    find_latent,
    infer_shapes,
    parse_netspec,
    serialize_netspec,
)
from .network import Network, init_params
from .data import DatasetHandle, batches, epoch_batches, load_idx
from .checkpoint import Checkpoint, apply_checkpoint, load_checkpoint, save_checkpoint
from .solver import (
    SolverConfig,
    TrainState,
    evaluate,
    lr_at,
    parse_solver_config,
    sgd_step,
    train,
)
from .inspector import (
    LayerTrace,
    export_latent,
    render_grid,
    saturation_report,
    trace_all,
)
from .kernels import available_backends, backend_name

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

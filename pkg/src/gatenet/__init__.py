"""Training and compilation toolkit for logic-gate and lookup-table networks."""

__version__ = "0.1.0"

from .logic import (
    gate_eval,
    gate_superposition,
    gate_superposition_backward,
    lut_forward,
    lut_forward_backward,
    selector_matrix,
)
from .metrics import confusion, j_index, jk_index, kappa
from .network import (
    HardNetwork,
    NetworkConfig,
    SoftNetwork,
    build_network,
    discretize,
    forward_hard,
    forward_soft,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .rate import encode_stream, infer_rate, rate_sweep

__all__ = [
    "HardNetwork", "NetworkConfig", "SoftNetwork", "build_network", "confusion",
    "discretize", "encode_stream", "forward_hard", "forward_soft",
    "gate_eval", "gate_superposition", "gate_superposition_backward",
    "infer_rate", "j_index", "jk_index", "kappa", "load_checkpoint",
    "lut_forward", "lut_forward_backward", "rate_sweep", "save_checkpoint",
    "selector_matrix", "train",
]

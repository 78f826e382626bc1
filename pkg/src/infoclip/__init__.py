"""Matrix-based Renyi information measures, information-bottleneck and
mutual-information distillation losses, and a learnable pixel-text
alignment module, with a synthetic teacher-student benchmark."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    FormatError,
    InfoClipError,
    InputError,
    UnsupportedError,
)
from .tensor import SpectralResult, frobenius_sq, hadamard, max_asymmetry, sym_eigenvalues, trace_normalize
from .measures import (
    EntropySpec,
    gram_from_features,
    joint_entropy,
    mutual_information,
    renyi_entropy,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    compression_loss,
    distillation_loss,
    finite_diff_oracle,
    loss_gradients,
    total_loss,
)
from .lpam import LpamParams, layer_norm
from .bench import TrainConfig, evaluate, generate_scene, task_loss, train_distill
from .tensorfile import read_tensor, write_tensor

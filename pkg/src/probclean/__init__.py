"""probclean: autoencoder-based cleaning for probabilistic tabular data."""

from .backends import available_backends, backend_name
from .data import (
    CATEGORICAL,
    CONTINUOUS,
    AttributeSpec,
    Dataset,
    Pmf,
    Record,
    Schema,
    devectorize,
    lift_crisp_table,
    one_hot,
    vectorize,
)
from .losses import jsd, record_loss
from .metrics import EvalReport, dataset_jsd, dataset_rescaled_mse, evaluate, flip_confusion, quality_improvement
from .network import (
    CHANNEL_ACTIVATIONS,
    DcaeArchitecture,
    DcaeParams,
    adam_step,
    backward,
    clean,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .noise import NoiseConfig, add_gaussian_noise, add_missing_entries, corrupt
from .quantize import BinningRule, choose_bin_count, expected_value, pmf_from_cdf, pmf_from_value, uniform_bins
from .synth import ChainSpec, generate_ground_truth, sample_chain
from .train import SemiSupSplit, TrainConfig, make_split, train_semi_supervised, train_unsupervised

__version__ = "0.1.0"

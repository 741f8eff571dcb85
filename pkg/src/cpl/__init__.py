"""Ordinal classification with layout-constrained class proxies.

The library trains a small feature extractor against per-class proxy vectors
whose geometry is either forced by construction (collinear or semicircular
layouts) or nudged by a unimodality penalty (free layout with smoothed
targets).  See the README for the full tour; the usual entry points are
``ProblemSpec``/``init_model``, the ``train``/``evaluate`` pair, and the
dataset helpers.
"""

from .config import RunConfig, load_run_config
from .data import (
    LabeledDataset,
    SplitSpec,
    gen_synthetic_linear,
    gen_synthetic_ring,
    load_csv,
    split,
    write_csv,
)
from .distributions import (
    CategoricalDistribution,
    Smoothing,
    assignment_distribution,
    proxy_distribution,
    total_variation,
    uniform_distribution,
    unimodal_target,
)
from .errors import (
    ConfigurationError,
    CplError,
    DataError,
    DegeneratePlaneError,
    DegenerateVectorError,
    NumericError,
)
from .geometry import (
    FreeLayout,
    LinearLayout,
    SemicircularLayout,
    Similarity,
    gen_free_proxies,
    gen_linear_proxies,
    gen_semicircular_proxies,
    grad_similarity,
    sim_cosine,
    sim_euclidean_t,
    sim_neg_euclidean,
)
from .losses import (
    LossConfig,
    LossOutput,
    batch_loss,
    kl_basic,
    loss_basic,
    loss_total,
    loss_unimodal,
)
from .experiments import (
    predict_features,
    run_ablate,
    run_eval,
    run_sweep,
    run_training,
    run_viz,
)
from .model import (
    CplModel,
    FeatureExtractor,
    ProblemSpec,
    extract,
    init_model,
    load_checkpoint,
    predict_rank,
    save_checkpoint,
)
from .svgplot import scatter_svg
from .training import Metrics, TrainConfig, adamw_step, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "CategoricalDistribution",
    "ConfigurationError",
    "CplError",
    "CplModel",
    "DataError",
    "DegeneratePlaneError",
    "DegenerateVectorError",
    "FeatureExtractor",
    "FreeLayout",
    "LabeledDataset",
    "LinearLayout",
    "LossConfig",
    "LossOutput",
    "Metrics",
    "NumericError",
    "ProblemSpec",
    "RunConfig",
    "SemicircularLayout",
    "Similarity",
    "Smoothing",
    "SplitSpec",
    "TrainConfig",
    "adamw_step",
    "assignment_distribution",
    "batch_loss",
    "evaluate",
    "extract",
    "gen_free_proxies",
    "gen_linear_proxies",
    "gen_semicircular_proxies",
    "gen_synthetic_linear",
    "gen_synthetic_ring",
    "grad_similarity",
    "init_model",
    "kl_basic",
    "load_checkpoint",
    "load_csv",
    "load_run_config",
    "loss_basic",
    "loss_total",
    "loss_unimodal",
    "predict_features",
    "predict_rank",
    "proxy_distribution",
    "run_ablate",
    "run_eval",
    "run_sweep",
    "run_training",
    "run_viz",
    "save_checkpoint",
    "scatter_svg",
    "sim_cosine",
    "sim_euclidean_t",
    "sim_neg_euclidean",
    "split",
    "total_variation",
    "train",
    "uniform_distribution",
    "unimodal_target",
    "write_csv",
]

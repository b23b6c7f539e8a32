"""Differentiable joint histograms of pairwise distances and similarities."""

from chloss.errors import DomainError
from chloss.histogram import (
    BinaryHistograms,
    BinConfig,
    CumulativeTables,
    HistogramGrid,
    PairBatch,
    build_binary_histograms,
    build_joint_histogram,
    cumulative_tables,
    similarity_bin,
    soft_assign,
)
from chloss.loss import (
    chl,
    chl_grad_distances,
    chl_value_and_grad,
    chl_variant_l1,
    chl_variant_l2,
    grad_wrt_histogram,
    histogram_loss,
    hl_reduction_check,
)
from chloss.optimizer import (
    OptimizationRun,
    SimilarityDistribution,
    Trajectory,
    check_minimum,
    optimize_distances,
    sample_similarities,
)

__version__ = "0.1.0"

__all__ = [
    "BinConfig",
    "BinaryHistograms",
    "CumulativeTables",
    "DomainError",
    "HistogramGrid",
    "OptimizationRun",
    "PairBatch",
    "SimilarityDistribution",
    "Trajectory",
    "build_binary_histograms",
    "build_joint_histogram",
    "check_minimum",
    "chl",
    "chl_grad_distances",
    "chl_value_and_grad",
    "chl_variant_l1",
    "chl_variant_l2",
    "cumulative_tables",
    "grad_wrt_histogram",
    "histogram_loss",
    "hl_reduction_check",
    "optimize_distances",
    "sample_similarities",
    "similarity_bin",
    "soft_assign",
]

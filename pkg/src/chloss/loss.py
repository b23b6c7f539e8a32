"""Histogram Loss, Continuous Histogram Loss and their distance gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chloss.errors import DomainError
from chloss.histogram import (
    BinaryHistograms,
    BinConfig,
    HistogramGrid,
    PairBatch,
    build_binary_histograms,
    build_joint_histogram,
    cumulative_tables,
    exclusive_prefix,
    exclusive_suffix,
    segments,
    similarity_bins,
)


def histogram_loss(h: BinaryHistograms) -> float:
    """Probability that a negative pair is not farther than a positive one.

    Uses the inclusive positive tail ``sum(h_pos[r:])`` for every negative bin.
    """
    tail_pos = np.cumsum(h.h_pos[::-1])[::-1]
    return float(np.dot(h.h_neg, tail_pos))


def chl(h: HistogramGrid) -> float:
    """Continuous Histogram Loss: ``sum(h * phi)``."""
    return float(np.sum(h.values * cumulative_tables(h).phi))


def chl_variant_l1(h: HistogramGrid) -> float:
    """Reverse-orientation variant: ``sum(h * psi)``."""
    return float(np.sum(h.values * cumulative_tables(h).psi))


def chl_variant_l2(h: HistogramGrid) -> float:
    return chl(h) + chl_variant_l1(h)


def grad_wrt_histogram(h: HistogramGrid) -> np.ndarray:
    """``dL/dh[r, z] = phi[r, z] + psi[r, z]``, with grid entries as free variables."""
    tables = cumulative_tables(h)
    return tables.phi + tables.psi


def grad_l1_wrt_histogram(h: HistogramGrid) -> np.ndarray:
    tables = cumulative_tables(h)
    return tables.psi + tables.phi


def grad_l2_wrt_histogram(h: HistogramGrid) -> np.ndarray:
    return 2.0 * grad_wrt_histogram(h)


def _distance_grad_from_grid(
    h: HistogramGrid, seg: np.ndarray, z: np.ndarray, count: int
) -> np.ndarray:
    v = h.values
    lower = exclusive_prefix(v)  # mass at similarity bins < z, same distance row
    upper = exclusive_suffix(v)  # mass at similarity bins > z
    return (lower[seg + 1, z] - upper[seg, z]) * ((h.config.n - 1) / count)


def chl_grad_distances(batch: PairBatch, config: BinConfig) -> np.ndarray:
    """Exact ``dL/dd_i`` for every pair.

    Inside segment ``k`` the loss is linear in ``d_i``; moving ``d_i`` right
    shifts mass from row ``k`` to row ``k + 1`` of its similarity column. On
    an interior node the left segment is used, so the value there is the
    left-sided derivative.
    """
    return chl_value_and_grad(batch, config)[1]


def chl_value_and_grad(batch: PairBatch, config: BinConfig) -> tuple[float, np.ndarray]:
    h = build_joint_histogram(batch, config)
    seg, _ = segments(batch.distances, config.n)
    z = similarity_bins(batch.similarities, config.m)
    return chl(h), _distance_grad_from_grid(h, seg, z, len(batch))


def hl_value_and_grad(batch: PairBatch, config: BinConfig) -> tuple[float, np.ndarray]:
    """Histogram Loss and its exact gradient w.r.t. every distance."""
    hist = build_binary_histograms(batch, config)
    seg, _ = segments(batch.distances, config.n)
    positive = batch.similarities == 1.0
    grad = np.empty(len(batch))
    # dHL/dh_neg[r] = sum(h_pos[r:]); its step from r to r+1 is -h_pos[r]
    grad[~positive] = -hist.h_pos[seg[~positive]] / (config.delta_d * hist.count_neg)
    # dHL/dh_pos[r] = sum(h_neg[:r+1]); its step from r to r+1 is h_neg[r+1]
    grad[positive] = hist.h_neg[seg[positive] + 1] / (config.delta_d * hist.count_pos)
    return histogram_loss(hist), grad


@dataclass(frozen=True)
class ReductionCheck:
    chl_value: float
    hl_value: float
    prior_product: float
    residual: float


def hl_reduction_check(batch: PairBatch, config: BinConfig) -> ReductionCheck:
    """Compare CHL with the prior-weighted Histogram Loss on a binary batch."""
    hist = build_binary_histograms(batch, config)
    chl_value = chl(build_joint_histogram(batch, config))
    hl_value = histogram_loss(hist)
    total = len(batch)
    prior = (hist.count_neg / total) * (hist.count_pos / total)
    return ReductionCheck(
        chl_value=chl_value,
        hl_value=hl_value,
        prior_product=prior,
        residual=abs(chl_value - prior * hl_value),
    )


def prior_product(similarities) -> float:
    s = np.asarray(similarities)
    if not np.all((s == 0.0) | (s == 1.0)):
        raise DomainError("prior product is defined for binary similarities only")
    p = float(np.mean(s == 1.0))
    return p * (1.0 - p)

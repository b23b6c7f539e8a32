"""Siamese training of an embedding net on pair-level histogram losses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from chloss.embed.adam import Adam
from chloss.embed.data import LabeledDataset, class_similarity
from chloss.embed.net import (
    EmbeddingNet,
    MetricSpec,
    distance_grad_to_outputs,
    pair_geometry,
)
from chloss.errors import DomainError
from chloss.histogram import BinConfig, PairBatch
from chloss.loss import chl_value_and_grad, hl_value_and_grad

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 256
    pairs_per_batch: int | None = None
    bins: int = 100
    bins_sim: int = 100
    learning_rate: float = 0.002
    hidden: tuple[int, ...] = (256, 128)
    out_dim: int = 2
    loss: str = "chl"
    binary_similarity: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("chl", "hl"):
            raise DomainError(f"unknown loss {self.loss!r}")
        if self.loss == "hl" and not self.binary_similarity:
            raise DomainError("histogram loss needs binary similarity labels")
        if self.batch_size < 2:
            raise DomainError("batch size must be >= 2 to form pairs")
        if self.pairs_per_batch is not None and self.pairs_per_batch < 1:
            raise DomainError("pairs_per_batch must be positive")
        self.hidden = tuple(self.hidden)


@dataclass
class TrainResult:
    net: EmbeddingNet
    epoch_losses: list[float] = field(default_factory=list)
    # unscaled Histogram Loss per epoch in "hl" mode; equals epoch_losses for "chl"
    raw_losses: list[float] = field(default_factory=list)


def pair_similarities(labels_a, labels_b, num_classes: int, binary: bool) -> np.ndarray:
    if binary:
        return (labels_a == labels_b).astype(np.float64)
    return class_similarity(labels_a, labels_b, num_classes)


def batch_loss_and_grad(
    distances: np.ndarray, similarities: np.ndarray, config: TrainConfig
) -> tuple[float, float, np.ndarray]:
    """Return (optimized loss, raw loss, gradient w.r.t. distances).

    In "hl" mode the optimized objective is the Histogram Loss weighted by the
    batch's positive/negative prior product, which coincides with CHL on two
    similarity bins. Batches holding a single class contribute zero.
    """
    bins = BinConfig(config.bins, config.bins_sim)
    batch = PairBatch(distances, similarities)
    if config.loss == "chl":
        value, grad = chl_value_and_grad(batch, bins)
        return value, value, grad
    p_pos = float(np.mean(similarities == 1.0))
    prior = p_pos * (1.0 - p_pos)
    if prior == 0.0:
        return 0.0, 0.0, np.zeros_like(distances)
    value, grad = hl_value_and_grad(batch, bins)
    return prior * value, value, prior * grad


def _pair_indices(size: int, cap: int | None, rng: np.random.Generator):
    ia, ib = np.triu_indices(size, k=1)
    if cap is not None and ia.size > cap:
        keep = np.sort(rng.choice(ia.size, size=cap, replace=False))
        ia, ib = ia[keep], ib[keep]
    return ia, ib


def train_embedding(
    dataset: LabeledDataset,
    config: TrainConfig,
    net: EmbeddingNet | None = None,
    metric: MetricSpec = MetricSpec(),
) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    if net is None:
        sizes = (dataset.inputs.shape[1], *config.hidden, config.out_dim)
        net = EmbeddingNet.initialize(sizes, rng)
    if len(dataset) < 2:
        raise DomainError("dataset too small to form pairs")
    optimizer = Adam(net.parameters, lr=config.learning_rate)
    num_classes = dataset.num_classes
    result = TrainResult(net)

    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        losses, raw = [], []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            if idx.size < 2:
                continue
            ia, ib = _pair_indices(idx.size, config.pairs_per_batch, rng)
            labels = dataset.labels[idx]
            sims = pair_similarities(labels[ia], labels[ib], num_classes, config.binary_similarity)

            out, cache = net.forward(dataset.inputs[idx])
            distances, diff, e = pair_geometry(metric, out[ia], out[ib])
            value, raw_value, dL_dd = batch_loss_and_grad(distances, sims, config)

            g = distance_grad_to_outputs(metric, diff, e, dL_dd)
            grad_out = np.zeros_like(out)
            np.add.at(grad_out, ia, g)
            np.add.at(grad_out, ib, -g)
            optimizer.step(net.backward(cache, grad_out))
            net.touch()
            losses.append(value)
            raw.append(raw_value)
        result.epoch_losses.append(float(np.mean(losses)))
        result.raw_losses.append(float(np.mean(raw)))
        logger.info("epoch %d loss %.6g", epoch + 1, result.epoch_losses[-1])
    return result


def embed(net: EmbeddingNet, inputs: np.ndarray) -> np.ndarray:
    return net.forward(inputs)[0]


def ordering_score(embedding: np.ndarray, labels: np.ndarray) -> float:
    """Spearman correlation between class index and the centroid positions
    along the embedding's first principal direction."""
    centered = embedding - embedding.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    classes = np.unique(labels)
    centroids = np.array([embedding[labels == c].mean(axis=0) for c in classes])
    projection = centroids @ vt[0]
    return float(spearmanr(classes, projection)[0])

"""Central finite-difference checks of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chloss.embed.net import EmbeddingNet, MetricSpec, backward_pairs, forward_pairs
from chloss.histogram import BinConfig, PairBatch, build_joint_histogram, segments
from chloss.loss import chl, chl_grad_distances

DISTANCE_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4
ABSOLUTE_FLOOR = 1e-9


def relative_errors(analytic, numeric, floor: float = ABSOLUTE_FLOOR) -> np.ndarray:
    """``|a - n| / max(|a|, |n|)``, reported as 0 where ``|a - n| <= floor``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    return np.where(diff <= floor, 0.0, diff / np.where(scale > 0, scale, 1.0))


def central_difference(f, x: np.ndarray, eps: float) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for j in range(flat.size):
        saved = flat[j]
        flat[j] = saved + eps
        f_plus = f(x)
        flat[j] = saved - eps
        f_minus = f(x)
        flat[j] = saved
        out[j] = (f_plus - f_minus) / (2 * eps)
    return grad


def interior_batch(
    rng: np.random.Generator, pairs: int, config: BinConfig, margin: float = 1e-4
) -> PairBatch:
    """Random batch whose distances and similarities keep ``margin`` (in bin
    units) away from every node and similarity bin boundary."""

    def draw(scale, offset):
        x = rng.uniform(0.0, 1.0, size=pairs)
        while True:
            pos = x * scale - offset
            bad = np.abs(pos - np.round(pos)) < margin
            if not bad.any():
                return x
            x[bad] = rng.uniform(0.0, 1.0, size=bad.sum())

    return PairBatch(draw(config.n - 1, 0.0), draw(config.m - 1, 0.5))


@dataclass
class GradcheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    errors: np.ndarray

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0


def check_distance_gradient(
    batch: PairBatch, config: BinConfig, eps: float = 1e-7, grad_fn=None
) -> GradcheckReport:
    grad_fn = grad_fn or chl_grad_distances
    sims = batch.similarities

    def loss(d):
        return chl(build_joint_histogram(PairBatch(d, sims), config))

    analytic = grad_fn(batch, config)
    numeric = central_difference(loss, batch.distances, eps)
    return GradcheckReport(analytic, numeric, relative_errors(analytic, numeric))


def pipeline_gradients(net, metric, inputs_a, inputs_b, similarities, config):
    distances, cache = forward_pairs(net, metric, inputs_a, inputs_b)
    dL_dd = chl_grad_distances(PairBatch(distances, similarities), config)
    return backward_pairs(net, metric, cache, dL_dd)


def check_network_gradient(
    net: EmbeddingNet,
    inputs_a: np.ndarray,
    inputs_b: np.ndarray,
    similarities: np.ndarray,
    config: BinConfig,
    metric: MetricSpec = MetricSpec(),
    eps: float = 1e-6,
) -> GradcheckReport:
    """Compare backprop through the whole pipeline with finite differences,
    one parameter at a time. Raises if a perturbation moves any distance into
    another bin segment, where the loss is not differentiable."""
    analytic = pipeline_gradients(net, metric, inputs_a, inputs_b, similarities, config)
    base, _ = forward_pairs(net, metric, inputs_a, inputs_b)
    base_seg = segments(base, config.n)[0]
    numeric = []
    for p in net.parameters:

        def loss(values, p=p):
            saved = p.copy()
            p[...] = values
            try:
                d, _ = forward_pairs(net, metric, inputs_a, inputs_b)
                if not np.array_equal(segments(d, config.n)[0], base_seg):
                    raise ArithmeticError("finite-difference step crossed a bin node")
                return chl(build_joint_histogram(PairBatch(d, similarities), config))
            finally:
                p[...] = saved

        numeric.append(central_difference(loss, p.copy(), eps))
    a = np.concatenate([g.reshape(-1) for g in analytic])
    n = np.concatenate([g.reshape(-1) for g in numeric])
    return GradcheckReport(a, n, relative_errors(a, n))


def random_network_case(
    rng: np.random.Generator,
    layer_sizes=(8, 6, 2),
    pairs: int = 16,
    config: BinConfig = BinConfig(16, 16),
    margin: float = 0.02,
    metric: MetricSpec = MetricSpec(),
):
    """Random net, inputs and similarities with every distance at least
    ``margin`` bin widths from a node (redrawn until it is)."""
    while True:
        net = EmbeddingNet.initialize(layer_sizes, rng)
        xa = rng.normal(size=(pairs, layer_sizes[0]))
        xb = rng.normal(size=(pairs, layer_sizes[0]))
        d, _ = forward_pairs(net, metric, xa, xb)
        pos = d * (config.n - 1)
        if np.all(np.abs(pos - np.round(pos)) > margin):
            break
    sims = rng.uniform(0.0, 1.0, size=pairs)
    return net, xa, xb, sims

"""Dense ELU network and the bounded Euclidean pair metric, with manual backprop."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from chloss.errors import DomainError, StaleCacheError

_versions = itertools.count()


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


@dataclass
class EmbeddingNet:
    """Fully connected net; ELU after every layer except the last."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    version: int = field(default_factory=lambda: next(_versions))

    def __post_init__(self):
        self.layer_sizes = tuple(int(k) for k in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise DomainError(f"bad layer sizes {self.layer_sizes}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise DomainError(f"layer {i} parameters do not match sizes {expected}")

    @classmethod
    def initialize(cls, layer_sizes, rng: np.random.Generator) -> "EmbeddingNet":
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases)

    @property
    def parameters(self) -> list[np.ndarray]:
        """Flat view order: ``W0, b0, W1, b1, ...``."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "EmbeddingNet":
        return EmbeddingNet(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def touch(self) -> None:
        """Mark parameters as changed; older forward caches become stale."""
        self.version = next(_versions)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise DomainError(
                f"input of shape {x.shape} does not match input size {self.layer_sizes[0]}"
            )
        cache = []
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = a @ w + b
            cache.append((a, pre))
            a = pre if i == last else elu(pre)
        return a, cache

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients for upstream ``grad_out`` (same order as ``parameters``)."""
        grads = [None] * (2 * len(self.weights))
        delta = grad_out
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            a_in, pre = cache[i]
            if i != last:
                delta = delta * elu_grad(pre)
            grads[2 * i] = a_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = delta @ self.weights[i].T
        return grads


@dataclass(frozen=True)
class MetricSpec:
    """Euclidean distance squashed into ``[0, 1)`` by ``e / (1 + e)``."""

    def bound(self, e):
        return e / (1.0 + e)

    def bound_grad(self, e):
        return 1.0 / (1.0 + e) ** 2


def pair_geometry(metric: MetricSpec, out_a: np.ndarray, out_b: np.ndarray):
    diff = out_a - out_b
    e = np.sqrt(np.sum(diff * diff, axis=1))
    return metric.bound(e), diff, e


def distance_grad_to_outputs(metric: MetricSpec, diff, e, dL_dd) -> np.ndarray:
    """Upstream gradient w.r.t. the first element of every pair.

    The second element receives the negation. Coincident embeddings get a zero
    subgradient.
    """
    dL_de = np.asarray(dL_dd, dtype=np.float64) * metric.bound_grad(e)
    scale = np.divide(dL_de, e, out=np.zeros_like(e), where=e > 0)
    return diff * scale[:, None]


@dataclass
class PairCache:
    version: int
    cache_a: list
    cache_b: list
    diff: np.ndarray
    euclidean: np.ndarray


def forward_pairs(net: EmbeddingNet, metric: MetricSpec, inputs_a, inputs_b):
    """Bounded distances of ``(inputs_a[i], inputs_b[i])`` and a cache for backprop."""
    out_a, cache_a = net.forward(inputs_a)
    out_b, cache_b = net.forward(inputs_b)
    if out_a.shape[0] != out_b.shape[0]:
        raise DomainError("both sides of the pair list must have equal length")
    distances, diff, e = pair_geometry(metric, out_a, out_b)
    return distances, PairCache(net.version, cache_a, cache_b, diff, e)


def backward_pairs(net: EmbeddingNet, metric: MetricSpec, cache: PairCache, dL_dd):
    if cache.version != net.version:
        raise StaleCacheError("cache was produced before the last parameter update")
    g = distance_grad_to_outputs(metric, cache.diff, cache.euclidean, dL_dd)
    grads_a = net.backward(cache.cache_a, g)
    grads_b = net.backward(cache.cache_b, -g)
    # shared weights: both branch copies contribute
    return [ga + gb for ga, gb in zip(grads_a, grads_b)]

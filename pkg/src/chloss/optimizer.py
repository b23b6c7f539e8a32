"""Gradient descent directly in distance space, plus the zero-loss checker."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from chloss.errors import DomainError
from chloss.histogram import (
    BinConfig,
    HistogramGrid,
    PairBatch,
    build_joint_histogram,
    cumulative_tables,
)
from chloss.loss import chl_value_and_grad

logger = logging.getLogger(__name__)

DISTRIBUTION_KINDS = ("uniform", "concentrated", "mostly_dissimilar", "mostly_similar")
DEFAULT_SNAPSHOT_STEPS = (500, 1000, 3000)


@dataclass(frozen=True)
class SimilarityDistribution:
    kind: str
    mean: float | None = None
    std: float | None = None

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise DomainError(f"unknown similarity distribution {self.kind!r}")
        if self.kind == "uniform":
            if self.mean is not None or self.std is not None:
                raise DomainError("uniform similarity takes no parameters")
        elif self.std is None or self.mean is None or not self.std > 0:
            raise DomainError("truncated normal needs a mean and std > 0")

    @classmethod
    def preset(cls, kind: str) -> "SimilarityDistribution":
        """The four scenarios of the synthetic study (std 0.3 for all normals)."""
        means = {"concentrated": 0.5, "mostly_dissimilar": 0.0, "mostly_similar": 1.0}
        if kind == "uniform":
            return cls("uniform")
        if kind not in means:
            raise DomainError(f"unknown similarity distribution {kind!r}")
        return cls(kind, mean=means[kind], std=0.3)


def sample_similarities(
    dist: SimilarityDistribution, count: int, rng: np.random.Generator
) -> np.ndarray:
    if count < 1:
        raise DomainError("count must be >= 1")
    if dist.kind == "uniform":
        return rng.uniform(0.0, 1.0, size=count)
    # rejection from the untruncated normal, keeping draws inside [0, 1]
    kept = []
    have = 0
    while have < count:
        draw = rng.normal(dist.mean, dist.std, size=2 * (count - have) + 16)
        draw = draw[(draw >= 0.0) & (draw <= 1.0)]
        kept.append(draw)
        have += draw.size
    return np.concatenate(kept)[:count]


@dataclass
class OptimizationRun:
    batch: PairBatch
    config: BinConfig
    learning_rate: float = 0.1
    iterations: int = 3000
    snapshot_steps: tuple[int, ...] = DEFAULT_SNAPSHOT_STEPS
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError("learning rate must be positive")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        steps = tuple(sorted(set(int(s) for s in self.snapshot_steps)))
        if steps and (steps[0] < 1 or steps[-1] > self.iterations):
            raise DomainError(f"snapshot steps {steps} outside [1, {self.iterations}]")
        self.snapshot_steps = steps


@dataclass
class Trajectory:
    loss_curve: np.ndarray
    snapshots: list[tuple[int, HistogramGrid]] = field(default_factory=list)
    final_batch: PairBatch | None = None


def make_synthetic_run(
    kind: str,
    pairs: int = 10_000,
    bins: int = 51,
    bins_sim: int | None = None,
    learning_rate: float = 0.1,
    iterations: int = 3000,
    snapshot_steps=DEFAULT_SNAPSHOT_STEPS,
    seed: int = 0,
) -> OptimizationRun:
    """Uniform initial distances paired with similarities from one scenario."""
    rng = np.random.default_rng(seed)
    distances = rng.uniform(0.0, 1.0, size=pairs)
    similarities = sample_similarities(SimilarityDistribution.preset(kind), pairs, rng)
    steps = tuple(s for s in snapshot_steps if s <= iterations)
    return OptimizationRun(
        batch=PairBatch(distances, similarities),
        config=BinConfig(bins, bins_sim or bins),
        learning_rate=learning_rate,
        iterations=iterations,
        snapshot_steps=steps,
        seed=seed,
    )


def optimize_distances(run: OptimizationRun) -> Trajectory:
    """Vanilla gradient descent on the pair distances.

    ``loss_curve[t]`` is the loss before update ``t + 1``; the snapshot at step
    ``k`` is the histogram after ``k`` updates. Distances are clamped to
    ``[0, 1]`` after each update.
    """
    similarities = run.batch.similarities
    distances = run.batch.distances.copy()
    wanted = set(run.snapshot_steps)
    losses = np.empty(run.iterations)
    snapshots = []
    for step in range(run.iterations):
        batch = PairBatch(distances, similarities)
        losses[step], grad = chl_value_and_grad(batch, run.config)
        distances = np.clip(distances - run.learning_rate * grad, 0.0, 1.0)
        if step + 1 in wanted:
            snapshots.append(
                (step + 1, build_joint_histogram(PairBatch(distances, similarities), run.config))
            )
        if (step + 1) % 500 == 0:
            logger.debug("step %d loss %.6g", step + 1, losses[step])
    return Trajectory(
        loss_curve=losses,
        snapshots=snapshots,
        final_batch=PairBatch(distances, similarities),
    )


@dataclass(frozen=True)
class MinimumCheck:
    is_minimum: bool
    violations: list[tuple[int, int]]


def check_minimum(h: HistogramGrid, tolerance: float = 0.0) -> MinimumCheck:
    """Decide whether ``h`` is a zero-loss configuration.

    Cells with mass ``<= tolerance`` count as empty. The grid is a minimum when
    every occupied distance row holds a single similarity bin and the occupied
    similarity bins map to strictly decreasing distance bins. ``violations``
    lists the cells whose term ``h * phi`` exceeds the tolerance.
    """
    if tolerance < 0:
        raise DomainError("tolerance must be >= 0")
    occupied = h.values > tolerance
    rows, cols = np.nonzero(occupied)

    single_bin_rows = all(np.count_nonzero(occupied[r]) == 1 for r in set(rows.tolist()))
    decreasing = True
    used_cols = sorted(set(cols.tolist()))
    for lo, hi in zip(used_cols, used_cols[1:]):
        # every row of the lower similarity bin must sit above every row of the higher one
        if rows[cols == lo].min() <= rows[cols == hi].max():
            decreasing = False
            break

    terms = h.values * cumulative_tables(h).phi
    violations = [(int(r), int(z)) for r, z in zip(*np.nonzero(terms > tolerance))]
    return MinimumCheck(is_minimum=single_bin_rows and decreasing, violations=violations)

"""Bin geometry, triangular soft assignment and histogram construction.

Distances are spread over the two nearest distance nodes with a triangular
kernel so the histogram is piecewise linear in every distance. Similarities
are hard-assigned to the nearest similarity node. All bin indices used in
the public API are 0-based (``r`` in ``0..n-1``, ``z`` in ``0..m-1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chloss.errors import DomainError


@dataclass(frozen=True)
class PairBatch:
    """Distances and similarities of ``M`` pairs, both in ``[0, 1]``."""

    distances: np.ndarray
    similarities: np.ndarray

    def __post_init__(self):
        d = np.array(self.distances, dtype=np.float64).reshape(-1)
        s = np.array(self.similarities, dtype=np.float64).reshape(-1)
        if d.size == 0:
            raise DomainError("pair batch is empty")
        if d.shape != s.shape:
            raise DomainError(
                f"distances ({d.size}) and similarities ({s.size}) differ in length"
            )
        _check_unit_interval(d, "distance")
        _check_unit_interval(s, "similarity")
        d.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "similarities", s)

    def __len__(self) -> int:
        return self.distances.size

    def with_distances(self, distances) -> "PairBatch":
        return PairBatch(distances, self.similarities)


@dataclass(frozen=True)
class BinConfig:
    """Uniform bin grid on ``[0, 1]``: ``n`` distance nodes, ``m`` similarity nodes."""

    n: int
    m: int

    def __post_init__(self):
        for name in ("n", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise DomainError(f"{name} must be an integer >= 2, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def delta_d(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def delta_s(self) -> float:
        return 1.0 / (self.m - 1)

    @property
    def distance_nodes(self) -> np.ndarray:
        return np.arange(self.n) / (self.n - 1)

    @property
    def similarity_nodes(self) -> np.ndarray:
        return np.arange(self.m) / (self.m - 1)


@dataclass(frozen=True)
class HistogramGrid:
    """Joint distance/similarity histogram; ``values[r, z]`` sums to one."""

    values: np.ndarray
    config: BinConfig

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.config.n, self.config.m):
            raise DomainError(
                f"grid shape {v.shape} does not match bins ({self.config.n}, {self.config.m})"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("histogram entries must be finite and nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values) -> "HistogramGrid":
        v = np.asarray(values, dtype=np.float64)
        return cls(v, BinConfig(*v.shape))

    @property
    def mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class BinaryHistograms:
    h_pos: np.ndarray
    h_neg: np.ndarray
    count_pos: int
    count_neg: int


@dataclass(frozen=True)
class CumulativeTables:
    """Corner sums of a grid.

    ``phi[r, z]`` is the mass at distance bins ``>= r`` and similarity bins
    ``> z``; ``psi[r, z]`` is the mass at distance bins ``<= r`` and
    similarity bins ``< z``.
    """

    phi: np.ndarray
    psi: np.ndarray


def _check_unit_interval(x: np.ndarray, what: str) -> None:
    if not np.all((x >= 0.0) & (x <= 1.0)):
        bad = x[~((x >= 0.0) & (x <= 1.0))][0]
        raise DomainError(f"{what} {bad!r} outside [0, 1]")


def segments(distances, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Locate each distance on the node grid.

    Returns the segment index ``k`` (``d`` lies in ``[t_k, t_{k+1}]``, the left
    segment when ``d`` sits exactly on an interior node) and the fractional
    position ``d`` within that segment, in ``[0, 1]``.
    """
    x = np.asarray(distances, dtype=np.float64) * (n - 1)
    seg = np.clip(np.ceil(x) - 1.0, 0, n - 2).astype(np.intp)
    return seg, x - seg


def soft_assign(d: float, config: BinConfig) -> np.ndarray:
    """Triangular-kernel weights of distance ``d`` over the ``n`` distance bins."""
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"distance {d!r} outside [0, 1]")
    seg, frac = segments(d, config.n)
    weights = np.zeros(config.n)
    weights[seg] = 1.0 - frac
    weights[seg + 1] = frac
    return weights


def similarity_bins(similarities, m: int) -> np.ndarray:
    # nearest node, ties go to the lower bin
    x = np.asarray(similarities, dtype=np.float64) * (m - 1)
    return np.clip(np.ceil(x - 0.5), 0, m - 1).astype(np.intp)


def similarity_bin(s: float, config: BinConfig) -> int:
    """Index of the similarity node nearest to ``s``; midpoints go left."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"similarity {s!r} outside [0, 1]")
    return int(similarity_bins(s, config.m))


def _accumulate(flat_index: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    # Sum in a canonical order so that permuting pairs gives bit-identical bins.
    order = np.lexsort((weights, flat_index))
    return np.bincount(flat_index[order], weights=weights[order], minlength=size)


def build_joint_histogram(batch: PairBatch, config: BinConfig) -> HistogramGrid:
    seg, frac = segments(batch.distances, config.n)
    z = similarity_bins(batch.similarities, config.m)
    m = config.m
    index = np.concatenate([seg * m + z, (seg + 1) * m + z])
    weights = np.concatenate([1.0 - frac, frac])
    counts = _accumulate(index, weights, config.n * m)
    return HistogramGrid(counts.reshape(config.n, m) / len(batch), config)


def build_binary_histograms(batch: PairBatch, config: BinConfig) -> BinaryHistograms:
    s = batch.similarities
    positive = s == 1.0
    negative = s == 0.0
    if not np.all(positive | negative):
        raise DomainError("binary histograms need similarities in {0, 1}")
    count_pos, count_neg = int(positive.sum()), int(negative.sum())
    if count_pos == 0 or count_neg == 0:
        raise DomainError(
            f"need both positive and negative pairs (got {count_pos} / {count_neg})"
        )

    def one_sided(mask, count):
        seg, frac = segments(batch.distances[mask], config.n)
        index = np.concatenate([seg, seg + 1])
        return _accumulate(index, np.concatenate([1.0 - frac, frac]), config.n) / count

    return BinaryHistograms(
        h_pos=one_sided(positive, count_pos),
        h_neg=one_sided(negative, count_neg),
        count_pos=count_pos,
        count_neg=count_neg,
    )


def _suffix_sum(a: np.ndarray, axis: int) -> np.ndarray:
    return np.flip(np.cumsum(np.flip(a, axis), axis=axis), axis)


def exclusive_prefix(a: np.ndarray) -> np.ndarray:
    """Row-wise ``sum(a[:, :z])`` with exact zeros in the first column."""
    out = np.zeros_like(a)
    out[:, 1:] = np.cumsum(a, axis=1)[:, :-1]
    return out


def exclusive_suffix(a: np.ndarray) -> np.ndarray:
    """Row-wise ``sum(a[:, z+1:])`` with exact zeros in the last column."""
    out = np.zeros_like(a)
    out[:, :-1] = _suffix_sum(a, 1)[:, 1:]
    return out


def cumulative_tables(h: HistogramGrid) -> CumulativeTables:
    v = h.values
    phi = exclusive_suffix(_suffix_sum(v, 0))
    psi = exclusive_prefix(np.cumsum(v, axis=0))
    return CumulativeTables(phi=phi, psi=psi)


def format_number(x: float) -> str:
    # repr-level precision, never locale dependent
    return format(float(x), ".17g")


def grid_to_csv(h: HistogramGrid) -> str:
    lines = [f"# n={h.config.n} m={h.config.m}"]
    lines += [",".join(format_number(v) for v in row) for row in h.values]
    return "\n".join(lines) + "\n"


def write_grid_csv(h: HistogramGrid, path) -> None:
    Path(path).write_text(grid_to_csv(h), encoding="ascii")


def read_grid_csv(path) -> HistogramGrid:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    header = lines[0]
    if not header.startswith("# "):
        raise ValueError(f"missing grid header in {path}")
    fields = dict(part.split("=") for part in header[2:].split())
    n, m = int(fields["n"]), int(fields["m"])
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if values.shape != (n, m):
        raise ValueError(f"grid body {values.shape} does not match header ({n}, {m})")
    return HistogramGrid(values, BinConfig(n, m))

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chloss.errors import (
    BadMagicError,
    CountMismatchError,
    DomainError,
    TruncatedFileError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels).astype(np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DomainError(f"inputs {x.shape} and labels {y.shape} do not line up")
        if y.size and y.min() < 0:
            raise DomainError("labels must be nonnegative class ids")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)
        if self.num_classes < 2:
            raise DomainError("need at least two classes")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def __len__(self) -> int:
        return self.labels.size


def class_similarity(label_a, label_b, num_classes: int):
    """``1 - |a - b| / num_classes``; vectorizes over label arrays."""
    a = np.asarray(label_a)
    b = np.asarray(label_b)
    for labels in (a, b):
        if np.any((labels < 0) | (labels >= num_classes)):
            raise DomainError(f"label outside 0..{num_classes - 1}")
    sim = 1.0 - np.abs(a - b) / num_classes
    return float(sim) if sim.ndim == 0 else sim


def _read_idx(path, magic: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: unexpected magic 0x{found:08x}, wanted 0x{magic:08x}")
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise TruncatedFileError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    size = int(np.prod(dims))
    if len(raw) - header_end < size:
        raise TruncatedFileError(
            f"{path}: expected {size} data bytes, found {len(raw) - header_end}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header_end).reshape(dims)


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Read an IDX image/label file pair; pixels are scaled to ``[0, 1]``."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    inputs = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return LabeledDataset(inputs, labels.astype(np.int64))


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (used for fixtures and round trips)."""
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def make_blobs(
    num_classes: int, per_class: int, input_dim: int, spread: float, seed: int
) -> LabeledDataset:
    """Gaussian blobs whose centers sit at unit steps along the diagonal."""
    rng = np.random.default_rng(seed)
    direction = np.ones(input_dim) / np.sqrt(input_dim)
    labels = np.repeat(np.arange(num_classes), per_class)
    centers = labels[:, None] * direction[None, :]
    noise = rng.normal(0.0, 1.0, size=centers.shape) * spread
    return LabeledDataset(centers + noise, labels)

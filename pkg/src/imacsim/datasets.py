"""Dataset ingestion: MNIST IDX, CIFAR-10 binary batches, and synthetic data.

Both disk formats are parsed bit-exactly from the canonical layouts; files
may be gzip-compressed (detected by magic, not extension). Pixels are
normalized to [0, 1]; nothing is downloaded here, paths come from the user.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073  # 1 label byte + 3072 pixel bytes


class DataFormatError(ValueError):
    """Unreadable or inconsistent dataset file."""


@dataclass
class DatasetHandle:
    kind: str                      # mnist | cifar10 | synthetic
    train_images: np.ndarray       # float64 in [0, 1]
    train_labels: np.ndarray       # int64 class ids
    test_images: np.ndarray
    test_labels: np.ndarray

    def __post_init__(self):
        for split, (images, labels) in {
            "train": (self.train_images, self.train_labels),
            "test": (self.test_images, self.test_labels),
        }.items():
            if len(images) != len(labels):
                raise DataFormatError(
                    f"{split}: {len(images)} images but {len(labels)} labels"
                )

    def flat(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        images, labels = self._split(split)
        return images.reshape(len(images), -1), labels

    def channels_first(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        images, labels = self._split(split)
        if images.ndim == 3:
            images = images[:, None, :, :]
        return images, labels

    def _split(self, split: str):
        if split == "train":
            return self.train_images, self.train_labels
        if split == "test":
            return self.test_images, self.test_labels
        raise ValueError(f"unknown split {split!r}")


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    path = Path(path)
    data = _read_bytes(path)
    if len(data) < 16:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack_from(">IIII", data, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad image magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise DataFormatError(
            f"{path}: payload is {len(data) - 16} bytes, header implies {expected - 16}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows, cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    path = Path(path)
    data = _read_bytes(path)
    if len(data) < 8:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, count = struct.unpack_from(">II", data, 0)
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad label magic 0x{magic:08x}")
    if len(data) != 8 + count:
        raise DataFormatError(
            f"{path}: payload is {len(data) - 8} bytes, header implies {count}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)


def _find_file(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise DataFormatError(f"missing dataset file {stem}[.gz] in {directory}")


def load_mnist(path) -> DatasetHandle:
    """Load the four canonical IDX files from a directory; 28x28 enforced."""
    directory = Path(path)
    splits = {}
    for split, stem in (("train", "train"), ("test", "t10k")):
        images = read_idx_images(_find_file(directory, f"{stem}-images-idx3-ubyte"))
        labels = read_idx_labels(_find_file(directory, f"{stem}-labels-idx1-ubyte"))
        if images.shape[0] != labels.shape[0]:
            raise DataFormatError(
                f"{split}: {images.shape[0]} images but {labels.shape[0]} labels"
            )
        if images.shape[0] and images.shape[1:] != (28, 28):
            raise DataFormatError(f"{split}: images are {images.shape[1:]}, expected 28x28")
        splits[split] = (images, labels)
    return DatasetHandle(
        kind="mnist",
        train_images=splits["train"][0],
        train_labels=splits["train"][1],
        test_images=splits["test"][0],
        test_labels=splits["test"][1],
    )


def read_cifar_batch(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    data = _read_bytes(path)
    if len(data) % CIFAR_RECORD:
        raise DataFormatError(
            f"{path}: size {len(data)} is not a multiple of {CIFAR_RECORD}"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    images = records[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return images, labels


def load_cifar10(path) -> DatasetHandle:
    """Load data_batch_1..5.bin + test_batch.bin from a directory."""
    directory = Path(path)
    train_parts = []
    for i in range(1, 6):
        train_parts.append(read_cifar_batch(_find_file(directory, f"data_batch_{i}.bin")))
    test_images, test_labels = read_cifar_batch(_find_file(directory, "test_batch.bin"))
    return DatasetHandle(
        kind="cifar10",
        train_images=np.concatenate([p[0] for p in train_parts]),
        train_labels=np.concatenate([p[1] for p in train_parts]),
        test_images=test_images,
        test_labels=test_labels,
    )


def make_synthetic(
    rng: np.random.Generator,
    n_train: int = 512,
    n_test: int = 128,
    shape: tuple[int, ...] = (8, 8),
    classes: int = 4,
) -> DatasetHandle:
    """Separable-by-construction blobs for fast end-to-end exercises: each
    class lights up its own quadrant-ish pixel template plus noise."""
    size = int(np.prod(shape))
    templates = rng.uniform(0.25, 1.0, size=(classes, size)) * (
        rng.uniform(size=(classes, size)) < 0.3
    )

    def draw(count):
        labels = rng.integers(classes, size=count)
        images = 0.7 * templates[labels] + 0.15 * rng.uniform(size=(count, size))
        return np.clip(images, 0, 1).reshape(count, *shape), labels

    train_images, train_labels = draw(n_train)
    test_images, test_labels = draw(n_test)
    return DatasetHandle(
        kind="synthetic",
        train_images=train_images,
        train_labels=train_labels,
        test_images=test_images,
        test_labels=test_labels,
    )

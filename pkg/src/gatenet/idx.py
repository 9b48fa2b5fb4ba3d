"""IDX image/label files (MNIST, Fashion-MNIST)."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
# Binary variant: a pixel is on when strictly above this value.
PIXEL_THRESHOLD = 127


class IdxParseError(ValueError):
    pass


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else path.open("rb")


def read_idx_images(path) -> np.ndarray:
    with _open(path) as f:
        head = f.read(16)
        if len(head) < 16:
            raise IdxParseError(f"{path}: header truncated")
        magic, count, rows, cols = struct.unpack(">iiii", head)
        if magic != IMAGE_MAGIC:
            raise IdxParseError(f"{path}: image magic {magic}, expected {IMAGE_MAGIC}")
        data = f.read()
    if len(data) != count * rows * cols:
        raise IdxParseError(
            f"{path}: header promises {count}x{rows}x{cols} pixels, file holds {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with _open(path) as f:
        head = f.read(8)
        if len(head) < 8:
            raise IdxParseError(f"{path}: header truncated")
        magic, count = struct.unpack(">ii", head)
        if magic != LABEL_MAGIC:
            raise IdxParseError(f"{path}: label magic {magic}, expected {LABEL_MAGIC}")
        data = f.read()
    if len(data) != count:
        raise IdxParseError(f"{path}: header promises {count} labels, file holds {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).copy()


def read_idx(images_file, labels_file, variant: str = "threshold"):
    """Flattened features and labels.

    ``variant="threshold"`` gives 0/1 pixels (on above 127); ``"rate"`` gives
    ``pixel / 255``.
    """
    images = read_idx_images(images_file)
    labels = read_idx_labels(labels_file)
    if len(images) != len(labels):
        raise IdxParseError(f"{len(images)} images but {len(labels)} labels")
    flat = images.reshape(len(images), -1)
    if variant == "threshold":
        x = (flat > PIXEL_THRESHOLD).astype(np.float64)
    elif variant == "rate":
        x = flat.astype(np.float64) / 255.0
    else:
        raise ValueError(f"variant must be 'threshold' or 'rate', got {variant!r}")
    return x, labels.astype(np.int64)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    Path(path).write_bytes(struct.pack(">iiii", IMAGE_MAGIC, n, r, c) + images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">ii", LABEL_MAGIC, len(labels)) + labels.tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist(directory, split: str) -> tuple[Path, Path]:
    """Locate the standard MNIST-style file pair, gzipped or not.

    Both ``train-images-idx3-ubyte`` and ``train-images.idx3-ubyte`` names
    are accepted.
    """
    if split not in MNIST_FILES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    directory = Path(directory)
    found = []
    for stem in MNIST_FILES[split]:
        dotted = stem.replace("-idx", ".idx")
        for cand in (directory / stem, directory / f"{stem}.gz",
                     directory / dotted, directory / f"{dotted}.gz"):
            if cand.exists():
                found.append(cand)
                break
        else:
            raise FileNotFoundError(f"{directory}: no {stem}[.gz]")
    return found[0], found[1]

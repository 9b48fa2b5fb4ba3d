import gzip

import numpy as np
import pytest

from gatenet.idx import (IdxParseError, find_mnist, read_idx, read_idx_images,
                         read_idx_labels, write_idx_images, write_idx_labels)


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (20, 28, 28)).astype(np.uint8)
    images[0] = 0
    labels = rng.integers(0, 10, 20).astype(np.uint8)
    write_idx_images(tmp_path / "train-images-idx3-ubyte", images)
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte", labels)
    return tmp_path, images, labels


def test_round_trip(idx_pair):
    d, images, labels = idx_pair
    assert np.array_equal(read_idx_images(d / "train-images-idx3-ubyte"), images)
    assert np.array_equal(read_idx_labels(d / "train-labels-idx1-ubyte"), labels)


def test_variants(idx_pair):
    d, images, labels = idx_pair
    paths = find_mnist(d, "train")
    xb, y = read_idx(*paths, variant="threshold")
    xr, _ = read_idx(*paths, variant="rate")
    assert xb.shape == (20, 784) and y.tolist() == labels.tolist()
    assert not xb[0].any() and not xr[0].any()
    assert np.array_equal(xb, (xr >= 0.5).astype(float))
    assert np.array_equal(xb, (images.reshape(20, -1) > 127).astype(float))
    with pytest.raises(ValueError):
        read_idx(*paths, variant="gray")


def test_gzip_files(idx_pair, tmp_path):
    d, images, labels = idx_pair
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        raw = (d / stem).read_bytes()
        (d / stem).unlink()
        with gzip.open(d / f"{stem}.gz", "wb") as f:
            f.write(raw)
    x, y = read_idx(*find_mnist(d, "train"))
    assert x.shape == (20, 784)


def test_bad_magic_and_sizes(idx_pair):
    d, images, labels = idx_pair
    with pytest.raises(IdxParseError, match="magic"):
        read_idx_images(d / "train-labels-idx1-ubyte")
    p = d / "train-images-idx3-ubyte"
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(IdxParseError, match="promises"):
        read_idx_images(p)
    write_idx_labels(d / "short", labels[:5])
    with pytest.raises(IdxParseError):
        read_idx(d / "train-images-idx3-ubyte", d / "short")


def test_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        find_mnist(tmp_path, "test")

import gzip

import numpy as np
import pytest

from mtjsnn.mnist import bundled, load_dataset, read_idx, read_raw8, write_idx, write_raw8


def test_idx_roundtrip(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(7, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=7, dtype=np.uint8)
    write_idx(tmp_path / "i.idx", imgs)
    write_idx(tmp_path / "l.idx.gz", labels)
    np.testing.assert_array_equal(read_idx(tmp_path / "i.idx"), imgs)
    np.testing.assert_array_equal(read_idx(tmp_path / "l.idx.gz"), labels)
    raw = (tmp_path / "i.idx").read_bytes()
    assert int.from_bytes(raw[:4], "big") == 2051
    with gzip.open(tmp_path / "l.idx.gz") as fh:
        assert int.from_bytes(fh.read(4), "big") == 2049
    x, y = load_dataset(tmp_path / "i.idx", tmp_path / "l.idx.gz")
    assert x.max() <= 1.0 and x.dtype == float
    np.testing.assert_array_equal(y, labels)


def test_bad_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"\x00\x00\x08\x05" + b"\x00" * 16)
    with pytest.raises(ValueError):
        read_idx(tmp_path / "bad")


def test_raw8_roundtrip(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=5, dtype=np.uint8)
    write_raw8(tmp_path / "s.raw8", imgs, labels)
    a, b = read_raw8(tmp_path / "s.raw8")
    np.testing.assert_array_equal(a, imgs)
    np.testing.assert_array_equal(b, labels)
    x, y = load_dataset(tmp_path / "s.raw8")
    np.testing.assert_allclose(x, imgs / 255.0)


def test_bundled_subset():
    x, y = bundled("test")
    assert x.shape == (1000, 28, 28) and y.shape == (1000,)
    assert set(np.unique(y)) == set(range(10))
    xt, _ = bundled("train")
    assert len(xt) == 4000
